// Acceptance suite: one test case per criterion, each printing a single
// PASS/FAIL line. Heavy artifacts (trained baseline model, optimized
// patterns) are built once and shared between criteria.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "advpat/pipeline.hpp"

using namespace advpat;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct CriterionResult {
    bool ok = true;
    std::ostringstream notes;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes << "    failed: " << what << "\n";
        }
    }
};

template <typename Fn>
void run_criterion(int n, const char* name, double time_budget_s, Fn fn) {
    const double t0 = now_seconds();
    CriterionResult r;
    try {
        fn(r);
    } catch (const std::exception& e) {
        r.ok = false;
        r.notes << "    exception: " << e.what() << "\n";
    }
    const double elapsed = now_seconds() - t0;
    if (time_budget_s > 0 && elapsed > time_budget_s) {
        r.ok = false;
        r.notes << "    over time budget: " << elapsed << "s > " << time_budget_s << "s\n";
    }
    std::printf("[acceptance] criterion %d (%s): %s (%.1fs)\n", n, name,
                r.ok ? "PASS" : "FAIL", elapsed);
    if (!r.ok) std::fputs(r.notes.str().c_str(), stdout);
    std::fflush(stdout);
    CHECK(r.ok);
}

// ----- shared artifacts -------------------------------------------------------

const Dataset& full_dataset() {
    static const Dataset ds = [] {
        ToyDatasetConfig cfg;  // defaults: 20 identities x 3 cameras x 30 images
        cfg.seed = 1;
        return generate_toy_dataset(cfg);
    }();
    return ds;
}

const ReIDModel& baseline_model() {
    static const ReIDModel m = [] {
        TrainConfig tc;  // defaults: 10 epochs
        return train_model(full_dataset(), ModelVariant::classification_embedding, tc, 64);
    }();
    return m;
}

GeneratingSet adversary_genset(const Dataset& train, int adv_id, std::uint64_t seed) {
    const auto adv = detail_pipe::entries_of_identity(train, adv_id);
    std::vector<GenEntry> raw;
    std::vector<int> per_camera(16, 0);
    for (const auto& e : adv) {
        if (per_camera[e.camera] >= 8) continue;
        ++per_camera[e.camera];
        raw.push_back({e.image, e.camera, e.sequence, e.quad, false});
    }
    Rng rng = make_rng(seed, "acceptance-genset");
    return build_generating_set(raw, 6, AugmentConfig{}, rng, adv_id);
}

struct AttackArtifacts {
    Pattern pattern;
    Mask mask{24, 24, 1};
    MetricsTable gs_table;  // generating-set positions (train split)
    MetricsTable ts_table;  // held-out positions (test split)
};

AttackArtifacts run_full_attack(AttackMode mode) {
    const Dataset& ds = full_dataset();
    const ReIDModel& model = baseline_model();
    auto [train, test] = split_dataset(ds);

    const int adv_id = 1, target_id = 2;
    const GeneratingSet gs = adversary_genset(train, adv_id, mode == AttackMode::evade ? 21 : 22);

    std::vector<Image> targets;
    if (mode == AttackMode::impersonate) {
        // target views from every camera, else the pull term only ever sees
        // one camera style
        std::vector<int> per_cam(16, 0);
        for (const auto& e : detail_pipe::entries_of_identity(train, target_id)) {
            if (per_cam[e.camera] >= 4) continue;
            ++per_cam[e.camera];
            targets.push_back(e.image);
        }
    }

    AttackConfig cfg;  // defaults: robust stage, 700 iterations, 24x24 pattern
    cfg.mode = mode;
    cfg.seed = mode == AttackMode::evade ? 33 : 34;

    AttackArtifacts art;
    const OptimizationResult res = optimize_pattern(gs, model, cfg, art.mask, targets);
    art.pattern = res.pattern;

    std::vector<int> excluded{adv_id};
    std::vector<DatasetEntry> target_entries;
    if (mode == AttackMode::impersonate) {
        target_entries = detail_pipe::entries_of_identity(test, target_id);
        excluded.push_back(target_id);
    }
    const auto distractors = detail_pipe::entries_except_identities(test, excluded);

    EvalConfig ec;  // defaults: 100 queries, 12 cross-gallery images
    ec.seed = 99;
    auto eval_split = [&](const Dataset& split) {
        const auto adv = detail_pipe::entries_of_identity(split, adv_id);
        const auto attacked = apply_pattern_to_entries(adv, art.pattern, art.mask);
        return run_attack_evaluation(model, adv, attacked, distractors, target_entries, ec);
    };
    art.gs_table = eval_split(train);
    art.ts_table = eval_split(test);
    return art;
}

const AttackArtifacts& evade_artifacts() {
    static const AttackArtifacts art = run_full_attack(AttackMode::evade);
    return art;
}

const AttackArtifacts& impersonation_artifacts() {
    static const AttackArtifacts art = run_full_attack(AttackMode::impersonate);
    return art;
}

// ----- independent retrieval oracle (criterion 1) -----------------------------

struct OracleInstance {
    std::vector<std::vector<double>> gallery_embs;
    std::vector<int> ids, cams;
    std::vector<double> probe;
    int probe_id = 0, probe_cam = 0;
};

std::vector<int> oracle_order(const OracleInstance& inst) {
    const size_t n = inst.gallery_embs.size();
    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (size_t k = 0; k < inst.probe.size(); ++k) d += inst.probe[k] * inst.gallery_embs[i][k];
        scores[i] = 0.5 * (1.0 + d);
    }
    std::vector<bool> used(n, false);
    std::vector<int> order;
    for (size_t step = 0; step < n; ++step) {
        int best = -1;
        for (size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            if (best < 0 || scores[i] > scores[best]) best = static_cast<int>(i);
        }
        used[best] = true;
        order.push_back(best);
    }
    return order;
}

bool oracle_relevant(const OracleInstance& inst, int g) {
    return inst.ids[g] == inst.probe_id && inst.cams[g] != inst.probe_cam;
}

double oracle_rank_k(const OracleInstance& inst, int k) {
    const auto order = oracle_order(inst);
    const int kk = std::min<int>(k, static_cast<int>(order.size()));
    for (int i = 0; i < kk; ++i)
        if (oracle_relevant(inst, order[i])) return 1.0;
    return 0.0;
}

double oracle_ap(const OracleInstance& inst) {  // -1 when no relevant item
    const auto order = oracle_order(inst);
    int R = 0;
    for (size_t g = 0; g < inst.ids.size(); ++g)
        if (oracle_relevant(inst, static_cast<int>(g))) ++R;
    if (R == 0) return -1.0;
    double ap = 0.0;
    int hits = 0;
    for (size_t i = 0; i < order.size(); ++i)
        if (oracle_relevant(inst, order[i])) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    return ap / R;
}

std::vector<double> unit_vec(int dim, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double s = 0.0;
    for (double& x : v) { x = n(rng); s += x * x; }
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return v;
}

ReIDModel tiny_model(std::uint64_t seed) {
    Rng rng = make_rng(seed, "acceptance-tiny-model");
    ReIDModel m;
    m.net = EmbeddingNet(16, 16, 12, rng);
    m.classifier.init(12, 2, rng);
    m.num_classes = 2;
    return m;
}

GeneratingSet tiny_genset(Rng& rng) {
    GeneratingSet gs;
    for (int c = 1; c <= 2; ++c)
        for (int k = 0; k < 2; ++k) {
            Image x(16, 16);
            for (double& v : x.data()) v = uniform(rng, 0.0, 1.0);
            gs.entries.push_back({std::move(x), c, k, AnchorQuad::rect(3, 3, 12, 12), false});
        }
    return gs;
}

Pattern random_delta(Rng& rng, int h, int w) {
    Pattern p(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < kChannels; ++c)
                p.at(y, x, c) = uniform(rng, p.interval().lower[c], p.interval().upper[c]);
    return p;
}

}  // namespace

// -------------------------------------------------------------------------------

TEST_CASE("criterion 1: retrieval metric oracles") {
    run_criterion(1, "rank-k and mAP vs brute-force oracles", 30.0, [](CriterionResult& r) {
        Rng rng = make_rng(2024, "acceptance-metrics");
        int checked_map = 0;
        for (int trial = 0; trial < 200; ++trial) {
            OracleInstance inst;
            const int n = uniform_int(rng, 1, 50);
            inst.probe = unit_vec(6, rng);
            inst.probe_id = uniform_int(rng, 1, 5);
            inst.probe_cam = uniform_int(rng, 1, 3);
            for (int i = 0; i < n; ++i) {
                inst.gallery_embs.push_back(unit_vec(6, rng));
                inst.ids.push_back(uniform_int(rng, 1, 5));
                inst.cams.push_back(uniform_int(rng, 1, 3));
            }
            Gallery g;
            for (int i = 0; i < n; ++i)
                g.items.push_back({inst.gallery_embs[i], inst.ids[i], inst.cams[i], false});
            const QueryResult qr = run_query_embedded(
                inst.probe, ProbeDescriptor{inst.probe_id, inst.probe_cam, false}, g);
            const std::vector<QueryResult> rs{qr};
            for (int k : {1, 5, 10}) {
                const double got = rank_k_accuracy(rs, k);
                const double want = oracle_rank_k(inst, k);
                r.require(std::abs(got - want) <= 1e-9,
                          "rank-" + std::to_string(k) + " mismatch on trial " + std::to_string(trial));
            }
            const double want_ap = oracle_ap(inst);
            if (want_ap >= 0.0) {
                ++checked_map;
                const double got_ap = mean_average_precision(rs);
                r.require(std::abs(got_ap - want_ap) <= 1e-9,
                          "mAP mismatch on trial " + std::to_string(trial));
            }
        }
        r.require(checked_map >= 100, "too few instances exercised the mAP path");
    });
}

TEST_CASE("criterion 2: total-variation correctness") {
    run_criterion(2, "TV value and gradient", 10.0, [](CriterionResult& r) {
        Pattern flat(8, 8);
        const TvResult ft = total_variation(flat);
        r.require(ft.value == 0.0, "constant pattern TV not exactly 0");
        for (double g : ft.grad)
            r.require(g == 0.0, "constant pattern TV gradient not exactly 0");

        Rng rng = make_rng(77, "acceptance-tv");
        const double step = 1e-5;
        for (int trial = 0; trial < 10; ++trial) {
            Pattern p = random_delta(rng, 8, 8);
            const TvResult tv = total_variation(p);
            for (size_t i = 0; i < p.size(); ++i) {
                Pattern hi = p, lo = p;
                hi.data()[i] += step;
                lo.data()[i] -= step;
                const double fd =
                    (total_variation(hi).value - total_variation(lo).value) / (2 * step);
                const double scale = std::max({std::abs(fd), std::abs(tv.grad[i]), 1e-4});
                r.require(std::abs(tv.grad[i] - fd) <= 1e-4 * scale,
                          "TV gradient off at trial " + std::to_string(trial) + " index " +
                              std::to_string(i));
            }
        }
    });
}

TEST_CASE("criterion 3: end-to-end attack-loss gradients") {
    run_criterion(3, "robust loss gradients vs finite differences", 120.0, [](CriterionResult& r) {
        const ReIDModel model = tiny_model(5);
        Rng rng = make_rng(6, "acceptance-grad");
        const GeneratingSet gs = tiny_genset(rng);
        const Pattern delta = random_delta(rng, 8, 8);
        Mask mask(8, 8, 1);
        const DegradeParams fixed{0.9, 0.9, 0.6, 0.6};  // lo == hi: one fixed sample
        Rng srng = make_rng(7, "acceptance-samp");
        const Triplet tri = sample_triplet(gs, srng);
        std::vector<Image> targets;
        {
            Image t(16, 16);
            for (double& v : t.data()) v = uniform(rng, 0.0, 1.0);
            targets.push_back(std::move(t));
        }
        Quadruplet quad;
        quad.tri = tri;
        quad.target = &targets[0];

        // 50 distinct pixel coordinates
        std::vector<size_t> coords;
        while (coords.size() < 50) {
            const size_t i = static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(delta.size()) - 1));
            if (std::find(coords.begin(), coords.end(), i) == coords.end()) coords.push_back(i);
        }

        auto check_loss = [&](const char* label, auto loss_fn, const std::vector<double>& grad) {
            int agree = 0;
            const double step = 1e-5;
            for (size_t i : coords) {
                Pattern hi = delta, lo = delta;
                hi.data()[i] += step;
                lo.data()[i] -= step;
                const double fd = (loss_fn(hi) - loss_fn(lo)) / (2 * step);
                const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
                if (std::abs(fd - grad[i]) <= 1e-2 * scale) ++agree;
            }
            r.require(agree >= 48,  // >= 95% of 50
                      std::string(label) + ": only " + std::to_string(agree) + "/50 agreed");
        };

        {
            Rng lr = make_rng(8, "acceptance-loss");
            const LossAndGrad lg = robust_evading_loss(tri, delta, mask, model, 0.5, 1e-3, fixed, lr);
            check_loss("evading", [&](const Pattern& p) {
                Rng rr = make_rng(8, "acceptance-loss");
                return robust_evading_loss(tri, p, mask, model, 0.5, 1e-3, fixed, rr).loss;
            }, lg.grad);
        }
        {
            Rng lr = make_rng(9, "acceptance-loss");
            const LossAndGrad lg =
                robust_impersonation_loss(quad, delta, mask, model, 0.5, 1.0, 1e-3, fixed, lr);
            check_loss("impersonation", [&](const Pattern& p) {
                Rng rr = make_rng(9, "acceptance-loss");
                return robust_impersonation_loss(quad, p, mask, model, 0.5, 1.0, 1e-3, fixed, rr).loss;
            }, lg.grad);
        }
    });
}

TEST_CASE("criterion 4: objective reduction identities") {
    run_criterion(4, "robust/triplet and impersonate/evade reductions", 60.0,
                  [](CriterionResult& r) {
        const ReIDModel model = tiny_model(11);
        Rng rng = make_rng(12, "acceptance-red");
        const GeneratingSet gs = tiny_genset(rng);
        const Pattern delta = random_delta(rng, 8, 8);
        Mask mask(8, 8, 1);

        // robust form with identity degradation and kappa = 0 equals the
        // plain triplet objective, recomputed independently term by term
        Rng srng = make_rng(13, "acceptance-samp");
        const Triplet t = sample_triplet(gs, srng);
        const double beta = 0.5;
        Rng lr = make_rng(14, "acceptance-loss");
        const LossAndGrad lg =
            robust_evading_loss(t, delta, mask, model, beta, 0.0, DegradeParams::identity(), lr);
        auto adv_image = [&](const GenEntry& e) {
            const Homography h = pattern_to_quad(delta, e.quad);
            return overlay(e.image, warp_pattern(delta, mask, h, e.image.height(), e.image.width()));
        };
        const double f_on = similarity(model, adv_image(*t.anchor), adv_image(*t.negative));
        const double f_op = similarity(model, adv_image(*t.anchor), adv_image(*t.positive));
        r.require(std::abs(lg.loss - (f_on - beta * f_op)) <= 1e-9,
                  "robust(identity, kappa=0) != triplet objective");

        // pairwise impersonation with alpha = 0 equals the pairwise evading
        // objective, loss and gradient
        Image target(16, 16, 0.5);
        const LossAndGrad ev = pairwise_objective(gs, delta, mask, model, AttackMode::evade, 0.0);
        const LossAndGrad im =
            pairwise_objective(gs, delta, mask, model, AttackMode::impersonate, 0.0, &target);
        r.require(std::abs(ev.loss - im.loss) <= 1e-9, "pairwise alpha=0 loss mismatch");
        for (size_t i = 0; i < ev.grad.size(); ++i)
            r.require(std::abs(ev.grad[i] - im.grad[i]) <= 1e-9,
                      "pairwise alpha=0 gradient mismatch at " + std::to_string(i));

        // cross-check the pairwise evade sum against pairwise similarity terms
        double direct = 0.0;
        for (size_t i = 0; i < gs.entries.size(); ++i)
            for (size_t j = 0; j < gs.entries.size(); ++j) {
                if (i == j || gs.entries[i].camera == gs.entries[j].camera) continue;
                direct += similarity(model, adv_image(gs.entries[i]), adv_image(gs.entries[j]));
            }
        r.require(std::abs(ev.loss - direct) <= 1e-9, "pairwise evade sum mismatch");
    });
}

TEST_CASE("criterion 5: constraint invariants") {
    run_criterion(5, "interval projection, mask and coverage invariants", 120.0,
                  [](CriterionResult& r) {
        const ReIDModel model = tiny_model(15);
        Rng rng = make_rng(16, "acceptance-inv");
        const GeneratingSet gs = tiny_genset(rng);
        AttackConfig cfg;
        cfg.pattern_height = cfg.pattern_width = 8;
        cfg.max_iterations = 40;
        cfg.seed = 17;
        Mask mask(8, 8, 1);
        for (int x = 0; x < 8; ++x) mask.at(7, x) = 0;  // dead bottom row

        int violations = 0;
        optimize_pattern(gs, model, cfg, mask, {}, [&](int, const Pattern& p) {
            for (int y = 0; y < p.height(); ++y)
                for (int x = 0; x < p.width(); ++x)
                    for (int c = 0; c < kChannels; ++c)
                        if (p.at(y, x, c) < cfg.interval.lower[c] ||
                            p.at(y, x, c) > cfg.interval.upper[c])
                            ++violations;
        });
        r.require(violations == 0, "pattern left the interval during optimization");

        // masked-out pattern pixels never change any adversarial image pixel
        Pattern a = random_delta(rng, 8, 8);
        Pattern b = a;
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < kChannels; ++c) b.at(7, x, c) = uniform(rng, 0.0, 1.0);
        for (const auto& e : gs.entries) {
            const Homography h = pattern_to_quad(a, e.quad);
            const Image xa = overlay(e.image, warp_pattern(a, mask, h, 16, 16));
            const Image xb = overlay(e.image, warp_pattern(b, mask, h, 16, 16));
            r.require(xa == xb, "masked-out pattern pixels leaked into an adversarial image");
        }

        // overlay never alters pixels outside coverage
        const Homography h = pattern_to_quad(a, gs.entries.front().quad);
        const WarpedPattern wp = warp_pattern(a, mask, h, 16, 16);
        const Image& x = gs.entries.front().image;
        const Image out = overlay(x, wp);
        for (int y = 0; y < 16; ++y)
            for (int xx = 0; xx < 16; ++xx)
                if (!wp.cov(y, xx))
                    for (int c = 0; c < kChannels; ++c)
                        r.require(out.at(y, xx, c) == x.at(y, xx, c),
                                  "overlay changed a pixel outside coverage");
    });
}

TEST_CASE("criterion 6: toy clean baseline") {
    run_criterion(6, "held-out cross-camera rank-1 of the trained baseline", 900.0,
                  [](CriterionResult& r) {
        const ReIDModel& m = baseline_model();
        r.require(m.holdout_rank1 >= 0.80,
                  "held-out rank-1 " + std::to_string(m.holdout_rank1) + " < 0.80");
        std::printf("    baseline held-out rank-1 = %.3f\n", m.holdout_rank1);
    });
}

TEST_CASE("criterion 7: evading efficacy") {
    run_criterion(7, "self-match rank-1 halved and ss drop >= 0.10", 900.0,
                  [](CriterionResult& r) {
        const AttackArtifacts& art = evade_artifacts();
        const MetricsRow* clean = art.gs_table.find("clean_self");
        const MetricsRow* attacked = art.gs_table.find("attacked_self");
        r.require(clean && attacked, "missing evaluation rows");
        if (!clean || !attacked) return;
        std::printf("    clean rank-1 = %.3f, attacked rank-1 = %.3f, ss drop = %.3f\n",
                    clean->rank1, attacked->rank1, attacked->d_ss);
        r.require(attacked->rank1 <= 0.5 * clean->rank1,
                  "attacked self rank-1 not halved: " + std::to_string(attacked->rank1) + " vs clean " +
                      std::to_string(clean->rank1));
        r.require(attacked->d_ss >= 0.10,
                  "mean self-similarity drop " + std::to_string(attacked->d_ss) + " < 0.10");
    });
}

TEST_CASE("criterion 8: impersonation efficacy") {
    run_criterion(8, "target retrieval and self-match degradation", 1200.0,
                  [](CriterionResult& r) {
        const AttackArtifacts& art = impersonation_artifacts();
        const MetricsRow* clean = art.gs_table.find("clean_self");
        const MetricsRow* self = art.gs_table.find("attacked_self");
        const MetricsRow* tgt = art.gs_table.find("attacked_target");
        r.require(clean && self && tgt, "missing evaluation rows");
        if (!clean || !self || !tgt) return;
        std::printf("    target rank-1 = %.3f, target top-10 = %.3f, self rank-1 %.3f -> %.3f\n",
                    tgt->rank1, tgt->rank10, clean->rank1, self->rank1);
        r.require(tgt->rank1 >= 0.40,
                  "probe-to-target rank-1 " + std::to_string(tgt->rank1) + " < 0.40");
        r.require(tgt->rank10 >= 0.70,
                  "target in top-10 for " + std::to_string(tgt->rank10) + " of queries < 0.70");
        r.require(self->rank1 < clean->rank1,
                  "adversary self rank-1 did not fall below its clean value");
    });
}

TEST_CASE("criterion 9: scalability to held-out positions") {
    run_criterion(9, "rank-1 drop retained on held-out positions", 300.0,
                  [](CriterionResult& r) {
        const AttackArtifacts& art = evade_artifacts();
        const MetricsRow* gs_clean = art.gs_table.find("clean_self");
        const MetricsRow* gs_att = art.gs_table.find("attacked_self");
        const MetricsRow* ts_clean = art.ts_table.find("clean_self");
        const MetricsRow* ts_att = art.ts_table.find("attacked_self");
        r.require(gs_clean && gs_att && ts_clean && ts_att, "missing evaluation rows");
        if (!gs_clean || !gs_att || !ts_clean || !ts_att) return;
        const double drop_gs = gs_clean->rank1 - gs_att->rank1;
        const double drop_ts = ts_clean->rank1 - ts_att->rank1;
        std::printf("    generating-set drop = %.3f, held-out drop = %.3f\n", drop_gs, drop_ts);
        r.require(drop_gs > 0.0, "no rank-1 drop on the generating-set positions");
        r.require(drop_ts >= 0.70 * drop_gs,
                  "held-out drop " + std::to_string(drop_ts) + " < 70% of " +
                      std::to_string(drop_gs));
    });
}

TEST_CASE("criterion 10: pipeline determinism") {
    run_criterion(10, "byte-identical patterns and metrics across reruns", 900.0,
                  [](CriterionResult& r) {
        const fs::path base = fs::temp_directory_path() / "advpat_acceptance_det";
        fs::remove_all(base);
        ExperimentConfig cfg;
        cfg.seed = 5;
        cfg.toy.identity_count = 6;
        cfg.toy.images_per_identity_per_camera = 10;
        cfg.train.epochs = 3;
        cfg.attack.max_iterations = 120;
        cfg.eval.num_queries = 40;

        auto one_run = [&](const std::string& name) {
            ExperimentConfig c = cfg;
            c.output_dir = base / name;
            Experiment exp(c);
            return exp.run();
        };
        const ReportBundle a = one_run("a");
        const ReportBundle b = one_run("b");

        r.require(io::hash_file(a.pattern_png) == io::hash_file(b.pattern_png),
                  "pattern PNGs differ between reruns");
        r.require(io::hash_file(a.metrics_csv) == io::hash_file(b.metrics_csv),
                  "metrics CSVs differ between reruns");
        r.require(a.metrics.to_csv() == b.metrics.to_csv(),
                  "in-memory metrics tables differ between reruns");
        r.require(a.metrics.to_text() == b.metrics.to_text(),
                  "rendered metrics tables differ between reruns");
        fs::remove_all(base);
    });
}
