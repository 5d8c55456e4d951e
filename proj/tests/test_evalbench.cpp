#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "advpat/evalbench.hpp"

using namespace advpat;

namespace {

std::vector<double> unit_vec(int dim, std::mt19937& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    double s = 0.0;
    for (double& x : v) { x = n(rng); s += x * x; }
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return v;
}

// Independent retrieval oracle: repeated selection of the best remaining
// item (ties by lowest index), plus direct rank-k and AP computations.
struct OracleInstance {
    std::vector<std::vector<double>> gallery_embs;
    std::vector<int> ids, cams;
    std::vector<double> probe;
    int probe_id, probe_cam;
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

double oracle_rank_k(const OracleInstance& inst, int k) {
    const auto order = oracle_order(inst);
    const int kk = std::min<int>(k, static_cast<int>(order.size()));
    for (int i = 0; i < kk; ++i) {
        const int g = order[i];
        if (inst.ids[g] == inst.probe_id && inst.cams[g] != inst.probe_cam) return 1.0;
    }
    return 0.0;
}

// Returns -1 when the query has no relevant item.
double oracle_ap(const OracleInstance& inst) {
    const auto order = oracle_order(inst);
    int R = 0;
    for (size_t g = 0; g < inst.ids.size(); ++g)
        if (inst.ids[g] == inst.probe_id && inst.cams[g] != inst.probe_cam) ++R;
    if (R == 0) return -1.0;
    double ap = 0.0;
    int hits = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        const int g = order[i];
        if (inst.ids[g] == inst.probe_id && inst.cams[g] != inst.probe_cam) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return ap / R;
}

QueryResult to_query_result(const OracleInstance& inst) {
    Gallery g;
    for (size_t i = 0; i < inst.gallery_embs.size(); ++i)
        g.items.push_back({inst.gallery_embs[i], inst.ids[i], inst.cams[i], false});
    ProbeDescriptor pd{inst.probe_id, inst.probe_cam, false};
    return run_query_embedded(inst.probe, pd, g);
}

OracleInstance random_instance(std::mt19937& rng, int gallery_size, int dim = 6) {
    OracleInstance inst;
    std::uniform_int_distribution<int> uid(1, 4), ucam(1, 3);
    inst.probe = unit_vec(dim, rng);
    inst.probe_id = uid(rng);
    inst.probe_cam = ucam(rng);
    for (int i = 0; i < gallery_size; ++i) {
        inst.gallery_embs.push_back(unit_vec(dim, rng));
        inst.ids.push_back(uid(rng));
        inst.cams.push_back(ucam(rng));
    }
    return inst;
}

std::vector<DatasetEntry> toy_entries_of(const Dataset& ds, int identity) {
    std::vector<DatasetEntry> out;
    for (const auto& e : ds.entries)
        if (e.identity == identity) out.push_back(e);
    return out;
}

std::vector<DatasetEntry> toy_entries_except(const Dataset& ds, int a, int b) {
    std::vector<DatasetEntry> out;
    for (const auto& e : ds.entries)
        if (e.identity != a && e.identity != b) out.push_back(e);
    return out;
}

}  // namespace

TEST_CASE("query ranking is descending with ties broken by ascending gallery index") {
    Gallery g;
    std::vector<double> probe{1.0, 0.0};
    g.items.push_back({{0.0, 1.0}, 1, 2, false});   // score 0.5
    g.items.push_back({{1.0, 0.0}, 2, 2, false});   // score 1.0
    g.items.push_back({{0.0, -1.0}, 3, 2, false});  // score 0.5 (tie with item 0)
    const QueryResult r = run_query_embedded(probe, ProbeDescriptor{1, 1, false}, g);
    REQUIRE(r.ranked.size() == 3u);
    CHECK(r.ranked[0].first == 1);
    CHECK(r.ranked[1].first == 0);  // tie resolved toward the lower index
    CHECK(r.ranked[2].first == 2);
    CHECK(r.ranked[0].second >= r.ranked[1].second);
    CHECK(r.ranked[1].second >= r.ranked[2].second);
    // relevance: same identity, different camera
    CHECK(r.relevant[1]);
    CHECK_FALSE(r.relevant[0]);
}

TEST_CASE("same-camera gallery items of the probe identity are not relevant") {
    Gallery g;
    g.items.push_back({{1.0, 0.0}, 5, 1, false});  // same id, same camera
    g.items.push_back({{0.9, 0.1}, 5, 2, false});  // same id, other camera
    const QueryResult r = run_query_embedded({1.0, 0.0}, ProbeDescriptor{5, 1, false}, g);
    CHECK(r.relevant_count() == 1);
}

TEST_CASE("rank-k and mAP match the independent oracle on random instances") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        const OracleInstance inst = random_instance(rng, 1 + trial % 20);
        const QueryResult qr = to_query_result(inst);
        std::vector<QueryResult> rs{qr};
        for (int k : {1, 3, 5})
            CHECK(rank_k_accuracy(rs, k) == Catch::Approx(oracle_rank_k(inst, k)).margin(1e-12));
        const double ap = oracle_ap(inst);
        if (ap < 0) {
            int excl = 0;
            CHECK_THROWS_AS(mean_average_precision(rs, &excl), ProtocolError);
        } else {
            CHECK(mean_average_precision(rs) == Catch::Approx(ap).margin(1e-12));
        }
    }
}

TEST_CASE("mAP on a hand-computed ranking") {
    // relevance down the ranking: 1,0,1 with R=2 -> AP = (1 + 2/3) / 2
    QueryResult r;
    r.probe = {1, 1, false};
    r.ranked = {{0, 0.9}, {1, 0.8}, {2, 0.7}};
    r.relevant = {true, false, true};
    CHECK(mean_average_precision({r}) == Catch::Approx(5.0 / 6.0).margin(1e-12));

    QueryResult perfect = r;
    perfect.relevant = {true, true, false};
    CHECK(mean_average_precision({perfect}) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("queries without relevant items are excluded from mAP and counted") {
    QueryResult good;
    good.ranked = {{0, 0.9}, {1, 0.8}};
    good.relevant = {true, false};
    QueryResult barren;
    barren.ranked = {{0, 0.9}};
    barren.relevant = {false};
    int excluded = 0;
    CHECK(mean_average_precision({good, barren}, &excluded) == Catch::Approx(1.0).margin(1e-12));
    CHECK(excluded == 1);
    excluded = 0;
    CHECK_THROWS_AS(mean_average_precision({barren}, &excluded), ProtocolError);
}

TEST_CASE("rank-k clamps k to the gallery size and counts the clamp") {
    QueryResult r;
    r.ranked = {{0, 0.9}, {1, 0.8}};
    r.relevant = {false, true};
    int clamps = 0;
    CHECK(rank_k_accuracy({r}, 10, &clamps) == Catch::Approx(1.0));
    CHECK(clamps == 1);
    CHECK(rank_k_accuracy({r}, 1) == Catch::Approx(0.0));
    CHECK_THROWS_AS(rank_k_accuracy({r}, 0), std::invalid_argument);
    CHECK_THROWS_AS(rank_k_accuracy({}, 1), std::invalid_argument);
}

TEST_CASE("mean similarity averages the scores of relevant items only") {
    QueryResult r;
    r.ranked = {{0, 0.9}, {1, 0.6}, {2, 0.3}};
    r.relevant = {true, false, true};
    CHECK(mean_similarity({r}) == Catch::Approx(0.6).margin(1e-12));
    QueryResult barren;
    barren.ranked = {{0, 0.4}};
    barren.relevant = {false};
    CHECK(mean_similarity({barren}) == 0.0);
}

TEST_CASE("a gallery with only one relevant adversarial image gives rank-1 = 1 trivially") {
    Gallery g;
    g.items.push_back({{1.0, 0.0, 0.0}, 4, 2, true});
    const QueryResult r = run_query_embedded({0.0, 1.0, 0.0}, ProbeDescriptor{4, 1, true}, g);
    CHECK(rank_k_accuracy({r}, 1) == 1.0);
    CHECK(mean_average_precision({r}) == 1.0);
}

TEST_CASE("applying the pattern changes pixels only inside the anchor quads") {
    ToyDatasetConfig cfg;
    cfg.identity_count = 2;
    cfg.images_per_identity_per_camera = 2;
    const Dataset ds = generate_toy_dataset(cfg);
    Pattern p(8, 8);
    for (double& v : p.data()) v = 0.8;
    Mask m(8, 8, 1);
    const auto attacked = apply_pattern_to_entries(ds.entries, p, m);
    REQUIRE(attacked.size() == ds.entries.size());
    for (size_t i = 0; i < attacked.size(); ++i) {
        const auto& quad = ds.entries[i].quad;
        double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
        for (const Point& pt : quad.pts) {
            min_x = std::min(min_x, pt.x); max_x = std::max(max_x, pt.x);
            min_y = std::min(min_y, pt.y); max_y = std::max(max_y, pt.y);
        }
        bool changed = false;
        for (int y = 0; y < attacked[i].image.height(); ++y)
            for (int x = 0; x < attacked[i].image.width(); ++x)
                for (int c = 0; c < kChannels; ++c) {
                    const bool same =
                        attacked[i].image.at(y, x, c) == ds.entries[i].image.at(y, x, c);
                    if (!same) {
                        changed = true;
                        CHECK(x >= min_x - 1);
                        CHECK(x <= max_x + 1);
                        CHECK(y >= min_y - 1);
                        CHECK(y <= max_y + 1);
                    }
                }
        CHECK(changed);
    }
}

TEST_CASE("attack evaluation input validation") {
    ToyDatasetConfig cfg;
    cfg.identity_count = 3;
    cfg.images_per_identity_per_camera = 3;
    cfg.image_height = 32;
    cfg.image_width = 16;
    const Dataset ds = generate_toy_dataset(cfg);
    TrainConfig tc;
    tc.epochs = 1;
    const ReIDModel m = train_model(ds, ModelVariant::classification_embedding, tc, 8);

    const auto adv = toy_entries_of(ds, 1);
    const auto distr = toy_entries_except(ds, 1, -1);
    EvalConfig ec;
    ec.num_queries = 5;

    CHECK_THROWS_AS(run_attack_evaluation(m, {}, {}, distr, {}, ec), ConfigError);
    auto short_attacked = adv;
    short_attacked.pop_back();
    CHECK_THROWS_AS(run_attack_evaluation(m, adv, short_attacked, distr, {}, ec), ConfigError);
    auto one_cam = adv;
    for (auto& e : one_cam) e.camera = 1;
    CHECK_THROWS_AS(run_attack_evaluation(m, one_cam, one_cam, distr, {}, ec), ConfigError);
    CHECK_THROWS_AS(run_attack_evaluation(m, adv, adv, {}, {}, ec), ConfigError);
}

TEST_CASE("attack evaluation produces consistent rows and is seed-deterministic") {
    ToyDatasetConfig cfg;
    cfg.identity_count = 4;
    cfg.images_per_identity_per_camera = 4;
    cfg.image_height = 32;
    cfg.image_width = 16;
    const Dataset ds = generate_toy_dataset(cfg);
    TrainConfig tc;
    tc.epochs = 2;
    const ReIDModel m = train_model(ds, ModelVariant::classification_embedding, tc, 16);

    const auto adv = toy_entries_of(ds, 1);
    const auto target = toy_entries_of(ds, 2);
    const auto distr = toy_entries_except(ds, 1, 2);
    Pattern p(8, 8);
    for (double& v : p.data()) v = 0.8;
    Mask mask(8, 8, 1);
    const auto attacked = apply_pattern_to_entries(adv, p, mask);

    EvalConfig ec;
    ec.num_queries = 20;
    const MetricsTable t = run_attack_evaluation(m, adv, attacked, distr, target, ec);
    REQUIRE(t.rows.size() == 3u);
    const MetricsRow* clean = t.find("clean_self");
    const MetricsRow* self = t.find("attacked_self");
    const MetricsRow* tgt = t.find("attacked_target");
    REQUIRE(clean);
    REQUIRE(self);
    REQUIRE(tgt);
    CHECK_FALSE(clean->has_delta);
    CHECK(self->has_delta);
    CHECK(self->d_rank1 == Catch::Approx(clean->rank1 - self->rank1).margin(1e-12));
    CHECK(tgt->d_map == Catch::Approx(clean->map - tgt->map).margin(1e-12));
    for (const auto& row : t.rows) {
        for (double v : {row.rank1, row.rank5, row.rank10, row.map, row.ss}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(row.rank1 <= row.rank5);
        CHECK(row.rank5 <= row.rank10);
    }

    const MetricsTable t2 = run_attack_evaluation(m, adv, attacked, distr, target, ec);
    CHECK(t.to_csv() == t2.to_csv());

    // without targets the target row is omitted
    const MetricsTable t3 = run_attack_evaluation(m, adv, attacked, distr, {}, ec);
    CHECK(t3.rows.size() == 2u);
    CHECK(t3.find("attacked_target") == nullptr);
}

TEST_CASE("metrics table renders text and csv") {
    MetricsTable t;
    MetricsRow a;
    a.condition = "clean_self";
    a.rank1 = 0.5;
    MetricsRow b;
    b.condition = "attacked_self";
    b.has_delta = true;
    b.d_rank1 = 0.25;
    t.rows = {a, b};
    const std::string txt = t.to_text();
    CHECK(txt.find("clean_self") != std::string::npos);
    CHECK(txt.find("0.500") != std::string::npos);
    const std::string csv = t.to_csv();
    CHECK(csv.find("condition,rank1,") == 0u);
    CHECK(csv.find("attacked_self") != std::string::npos);
    CHECK(csv.find("0.250") != std::string::npos);
}
