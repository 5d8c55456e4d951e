#pragma once

// Probe/gallery retrieval protocol: rank-k accuracy, mAP, similarity-score
// statistics, and the attack evaluation recipe (cross-camera adversarial
// images mixed into a distractor gallery, repeated queries).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "advpat/attack.hpp"
#include "advpat/errors.hpp"
#include "advpat/physicsim.hpp"
#include "advpat/reid.hpp"
#include "advpat/rng.hpp"

namespace advpat {

struct GalleryItem {
    std::vector<double> embedding;
    int identity = 0;
    int camera = 0;
    bool adversarial = false;
};

struct Gallery {
    std::vector<GalleryItem> items;

    void validate() const {
        if (items.empty()) throw std::invalid_argument("Gallery: empty");
    }
};

struct ProbeDescriptor {
    int identity = 0;
    int camera = 0;
    bool adversarial = false;
};

struct QueryResult {
    ProbeDescriptor probe;
    std::vector<std::pair<int, double>> ranked;  // (gallery index, score), descending
    std::vector<bool> relevant;                  // aligned with ranked

    int gallery_size() const { return static_cast<int>(ranked.size()); }
    int relevant_count() const {
        int r = 0;
        for (bool b : relevant) r += b;
        return r;
    }
};

// Scores every gallery item against the probe embedding, sorts descending
// with ties broken by ascending gallery index. Relevance follows the
// cross-camera protocol: same identity, different camera.
inline QueryResult run_query_embedded(const std::vector<double>& probe_emb,
                                      const ProbeDescriptor& probe, const Gallery& gallery) {
    gallery.validate();
    QueryResult r;
    r.probe = probe;
    r.ranked.reserve(gallery.items.size());
    for (size_t i = 0; i < gallery.items.size(); ++i)
        r.ranked.emplace_back(static_cast<int>(i),
                              similarity_from_embeddings(probe_emb, gallery.items[i].embedding));
    std::sort(r.ranked.begin(), r.ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    r.relevant.reserve(r.ranked.size());
    for (const auto& [idx, score] : r.ranked) {
        const GalleryItem& g = gallery.items[idx];
        r.relevant.push_back(g.identity == probe.identity && g.camera != probe.camera);
    }
    return r;
}

inline QueryResult run_query(const ReIDModel& model, const Image& probe_img,
                             const ProbeDescriptor& probe, const Gallery& gallery) {
    return run_query_embedded(embed(model, probe_img), probe, gallery);
}

// Fraction of queries with at least one relevant item in the top k. A k
// larger than a query's gallery is clamped; clamp events are counted into
// *clamp_warnings when given.
inline double rank_k_accuracy(const std::vector<QueryResult>& results, int k,
                              int* clamp_warnings = nullptr) {
    if (k < 1) throw std::invalid_argument("rank_k_accuracy: k must be >= 1");
    if (results.empty()) throw std::invalid_argument("rank_k_accuracy: no results");
    int hits = 0;
    for (const auto& r : results) {
        int kk = k;
        if (kk > r.gallery_size()) {
            kk = r.gallery_size();
            if (clamp_warnings) ++*clamp_warnings;
        }
        for (int i = 0; i < kk; ++i)
            if (r.relevant[i]) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / results.size();
}

// Mean over queries of AP = (1/R) * sum over relevant hits of precision at
// that rank. Queries without any relevant gallery item are excluded and
// counted in *excluded when given; all-excluded is a protocol error.
inline double mean_average_precision(const std::vector<QueryResult>& results,
                                     int* excluded = nullptr) {
    if (results.empty()) throw std::invalid_argument("mean_average_precision: no results");
    double sum = 0.0;
    int counted = 0;
    for (const auto& r : results) {
        const int R = r.relevant_count();
        if (R == 0) {
            if (excluded) ++*excluded;
            continue;
        }
        double ap = 0.0;
        int hits = 0;
        for (size_t i = 0; i < r.relevant.size(); ++i) {
            if (r.relevant[i]) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(i + 1);
            }
        }
        sum += ap / R;
        ++counted;
    }
    if (counted == 0) throw ProtocolError("mean_average_precision: no query has a relevant item");
    return sum / counted;
}

// Mean probe-to-relevant similarity over all queries (the paper's ss column).
inline double mean_similarity(const std::vector<QueryResult>& results) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : results)
        for (size_t i = 0; i < r.relevant.size(); ++i)
            if (r.relevant[i]) {
                sum += r.ranked[i].second;
                ++n;
            }
    return n > 0 ? sum / n : 0.0;
}

struct MetricsRow {
    std::string condition;
    double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
    double map = 0.0;
    double ss = 0.0;
    bool has_delta = false;  // vs the clean self-match row
    double d_rank1 = 0.0, d_map = 0.0, d_ss = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    int map_excluded_queries = 0;
    int rank_clamp_warnings = 0;

    const MetricsRow* find(const std::string& condition) const {
        for (const auto& r : rows)
            if (r.condition == condition) return &r;
        return nullptr;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::left << std::setw(18) << "condition" << std::right << std::setw(8) << "rank-1"
           << std::setw(8) << "rank-5" << std::setw(9) << "rank-10" << std::setw(8) << "mAP"
           << std::setw(8) << "ss" << std::setw(9) << "d-rank1" << std::setw(8) << "d-mAP"
           << std::setw(8) << "d-ss" << "\n";
        os << std::fixed << std::setprecision(3);
        for (const auto& r : rows) {
            os << std::left << std::setw(18) << r.condition << std::right << std::setw(8) << r.rank1
               << std::setw(8) << r.rank5 << std::setw(9) << r.rank10 << std::setw(8) << r.map
               << std::setw(8) << r.ss;
            if (r.has_delta)
                os << std::setw(9) << r.d_rank1 << std::setw(8) << r.d_map << std::setw(8) << r.d_ss;
            os << "\n";
        }
        return os.str();
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "condition,rank1,rank5,rank10,mAP,ss,delta_rank1,delta_mAP,delta_ss\n";
        os << std::fixed << std::setprecision(3);
        for (const auto& r : rows) {
            os << r.condition << ',' << r.rank1 << ',' << r.rank5 << ',' << r.rank10 << ',' << r.map
               << ',' << r.ss << ',';
            if (r.has_delta) os << r.d_rank1 << ',' << r.d_map << ',' << r.d_ss;
            else os << ",,";
            os << "\n";
        }
        return os.str();
    }
};

struct EvalConfig {
    int num_queries = 100;
    int adversarial_cross_gallery_count = 12;  // adversary images from other cameras per query
    std::uint64_t seed = 3;
};

namespace detail_eval {

struct EmbeddedEntry {
    std::vector<double> embedding;
    int identity, camera;
};

inline std::vector<EmbeddedEntry> embed_all(const ReIDModel& m, const std::vector<DatasetEntry>& es) {
    std::vector<EmbeddedEntry> out;
    out.reserve(es.size());
    for (const auto& e : es) out.push_back({embed(m, e.image), e.identity, e.camera});
    return out;
}

}  // namespace detail_eval

// Applies the pattern to each adversary entry via its anchor quad.
inline std::vector<DatasetEntry> apply_pattern_to_entries(const std::vector<DatasetEntry>& entries,
                                                          const Pattern& pattern, const Mask& mask) {
    std::vector<DatasetEntry> out = entries;
    for (auto& e : out) {
        const Homography h = pattern_to_quad(pattern, e.quad);
        const WarpedPattern wp = warp_pattern(pattern, mask, h, e.image.height(), e.image.width());
        e.image = overlay(e.image, wp);
    }
    return out;
}

// The per-query gallery recipe. Self-match rows: a fixed number of the
// adversary's images from cameras other than the probe's (clean or attacked
// to match the row) plus all distractor images. Target-match rows: the
// target identity's images plus all distractor images (the adversary's own
// pattern-wearing images are left out there, since retrieving the probe's
// own pattern would not measure impersonation). Rows: clean self-match,
// attacked self-match, and in impersonate mode attacked target-match, with
// drop columns relative to the clean row.
inline MetricsTable run_attack_evaluation(const ReIDModel& model,
                                          const std::vector<DatasetEntry>& adversary_clean,
                                          const std::vector<DatasetEntry>& adversary_attacked,
                                          const std::vector<DatasetEntry>& distractors,
                                          const std::vector<DatasetEntry>& target_entries,
                                          const EvalConfig& cfg) {
    if (adversary_clean.empty()) throw ConfigError("run_attack_evaluation: no adversary images");
    if (adversary_attacked.size() != adversary_clean.size())
        throw ConfigError("run_attack_evaluation: clean/attacked entry counts differ");
    {
        int cams = 0;
        for (const auto& e : adversary_clean) cams = std::max(cams, e.camera);
        bool multi = false;
        for (const auto& e : adversary_clean)
            if (e.camera != adversary_clean.front().camera) multi = true;
        if (!multi) throw ConfigError("run_attack_evaluation: adversary images must span >= 2 cameras");
        (void)cams;
    }
    if (distractors.empty())
        throw ConfigError("run_attack_evaluation: insufficient distractor identities");

    const auto emb_clean = detail_eval::embed_all(model, adversary_clean);
    const auto emb_attacked = detail_eval::embed_all(model, adversary_attacked);
    const auto emb_distr = detail_eval::embed_all(model, distractors);
    const auto emb_target = detail_eval::embed_all(model, target_entries);
    const int adv_id = adversary_clean.front().identity;
    const int target_id = target_entries.empty() ? -1 : target_entries.front().identity;

    MetricsTable table;
    Rng rng = make_rng(cfg.seed, "attack-eval");

    enum class Condition { clean_self, attacked_self, attacked_target };
    auto run_condition = [&](Condition cond) {
        // one shared probe/gallery draw sequence per condition
        Rng crng(rng());
        std::vector<QueryResult> results;
        for (int q = 0; q < cfg.num_queries; ++q) {
            const bool attacked = cond != Condition::clean_self;
            const auto& adv = attacked ? emb_attacked : emb_clean;
            const int pi = uniform_int(crng, 0, static_cast<int>(adv.size()) - 1);
            const auto& probe = adv[pi];

            Gallery g;
            if (cond != Condition::attacked_target) {
                // self-match rows: the relevant items are the adversary's own
                // cross-camera images (clean or attacked to match the row)
                std::vector<int> cross;
                for (size_t i = 0; i < adv.size(); ++i)
                    if (static_cast<int>(i) != pi && adv[i].camera != probe.camera)
                        cross.push_back(static_cast<int>(i));
                std::shuffle(cross.begin(), cross.end(), crng);
                if (static_cast<int>(cross.size()) > cfg.adversarial_cross_gallery_count)
                    cross.resize(cfg.adversarial_cross_gallery_count);
                for (int i : cross)
                    g.items.push_back({adv[i].embedding, adv_id, adv[i].camera, attacked});
            }
            for (const auto& d : emb_distr)
                g.items.push_back({d.embedding, d.identity, d.camera, false});
            if (cond == Condition::attacked_target) {
                // same-camera target images are junk under the cross-camera
                // protocol (can never be relevant) and are left out, as in
                // standard Market1501 evaluation
                for (const auto& t : emb_target)
                    if (t.camera != probe.camera)
                        g.items.push_back({t.embedding, t.identity, t.camera, false});
            } else {
                // in the self-match rows the target identity is just another
                // gallery identity; an impersonating probe should retrieve
                // these instead of its own cross-camera images
                for (const auto& t : emb_target)
                    g.items.push_back({t.embedding, t.identity, t.camera, false});
            }

            ProbeDescriptor pd;
            // target-match rows score relevance against the target identity
            pd.identity = cond == Condition::attacked_target ? target_id : adv_id;
            pd.camera = probe.camera;
            pd.adversarial = attacked;
            results.push_back(run_query_embedded(probe.embedding, pd, g));
        }
        MetricsRow row;
        row.rank1 = rank_k_accuracy(results, 1, &table.rank_clamp_warnings);
        row.rank5 = rank_k_accuracy(results, 5, &table.rank_clamp_warnings);
        row.rank10 = rank_k_accuracy(results, 10, &table.rank_clamp_warnings);
        row.map = mean_average_precision(results, &table.map_excluded_queries);
        row.ss = mean_similarity(results);
        return row;
    };

    MetricsRow clean = run_condition(Condition::clean_self);
    clean.condition = "clean_self";
    table.rows.push_back(clean);

    MetricsRow self = run_condition(Condition::attacked_self);
    self.condition = "attacked_self";
    self.has_delta = true;
    self.d_rank1 = clean.rank1 - self.rank1;
    self.d_map = clean.map - self.map;
    self.d_ss = clean.ss - self.ss;
    table.rows.push_back(self);

    if (!target_entries.empty()) {
        MetricsRow tgt = run_condition(Condition::attacked_target);
        tgt.condition = "attacked_target";
        tgt.has_delta = true;
        tgt.d_rank1 = clean.rank1 - tgt.rank1;
        tgt.d_map = clean.map - tgt.map;
        tgt.d_ss = clean.ss - tgt.ss;
        table.rows.push_back(tgt);
    }
    return table;
}

}  // namespace advpat
