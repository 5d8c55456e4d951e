#pragma once

// Adversarial pattern generation: generating-set construction, triplet /
// quadruplet sampling, the pairwise and robust attack objectives, and the
// Adam optimization loop that produces the pattern.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "advpat/errors.hpp"
#include "advpat/geometry.hpp"
#include "advpat/image.hpp"
#include "advpat/physicsim.hpp"
#include "advpat/reid.hpp"
#include "advpat/rng.hpp"

namespace advpat {

struct GenEntry {
    Image image;
    int camera = 0;
    int position_tag = 0;  // groups multi-position shots of the same camera
    AnchorQuad quad;
    bool synthesized = false;  // augmentation provenance
};

struct GeneratingSet {
    std::vector<GenEntry> entries;
    int identity = 0;  // all entries belong to the adversary

    int camera_count() const {
        int m = 0;
        for (const auto& e : entries) m = std::max(m, e.camera);
        return m;
    }

    void validate() const {
        if (entries.empty()) throw ConfigError("GeneratingSet: empty");
        int first_cam = entries.front().camera;
        bool multi = false;
        for (const auto& e : entries) {
            e.quad.validate(e.image.height(), e.image.width());
            if (e.camera != first_cam) multi = true;
        }
        if (!multi) throw ConfigError("GeneratingSet: needs >= 2 distinct cameras");
    }
};

// Originals plus synthesized translation/scaling variants, provenance kept.
inline GeneratingSet build_generating_set(const std::vector<GenEntry>& raw, int augments_per_image,
                                          const AugmentConfig& aug, Rng& rng, int identity = 0) {
    GeneratingSet gs;
    gs.identity = identity;
    gs.entries = raw;
    for (auto& e : gs.entries) e.synthesized = false;
    {
        GeneratingSet probe;
        probe.entries = gs.entries;
        probe.validate();  // single-camera input: cross-camera objectives undefined
    }
    for (const auto& e : raw) {
        for (int k = 0; k < augments_per_image; ++k) {
            auto [img, quad] = synth_augment(e.image, e.quad, aug, rng);
            gs.entries.push_back({std::move(img), e.camera, e.position_tag, quad, true});
        }
    }
    return gs;
}

struct Triplet {
    const GenEntry* anchor = nullptr;    // x_o
    const GenEntry* positive = nullptr;  // same camera as anchor
    const GenEntry* negative = nullptr;  // different camera
};

struct Quadruplet {
    Triplet tri;
    const Image* target = nullptr;  // t_k from the target image set
};

// Uniform over valid anchors, then uniform positive / negative.
inline Triplet sample_triplet(const GeneratingSet& gs, Rng& rng) {
    std::vector<size_t> anchors;
    for (size_t i = 0; i < gs.entries.size(); ++i) {
        bool has_pos = false, has_neg = false;
        for (size_t j = 0; j < gs.entries.size(); ++j) {
            if (j == i) continue;
            if (gs.entries[j].camera == gs.entries[i].camera) has_pos = true;
            else has_neg = true;
        }
        if (has_pos && has_neg) anchors.push_back(i);
    }
    if (anchors.empty()) throw SamplingError("sample_triplet: no valid triplet exists");
    const size_t a = anchors[uniform_int(rng, 0, static_cast<int>(anchors.size()) - 1)];
    std::vector<size_t> pos, neg;
    for (size_t j = 0; j < gs.entries.size(); ++j) {
        if (j == a) continue;
        if (gs.entries[j].camera == gs.entries[a].camera) pos.push_back(j);
        else neg.push_back(j);
    }
    Triplet t;
    t.anchor = &gs.entries[a];
    t.positive = &gs.entries[pos[uniform_int(rng, 0, static_cast<int>(pos.size()) - 1)]];
    t.negative = &gs.entries[neg[uniform_int(rng, 0, static_cast<int>(neg.size()) - 1)]];
    return t;
}

inline Quadruplet sample_quadruplet(const GeneratingSet& gs, const std::vector<Image>& targets,
                                    Rng& rng) {
    if (targets.empty()) throw ConfigError("sample_quadruplet: empty target set");
    Quadruplet q;
    q.tri = sample_triplet(gs, rng);
    q.target = &targets[uniform_int(rng, 0, static_cast<int>(targets.size()) - 1)];
    return q;
}

enum class AttackMode { evade, impersonate };
enum class ObjectiveStage { pairwise, triplet, robust };

inline std::string attack_mode_name(AttackMode m) { return m == AttackMode::evade ? "evade" : "impersonate"; }
inline AttackMode attack_mode_from_name(const std::string& s) {
    if (s == "evade") return AttackMode::evade;
    if (s == "impersonate") return AttackMode::impersonate;
    throw ConfigError("unknown attack mode: " + s);
}
inline std::string stage_name(ObjectiveStage s) {
    switch (s) {
        case ObjectiveStage::pairwise: return "pairwise";
        case ObjectiveStage::triplet: return "triplet";
        default: return "robust";
    }
}
inline ObjectiveStage stage_from_name(const std::string& s) {
    if (s == "pairwise") return ObjectiveStage::pairwise;
    if (s == "triplet") return ObjectiveStage::triplet;
    if (s == "robust") return ObjectiveStage::robust;
    throw ConfigError("unknown objective stage: " + s);
}

struct AttackConfig {
    AttackMode mode = AttackMode::evade;
    ObjectiveStage stage = ObjectiveStage::robust;
    double alpha = 1.0;     // pairwise impersonation target pull
    double beta = 0.5;      // triplet same-camera cohesion
    double lambda1 = 0.25;  // quadruplet same-camera cohesion
    double lambda2 = 0.5;   // quadruplet cross-camera push
    double kappa = 2e-4;    // TV weight
    int rank_threshold = 10;  // K
    ColorInterval interval;
    int pattern_height = 24, pattern_width = 24;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9, adam_beta2 = 0.999;
    int max_iterations = 700;
    std::uint64_t seed = 1;
    DegradeParams degrade;
    int augments_per_image = 6;

    void validate(bool has_targets) const {
        if (learning_rate <= 0.0) throw ConfigError("AttackConfig: learning_rate must be > 0");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw ConfigError("AttackConfig: adam betas must lie in (0,1)");
        if (max_iterations < 0) throw ConfigError("AttackConfig: max_iterations must be >= 0");
        if (alpha < 0 || beta < 0 || lambda1 < 0 || lambda2 < 0 || kappa < 0)
            throw ConfigError("AttackConfig: objective weights must be non-negative");
        if (rank_threshold <= 0) throw ConfigError("AttackConfig: K must be positive");
        if (pattern_height <= 0 || pattern_width <= 0)
            throw ConfigError("AttackConfig: pattern size must be positive");
        interval.validate();
        degrade.validate();
        if (mode == AttackMode::impersonate && !has_targets)
            throw ConfigError("AttackConfig: impersonate mode requires a nonempty target set");
    }
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;  // w.r.t. pattern pixels
};

namespace detail_attack {

struct AdvForward {
    WarpedPattern wp;
    Homography h;
    EmbeddingNet::Workspace ws;
};

// x' = overlay(x, T(M*delta)) plus a model forward pass on it.
inline AdvForward adversarial_forward(const ReIDModel& model, const Image& x, const AnchorQuad& quad,
                                      const Pattern& delta, const Mask& mask) {
    if (x.height() != model.input_height() || x.width() != model.input_width())
        throw std::invalid_argument("attack objectives: image size must match model input");
    AdvForward f;
    f.h = pattern_to_quad(delta, quad);
    f.wp = warp_pattern(delta, mask, f.h, x.height(), x.width());
    model.net.forward(overlay(x, f.wp), f.ws);
    return f;
}

// Chain an accumulated embedding gradient back to pattern pixels.
inline void backprop_to_pattern(const ReIDModel& model, const AdvForward& f,
                                const std::vector<double>& ge, const Pattern& delta,
                                const Mask& mask, std::vector<double>& pattern_grad) {
    bool any = false;
    for (double v : ge)
        if (v != 0.0) { any = true; break; }
    if (!any) return;
    const std::vector<double> gimg = model.net.backward(f.ws, ge, nullptr);
    const std::vector<double> gp =
        warp_pattern_backprop(gimg, delta, mask, f.h, f.wp.h, f.wp.w);
    for (size_t i = 0; i < gp.size(); ++i) pattern_grad[i] += gp[i];
}

}  // namespace detail_attack

// Eq.-style cross-camera pairwise objective over the whole generating set:
// evade minimizes sum_{i != j, cross-camera} f(x_i', x_j'); impersonate
// additionally subtracts alpha * (f(x_i', I_t) + f(x_j', I_t)) per pair.
inline LossAndGrad pairwise_objective(const GeneratingSet& gs, const Pattern& delta,
                                      const Mask& mask, const ReIDModel& model, AttackMode mode,
                                      double alpha, const Image* target = nullptr) {
    gs.validate();
    if (mode == AttackMode::impersonate && target == nullptr)
        throw ConfigError("pairwise_objective: impersonate mode requires a target image");

    std::vector<detail_attack::AdvForward> fwd(gs.entries.size());
    for (size_t i = 0; i < gs.entries.size(); ++i)
        fwd[i] = detail_attack::adversarial_forward(model, gs.entries[i].image, gs.entries[i].quad,
                                                    delta, mask);
    std::vector<double> target_e;
    if (mode == AttackMode::impersonate) target_e = embed(model, *target);

    LossAndGrad out;
    out.grad.assign(delta.size(), 0.0);
    const int dim = model.embedding_dim();
    std::vector<std::vector<double>> ge(gs.entries.size(), std::vector<double>(dim, 0.0));

    for (size_t i = 0; i < gs.entries.size(); ++i) {
        for (size_t j = 0; j < gs.entries.size(); ++j) {
            if (i == j || gs.entries[i].camera == gs.entries[j].camera) continue;
            out.loss += similarity_from_embeddings(fwd[i].ws.e, fwd[j].ws.e);
            accumulate_pair_embedding_grads(fwd[i].ws, fwd[j].ws, 1.0, ge[i], ge[j]);
            if (mode == AttackMode::impersonate) {
                out.loss -= alpha * (similarity_from_embeddings(fwd[i].ws.e, target_e) +
                                     similarity_from_embeddings(fwd[j].ws.e, target_e));
                for (int k = 0; k < dim; ++k) {
                    ge[i][k] -= alpha * 0.5 * target_e[k];
                    ge[j][k] -= alpha * 0.5 * target_e[k];
                }
            }
        }
    }
    for (size_t i = 0; i < gs.entries.size(); ++i)
        detail_attack::backprop_to_pattern(model, fwd[i], ge[i], delta, mask, out.grad);
    return out;
}

// f(phi(x_o)', phi(x_-)') - beta * f(phi(x_o)', phi(x_+)') + kappa * TV(delta),
// with degradation parameters sampled fresh per call. Minimization objective.
inline LossAndGrad robust_evading_loss(const Triplet& t, const Pattern& delta, const Mask& mask,
                                       const ReIDModel& model, double beta, double kappa,
                                       const DegradeParams& dp, Rng& rng) {
    const DegradeSample so = sample_degradation(dp, rng);
    const DegradeSample sp = sample_degradation(dp, rng);
    const DegradeSample sn = sample_degradation(dp, rng);
    auto fo = detail_attack::adversarial_forward(model, degrade_with(t.anchor->image, so),
                                                 t.anchor->quad, delta, mask);
    auto fp = detail_attack::adversarial_forward(model, degrade_with(t.positive->image, sp),
                                                 t.positive->quad, delta, mask);
    auto fn = detail_attack::adversarial_forward(model, degrade_with(t.negative->image, sn),
                                                 t.negative->quad, delta, mask);

    LossAndGrad out;
    out.grad.assign(delta.size(), 0.0);
    out.loss = similarity_from_embeddings(fo.ws.e, fn.ws.e) -
               beta * similarity_from_embeddings(fo.ws.e, fp.ws.e);

    const int dim = model.embedding_dim();
    std::vector<double> ge_o(dim, 0.0), ge_p(dim, 0.0), ge_n(dim, 0.0);
    accumulate_pair_embedding_grads(fo.ws, fn.ws, 1.0, ge_o, ge_n);
    accumulate_pair_embedding_grads(fo.ws, fp.ws, -beta, ge_o, ge_p);
    detail_attack::backprop_to_pattern(model, fo, ge_o, delta, mask, out.grad);
    detail_attack::backprop_to_pattern(model, fp, ge_p, delta, mask, out.grad);
    detail_attack::backprop_to_pattern(model, fn, ge_n, delta, mask, out.grad);

    if (kappa != 0.0) {
        const TvResult tv = total_variation(delta);
        out.loss += kappa * tv.value;
        for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += kappa * tv.grad[i];
    }
    return out;
}

// Maximization objective
//   f(phi(x_o)', t_k) + l1 * f(phi(x_o)', phi(x_+)') - l2 * f(phi(x_o)', phi(x_-)')
//   - kappa * TV(delta)
// (TV enters as a smoothness penalty in both modes). Returns the objective
// and its gradient; the optimizer descends on the negation.
inline LossAndGrad robust_impersonation_loss(const Quadruplet& q, const Pattern& delta,
                                             const Mask& mask, const ReIDModel& model,
                                             double lambda1, double lambda2, double kappa,
                                             const DegradeParams& dp, Rng& rng) {
    const DegradeSample so = sample_degradation(dp, rng);
    const DegradeSample sp = sample_degradation(dp, rng);
    const DegradeSample sn = sample_degradation(dp, rng);
    auto fo = detail_attack::adversarial_forward(model, degrade_with(q.tri.anchor->image, so),
                                                 q.tri.anchor->quad, delta, mask);
    auto fp = detail_attack::adversarial_forward(model, degrade_with(q.tri.positive->image, sp),
                                                 q.tri.positive->quad, delta, mask);
    auto fn = detail_attack::adversarial_forward(model, degrade_with(q.tri.negative->image, sn),
                                                 q.tri.negative->quad, delta, mask);
    const std::vector<double> te = embed(model, *q.target);

    LossAndGrad out;
    out.grad.assign(delta.size(), 0.0);
    out.loss = similarity_from_embeddings(fo.ws.e, te) +
               lambda1 * similarity_from_embeddings(fo.ws.e, fp.ws.e) -
               lambda2 * similarity_from_embeddings(fo.ws.e, fn.ws.e);

    const int dim = model.embedding_dim();
    std::vector<double> ge_o(dim, 0.0), ge_p(dim, 0.0), ge_n(dim, 0.0);
    for (int k = 0; k < dim; ++k) ge_o[k] += 0.5 * te[k];
    accumulate_pair_embedding_grads(fo.ws, fp.ws, lambda1, ge_o, ge_p);
    accumulate_pair_embedding_grads(fo.ws, fn.ws, -lambda2, ge_o, ge_n);
    detail_attack::backprop_to_pattern(model, fo, ge_o, delta, mask, out.grad);
    detail_attack::backprop_to_pattern(model, fp, ge_p, delta, mask, out.grad);
    detail_attack::backprop_to_pattern(model, fn, ge_n, delta, mask, out.grad);

    if (kappa != 0.0) {
        const TvResult tv = total_variation(delta);
        out.loss -= kappa * tv.value;
        for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] -= kappa * tv.grad[i];
    }
    return out;
}

struct TracePoint {
    int iteration = 0;
    double loss = 0.0;       // value of the stage objective at this iteration
    double grad_norm = 0.0;  // L2 norm of the descent gradient
};

struct OptimizationResult {
    Pattern pattern;
    std::vector<TracePoint> trace;
};

// Adam loop: delta starts at the interval midpoint; each iteration samples a
// triplet / quadruplet (stage permitting), computes the stage loss and
// gradient, applies one update and projects back into the interval.
inline OptimizationResult optimize_pattern(
    const GeneratingSet& gs, const ReIDModel& model, const AttackConfig& cfg, const Mask& mask,
    const std::vector<Image>& targets = {},
    const std::function<void(int, const Pattern&)>& on_iteration = nullptr) {
    cfg.validate(!targets.empty());
    gs.validate();
    if (mask.height() != cfg.pattern_height || mask.width() != cfg.pattern_width)
        throw ConfigError("optimize_pattern: mask size must match configured pattern size");
    mask.validate();

    OptimizationResult res;
    res.pattern = Pattern(cfg.pattern_height, cfg.pattern_width, cfg.interval);
    Rng rng = make_rng(cfg.seed, "optimize-pattern");

    nn::Adam adam;
    adam.lr = cfg.learning_rate;
    adam.beta1 = cfg.adam_beta1;
    adam.beta2 = cfg.adam_beta2;
    adam.init(res.pattern.size());
    std::vector<double*> params(res.pattern.size());
    for (size_t i = 0; i < res.pattern.size(); ++i) params[i] = &res.pattern.data()[i];

    const DegradeParams stage_dp =
        cfg.stage == ObjectiveStage::robust ? cfg.degrade : DegradeParams::identity();
    const double stage_kappa = cfg.stage == ObjectiveStage::robust ? cfg.kappa : 0.0;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        LossAndGrad lg;
        if (cfg.stage == ObjectiveStage::pairwise) {
            const Image* target = targets.empty() ? nullptr : &targets.front();
            lg = pairwise_objective(gs, res.pattern, mask, model, cfg.mode, cfg.alpha, target);
        } else if (cfg.mode == AttackMode::evade) {
            const Triplet t = sample_triplet(gs, rng);
            lg = robust_evading_loss(t, res.pattern, mask, model, cfg.beta, stage_kappa, stage_dp,
                                     rng);
        } else {
            const Quadruplet q = sample_quadruplet(gs, targets, rng);
            lg = robust_impersonation_loss(q, res.pattern, mask, model, cfg.lambda1, cfg.lambda2,
                                           stage_kappa, stage_dp, rng);
            for (double& v : lg.grad) v = -v;  // descend on the negated objective
        }
        if (!std::isfinite(lg.loss))
            throw OptimizationError("optimize_pattern: non-finite loss at iteration " +
                                    std::to_string(it));
        double gn = 0.0;
        for (double v : lg.grad) {
            if (!std::isfinite(v))
                throw OptimizationError("optimize_pattern: non-finite gradient at iteration " +
                                        std::to_string(it));
            gn += v * v;
        }
        adam.step(params, lg.grad);
        // in-place interval projection (keeps the Adam parameter pointers valid)
        for (int y = 0; y < res.pattern.height(); ++y)
            for (int x = 0; x < res.pattern.width(); ++x)
                for (int c = 0; c < kChannels; ++c)
                    res.pattern.at(y, x, c) = std::clamp(res.pattern.at(y, x, c),
                                                         cfg.interval.lower[c], cfg.interval.upper[c]);
        res.trace.push_back({it, lg.loss, std::sqrt(gn)});
        if (on_iteration) on_iteration(it, res.pattern);
    }
    return res;
}

}  // namespace advpat
