#pragma once

// Desk-scale differentiable re-ID models: a classification-embedding variant
// and a siamese variant trained with verification plus identification losses.
// Both expose unit-norm embeddings, a similarity score in [0,1] mapped as
// (1 + cos)/2, and gradients of the score with respect to input pixels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "advpat/errors.hpp"
#include "advpat/image.hpp"
#include "advpat/nn.hpp"
#include "advpat/physicsim.hpp"
#include "advpat/rng.hpp"

namespace advpat {

enum class ModelVariant { siamese_verification, classification_embedding };

inline std::string variant_name(ModelVariant v) {
    return v == ModelVariant::siamese_verification ? "siamese_verification"
                                                   : "classification_embedding";
}

inline ModelVariant variant_from_name(const std::string& s) {
    if (s == "siamese_verification" || s == "A" || s == "a") return ModelVariant::siamese_verification;
    if (s == "classification_embedding" || s == "B" || s == "b")
        return ModelVariant::classification_embedding;
    throw ConfigError("unknown model variant: " + s);
}

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double verification_weight = 1.0;  // variant A only
    std::uint64_t seed = 7;

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || learning_rate <= 0.0)
            throw ConfigError("TrainConfig: epochs, batch size and learning rate must be positive");
    }
};

// Conv encoder: 3 conv blocks (conv3x3 + relu + avgpool2), global average
// pool, linear projection, L2 normalization. Input dims must be divisible
// by 8.
class EmbeddingNet {
  public:
    static constexpr int kBlocks = 3;

    EmbeddingNet() = default;
    EmbeddingNet(int in_h, int in_w, int embedding_dim, Rng& rng)
        : in_h_(in_h), in_w_(in_w), embedding_dim_(embedding_dim) {
        if (in_h % 8 != 0 || in_w % 8 != 0)
            throw ConfigError("EmbeddingNet: input dims must be divisible by 8");
        const int chans[kBlocks + 1] = {3, 16, 32, 64};
        for (int i = 0; i < kBlocks; ++i) convs_[i].init(chans[i], chans[i + 1], rng);
        fc_.init(chans[kBlocks], embedding_dim, rng);
    }

    int input_height() const { return in_h_; }
    int input_width() const { return in_w_; }
    int embedding_dim() const { return embedding_dim_; }

    struct Workspace {
        nn::Tensor3 input;
        nn::Tensor3 pre[kBlocks];     // conv output, pre-relu
        nn::Tensor3 act[kBlocks];     // post-relu (pre-pool)
        nn::Tensor3 pooled[kBlocks];  // post-pool
        std::vector<double> gap;
        std::vector<double> z;  // pre-norm embedding
        std::vector<double> e;  // unit-norm embedding
        double norm = 0.0;
    };

    struct Grads {
        std::vector<double> conv_w[kBlocks], conv_b[kBlocks];
        std::vector<double> fc_w, fc_b;
    };

    Grads zero_grads() const {
        Grads g;
        for (int i = 0; i < kBlocks; ++i) {
            g.conv_w[i].assign(convs_[i].w.size(), 0.0);
            g.conv_b[i].assign(convs_[i].b.size(), 0.0);
        }
        g.fc_w.assign(fc_.w.size(), 0.0);
        g.fc_b.assign(fc_.b.size(), 0.0);
        return g;
    }

    void forward(const Image& x, Workspace& ws) const {
        if (x.height() != in_h_ || x.width() != in_w_)
            throw std::invalid_argument("EmbeddingNet: input size mismatch");
        ws.input = nn::Tensor3(3, in_h_, in_w_);
        for (int y = 0; y < in_h_; ++y)
            for (int xx = 0; xx < in_w_; ++xx)
                for (int c = 0; c < kChannels; ++c) ws.input.at(c, y, xx) = x.at(y, xx, c);
        const nn::Tensor3* cur = &ws.input;
        for (int i = 0; i < kBlocks; ++i) {
            ws.pre[i] = convs_[i].forward(*cur);
            ws.act[i] = nn::relu(ws.pre[i]);
            ws.pooled[i] = nn::avgpool2(ws.act[i]);
            cur = &ws.pooled[i];
        }
        ws.gap = nn::global_avg_pool(ws.pooled[kBlocks - 1]);
        ws.z = fc_.forward(ws.gap);
        ws.e = nn::l2_normalize(ws.z, &ws.norm);
    }

    // Backprop of a gradient on the unit-norm embedding. Returns the input
    // gradient in image layout (h*w*3); accumulates parameter gradients when
    // grads is non-null.
    std::vector<double> backward(const Workspace& ws, const std::vector<double>& grad_e,
                                 Grads* grads) const {
        std::vector<double> gz = nn::l2_normalize_backward(ws.e, ws.norm, grad_e);
        return backward_from_z(ws, gz, grads);
    }

    // Same but starting from a gradient on the pre-norm embedding z.
    std::vector<double> backward_from_z(const Workspace& ws, const std::vector<double>& grad_z,
                                        Grads* grads) const {
        std::vector<double> g_gap =
            fc_.backward(ws.gap, grad_z, grads ? &grads->fc_w : nullptr, grads ? &grads->fc_b : nullptr);
        nn::Tensor3 g = nn::global_avg_pool_backward(ws.pooled[kBlocks - 1].h,
                                                     ws.pooled[kBlocks - 1].w, g_gap);
        for (int i = kBlocks - 1; i >= 0; --i) {
            g = nn::avgpool2_backward(ws.act[i].h, ws.act[i].w, g);
            g = nn::relu_backward(ws.pre[i], g);
            const nn::Tensor3& in = (i == 0) ? ws.input : ws.pooled[i - 1];
            g = convs_[i].backward(in, g, grads ? &grads->conv_w[i] : nullptr,
                                   grads ? &grads->conv_b[i] : nullptr);
        }
        std::vector<double> gin(static_cast<size_t>(in_h_) * in_w_ * kChannels);
        for (int y = 0; y < in_h_; ++y)
            for (int xx = 0; xx < in_w_; ++xx)
                for (int c = 0; c < kChannels; ++c)
                    gin[(static_cast<size_t>(y) * in_w_ + xx) * kChannels + c] = g.at(c, y, xx);
        return gin;
    }

    nn::ConvLayer convs_[kBlocks];
    nn::LinearLayer fc_;

  private:
    int in_h_ = 0, in_w_ = 0;
    int embedding_dim_ = 0;
};

struct ReIDModel {
    ModelVariant variant = ModelVariant::classification_embedding;
    EmbeddingNet net;
    // training-time heads, kept so checkpoints round-trip
    nn::LinearLayer classifier;       // on the pre-norm embedding
    std::vector<double> verifier_w;   // variant A: logit = w . (e_a - e_b)^2 + b
    double verifier_b = 0.0;
    int num_classes = 0;
    std::string preprocessing = "bilinear-resize";
    std::uint64_t train_seed = 0;
    double holdout_rank1 = -1.0;  // recorded after training

    int embedding_dim() const { return net.embedding_dim(); }
    int input_height() const { return net.input_height(); }
    int input_width() const { return net.input_width(); }
};

// Caller-visible preprocessing: bilinear resize to the model input size.
inline Image resize_bilinear(const Image& x, int out_h, int out_w) {
    if (x.height() == out_h && x.width() == out_w) return x;
    Image out(out_h, out_w);
    const double sy = static_cast<double>(x.height() - 1) / std::max(1, out_h - 1);
    const double sx = static_cast<double>(x.width() - 1) / std::max(1, out_w - 1);
    for (int y = 0; y < out_h; ++y)
        for (int xx = 0; xx < out_w; ++xx) {
            const auto tap = detail::bilinear_tap(xx * sx, y * sy, x.height(), x.width());
            for (int c = 0; c < kChannels; ++c)
                out.at(y, xx, c) = detail::bilinear_sample(tap, x.height(), x.width(),
                    [&](int py, int px) { return x.at(py, px, c); });
        }
    return out;
}

inline Image preprocess(const ReIDModel& m, const Image& x) {
    return resize_bilinear(x, m.input_height(), m.input_width());
}

inline std::vector<double> embed(const ReIDModel& m, const Image& x) {
    EmbeddingNet::Workspace ws;
    m.net.forward(preprocess(m, x), ws);
    return ws.e;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
    return d;
}

inline double similarity_from_embeddings(const std::vector<double>& a, const std::vector<double>& b) {
    const double s = 0.5 * (1.0 + cosine(a, b));
    if (s < -1e-9 || s > 1.0 + 1e-9) throw NumericalError("similarity out of [0,1]");
    return std::clamp(s, 0.0, 1.0);
}

inline double similarity(const ReIDModel& m, const Image& a, const Image& b) {
    return similarity_from_embeddings(embed(m, a), embed(m, b));
}

enum class WrtInput { a, b };

struct SimilarityGradient {
    double score = 0.0;
    std::vector<double> grad;  // image layout (h*w*3) at model input size
};

// d/dx of (1 + e_a . e_b) / 2 with respect to one input's pixels. The input
// must already be at the model input size; resizing is not part of the
// differentiated chain.
inline SimilarityGradient similarity_gradient(const ReIDModel& m, const Image& a, const Image& b,
                                              WrtInput wrt) {
    if (a.height() != m.input_height() || a.width() != m.input_width() ||
        b.height() != m.input_height() || b.width() != m.input_width())
        throw std::invalid_argument("similarity_gradient: inputs must match model input size");
    EmbeddingNet::Workspace wa, wb;
    m.net.forward(a, wa);
    m.net.forward(b, wb);
    SimilarityGradient out;
    out.score = similarity_from_embeddings(wa.e, wb.e);
    const auto& other = (wrt == WrtInput::a) ? wb.e : wa.e;
    std::vector<double> ge(other.size());
    for (size_t i = 0; i < ge.size(); ++i) ge[i] = 0.5 * other[i];
    out.grad = m.net.backward(wrt == WrtInput::a ? wa : wb, ge, nullptr);
    return out;
}

// Gradients on both embeddings for a pair term c * f(a, b); used by the
// attack objectives to batch several pair terms through one backward pass
// per image.
inline void accumulate_pair_embedding_grads(const EmbeddingNet::Workspace& wa,
                                            const EmbeddingNet::Workspace& wb, double coeff,
                                            std::vector<double>& ge_a, std::vector<double>& ge_b) {
    for (size_t i = 0; i < wa.e.size(); ++i) {
        ge_a[i] += coeff * 0.5 * wb.e[i];
        ge_b[i] += coeff * 0.5 * wa.e[i];
    }
}

// ----- training ------------------------------------------------------------

namespace detail_train {

struct FlatParams {
    std::vector<double*> ptrs;

    void add(std::vector<double>& v) {
        for (double& x : v) ptrs.push_back(&x);
    }
    void add(double& x) { ptrs.push_back(&x); }
};

inline void flatten_grads(const EmbeddingNet::Grads& g, const std::vector<double>& cls_w,
                          const std::vector<double>& cls_b, const std::vector<double>& ver_w,
                          double ver_b, bool with_verifier, std::vector<double>& out) {
    out.clear();
    for (int i = 0; i < EmbeddingNet::kBlocks; ++i) {
        out.insert(out.end(), g.conv_w[i].begin(), g.conv_w[i].end());
        out.insert(out.end(), g.conv_b[i].begin(), g.conv_b[i].end());
    }
    out.insert(out.end(), g.fc_w.begin(), g.fc_w.end());
    out.insert(out.end(), g.fc_b.begin(), g.fc_b.end());
    out.insert(out.end(), cls_w.begin(), cls_w.end());
    out.insert(out.end(), cls_b.begin(), cls_b.end());
    if (with_verifier) {
        out.insert(out.end(), ver_w.begin(), ver_w.end());
        out.push_back(ver_b);
    }
}

inline double holdout_cross_camera_rank1(const ReIDModel& m, const Dataset& test) {
    std::vector<std::vector<double>> embs(test.entries.size());
    for (size_t i = 0; i < test.entries.size(); ++i) embs[i] = embed(m, test.entries[i].image);
    int hits = 0, total = 0;
    for (size_t q = 0; q < test.entries.size(); ++q) {
        int best = -1;
        double best_s = -1.0;
        bool has_relevant = false;
        for (size_t g = 0; g < test.entries.size(); ++g) {
            if (test.entries[g].camera == test.entries[q].camera) continue;
            if (test.entries[g].identity == test.entries[q].identity) has_relevant = true;
            const double s = similarity_from_embeddings(embs[q], embs[g]);
            if (s > best_s) {
                best_s = s;
                best = static_cast<int>(g);
            }
        }
        if (!has_relevant || best < 0) continue;
        ++total;
        if (test.entries[best].identity == test.entries[q].identity) ++hits;
    }
    return total > 0 ? static_cast<double>(hits) / total : 0.0;
}

}  // namespace detail_train

// Trains a model of the requested variant. A fifth of each (identity,
// camera) group is held out and the final cross-camera rank-1 on it is
// recorded on the model. Reproducible given tc.seed.
inline ReIDModel train_model(const Dataset& dataset, ModelVariant variant, const TrainConfig& tc,
                             int embedding_dim = 64) {
    tc.validate();
    if (dataset.identity_count() < 2 || dataset.camera_count() < 2)
        throw ConfigError("train_model: dataset needs >= 2 identities and >= 2 cameras");
    if (dataset.entries.empty()) throw ConfigError("train_model: empty dataset");

    auto [train, test] = split_dataset(dataset, 5);
    if (train.entries.empty()) throw ConfigError("train_model: dataset too small to split");

    // dense identity labels
    std::map<int, int> label_of;
    for (const auto& e : train.entries)
        label_of.emplace(e.identity, static_cast<int>(label_of.size()));
    const int num_classes = static_cast<int>(label_of.size());

    const int in_h = train.entries.front().image.height();
    const int in_w = train.entries.front().image.width();

    Rng rng = make_rng(tc.seed, "train-model");
    ReIDModel model;
    model.variant = variant;
    model.train_seed = tc.seed;
    model.num_classes = num_classes;
    model.net = EmbeddingNet(in_h, in_w, embedding_dim, rng);
    model.classifier.init(embedding_dim, num_classes, rng);
    if (variant == ModelVariant::siamese_verification) {
        model.verifier_w.assign(embedding_dim, -1.0);  // small distance => same
        model.verifier_b = 0.5;
    }

    detail_train::FlatParams params;
    for (int i = 0; i < EmbeddingNet::kBlocks; ++i) {
        params.add(model.net.convs_[i].w);
        params.add(model.net.convs_[i].b);
    }
    params.add(model.net.fc_.w);
    params.add(model.net.fc_.b);
    params.add(model.classifier.w);
    params.add(model.classifier.b);
    const bool with_ver = variant == ModelVariant::siamese_verification;
    if (with_ver) {
        params.add(model.verifier_w);
        params.add(model.verifier_b);
    }

    nn::Adam opt;
    opt.lr = tc.learning_rate;
    opt.init(params.ptrs.size());

    std::vector<size_t> order(train.entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    // one sample = one image (variant B) or one pair (variant A)
    auto sample_loss_and_grads = [&](size_t idx, EmbeddingNet::Grads& g,
                                     std::vector<double>& g_cls_w, std::vector<double>& g_cls_b,
                                     std::vector<double>& g_ver_w, double& g_ver_b) -> double {
        const auto& entry = train.entries[idx];
        EmbeddingNet::Workspace ws;
        model.net.forward(entry.image, ws);
        const auto logits = model.classifier.forward(ws.z);
        auto probs = nn::softmax(logits);
        const int label = label_of.at(entry.identity);
        double loss = -std::log(std::max(probs[label], 1e-12));
        std::vector<double> dlogits = probs;
        dlogits[label] -= 1.0;
        std::vector<double> gz = model.classifier.backward(ws.z, dlogits, &g_cls_w, &g_cls_b);

        if (variant == ModelVariant::siamese_verification) {
            // pair partner: same identity with probability 1/2
            const bool want_same = uniform_int(rng, 0, 1) == 1;
            std::vector<size_t> pool;
            for (size_t j = 0; j < train.entries.size(); ++j) {
                if (j == idx) continue;
                const bool same = train.entries[j].identity == entry.identity;
                if (same == want_same) pool.push_back(j);
            }
            if (!pool.empty()) {
                const size_t jdx = pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
                EmbeddingNet::Workspace wsb;
                model.net.forward(train.entries[jdx].image, wsb);
                const auto logits_b = model.classifier.forward(wsb.z);
                auto probs_b = nn::softmax(logits_b);
                const int label_b = label_of.at(train.entries[jdx].identity);
                loss += -std::log(std::max(probs_b[label_b], 1e-12));
                std::vector<double> dlogits_b = probs_b;
                dlogits_b[label_b] -= 1.0;
                std::vector<double> gz_b =
                    model.classifier.backward(wsb.z, dlogits_b, &g_cls_w, &g_cls_b);

                // verification: logit = w . (e_a - e_b)^2 + b, label 1 = same
                std::vector<double> d2(ws.e.size());
                double vlogit = model.verifier_b;
                for (size_t k = 0; k < ws.e.size(); ++k) {
                    const double d = ws.e[k] - wsb.e[k];
                    d2[k] = d * d;
                    vlogit += model.verifier_w[k] * d2[k];
                }
                const double p_same = 1.0 / (1.0 + std::exp(-vlogit));
                const double y = want_same ? 1.0 : 0.0;
                loss += tc.verification_weight *
                        -(y * std::log(std::max(p_same, 1e-12)) +
                          (1.0 - y) * std::log(std::max(1.0 - p_same, 1e-12)));
                const double dlogit = tc.verification_weight * (p_same - y);
                g_ver_b += dlogit;
                std::vector<double> ge_a(ws.e.size(), 0.0), ge_b(ws.e.size(), 0.0);
                for (size_t k = 0; k < ws.e.size(); ++k) {
                    g_ver_w[k] += dlogit * d2[k];
                    const double d = ws.e[k] - wsb.e[k];
                    ge_a[k] = dlogit * model.verifier_w[k] * 2.0 * d;
                    ge_b[k] = -ge_a[k];
                }
                // combine z-path (classification) and e-path (verification)
                std::vector<double> gz_ver_b = nn::l2_normalize_backward(wsb.e, wsb.norm, ge_b);
                for (size_t k = 0; k < gz_b.size(); ++k) gz_b[k] += gz_ver_b[k];
                model.net.backward_from_z(wsb, gz_b, &g);
                std::vector<double> gz_ver_a = nn::l2_normalize_backward(ws.e, ws.norm, ge_a);
                for (size_t k = 0; k < gz.size(); ++k) gz[k] += gz_ver_a[k];
            }
        }
        model.net.backward_from_z(ws, gz, &g);
        return loss;
    };

    std::vector<double> flat;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size(); start += tc.batch_size) {
            const size_t end = std::min(order.size(), start + tc.batch_size);
            EmbeddingNet::Grads g = model.net.zero_grads();
            std::vector<double> g_cls_w(model.classifier.w.size(), 0.0);
            std::vector<double> g_cls_b(model.classifier.b.size(), 0.0);
            std::vector<double> g_ver_w(model.verifier_w.size(), 0.0);
            double g_ver_b = 0.0;
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k)
                batch_loss += sample_loss_and_grads(order[k], g, g_cls_w, g_cls_b, g_ver_w, g_ver_b);
            if (!std::isfinite(batch_loss))
                throw TrainingError("train_model: non-finite loss at epoch " + std::to_string(epoch));
            const double inv = 1.0 / static_cast<double>(end - start);
            detail_train::flatten_grads(g, g_cls_w, g_cls_b, g_ver_w, g_ver_b, with_ver, flat);
            for (double& v : flat) v *= inv;
            opt.step(params.ptrs, flat);
        }
    }

    model.holdout_rank1 = detail_train::holdout_cross_camera_rank1(model, test);
    return model;
}

}  // namespace advpat
