#pragma once

// Minimal dense/conv building blocks with hand-written backward passes.
// Everything is double precision and single-threaded deterministic; a
// Workspace holds the per-forward activations so a trained net stays
// immutable during concurrent inference.

#include <cmath>
#include <cstdint>
#include <vector>

#include "advpat/errors.hpp"
#include "advpat/rng.hpp"

namespace advpat::nn {

struct Tensor3 {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    size_t size() const { return v.size(); }
};

// 3x3 convolution, stride 1, zero padding 1.
struct ConvLayer {
    int in_c = 0, out_c = 0;
    std::vector<double> w;  // [out][in][3][3]
    std::vector<double> b;  // [out]

    void init(int in, int out, Rng& rng) {
        in_c = in;
        out_c = out;
        w.resize(static_cast<size_t>(out) * in * 9);
        b.assign(out, 0.0);
        const double scale = std::sqrt(2.0 / (in * 9));  // He init
        std::normal_distribution<double> nd(0.0, scale);
        for (double& x : w) x = nd(rng);
    }

    size_t param_count() const { return w.size() + b.size(); }

    Tensor3 forward(const Tensor3& x) const {
        Tensor3 y(out_c, x.h, x.w);
        for (int oc = 0; oc < out_c; ++oc) {
            for (int yy = 0; yy < x.h; ++yy) {
                for (int xx = 0; xx < x.w; ++xx) {
                    double s = b[oc];
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double* wk = &w[(static_cast<size_t>(oc) * in_c + ic) * 9];
                        for (int dy = -1; dy <= 1; ++dy) {
                            const int sy = yy + dy;
                            if (sy < 0 || sy >= x.h) continue;
                            const double* row = &x.v[(static_cast<size_t>(ic) * x.h + sy) * x.w];
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int sx = xx + dx;
                                if (sx < 0 || sx >= x.w) continue;
                                s += wk[(dy + 1) * 3 + (dx + 1)] * row[sx];
                            }
                        }
                    }
                    y.at(oc, yy, xx) = s;
                }
            }
        }
        return y;
    }

    // grad_out -> grad_in; accumulates parameter gradients when gw/gb given.
    Tensor3 backward(const Tensor3& x, const Tensor3& grad_out, std::vector<double>* gw,
                     std::vector<double>* gb) const {
        Tensor3 gin(in_c, x.h, x.w);
        for (int oc = 0; oc < out_c; ++oc) {
            for (int yy = 0; yy < x.h; ++yy) {
                for (int xx = 0; xx < x.w; ++xx) {
                    const double g = grad_out.at(oc, yy, xx);
                    if (g == 0.0) continue;
                    if (gb) (*gb)[oc] += g;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const size_t wbase = (static_cast<size_t>(oc) * in_c + ic) * 9;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const int sy = yy + dy;
                            if (sy < 0 || sy >= x.h) continue;
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int sx = xx + dx;
                                if (sx < 0 || sx >= x.w) continue;
                                const size_t wi = wbase + (dy + 1) * 3 + (dx + 1);
                                if (gw) (*gw)[wi] += g * x.at(ic, sy, sx);
                                gin.at(ic, sy, sx) += g * w[wi];
                            }
                        }
                    }
                }
            }
        }
        return gin;
    }
};

inline Tensor3 relu(const Tensor3& x) {
    Tensor3 y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

inline Tensor3 relu_backward(const Tensor3& pre, const Tensor3& grad_out) {
    Tensor3 g = grad_out;
    for (size_t i = 0; i < g.v.size(); ++i)
        if (pre.v[i] <= 0.0) g.v[i] = 0.0;
    return g;
}

// 2x2 average pooling, stride 2; input dims must be even.
inline Tensor3 avgpool2(const Tensor3& x) {
    Tensor3 y(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
            for (int xx = 0; xx < y.w; ++xx)
                y.at(c, yy, xx) = 0.25 * (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                                          x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1));
    return y;
}

inline Tensor3 avgpool2_backward(int in_h, int in_w, const Tensor3& grad_out) {
    Tensor3 g(grad_out.c, in_h, in_w);
    for (int c = 0; c < grad_out.c; ++c)
        for (int yy = 0; yy < grad_out.h; ++yy)
            for (int xx = 0; xx < grad_out.w; ++xx) {
                const double v = 0.25 * grad_out.at(c, yy, xx);
                g.at(c, 2 * yy, 2 * xx) = v;
                g.at(c, 2 * yy, 2 * xx + 1) = v;
                g.at(c, 2 * yy + 1, 2 * xx) = v;
                g.at(c, 2 * yy + 1, 2 * xx + 1) = v;
            }
    return g;
}

inline std::vector<double> global_avg_pool(const Tensor3& x) {
    std::vector<double> y(x.c, 0.0);
    const double inv = 1.0 / (x.h * x.w);
    for (int c = 0; c < x.c; ++c) {
        double s = 0.0;
        for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) s += x.at(c, yy, xx);
        y[c] = s * inv;
    }
    return y;
}

inline Tensor3 global_avg_pool_backward(int h, int w, const std::vector<double>& grad_out) {
    Tensor3 g(static_cast<int>(grad_out.size()), h, w);
    const double inv = 1.0 / (h * w);
    for (int c = 0; c < g.c; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) g.at(c, yy, xx) = grad_out[c] * inv;
    return g;
}

struct LinearLayer {
    int in_d = 0, out_d = 0;
    std::vector<double> w;  // [out][in]
    std::vector<double> b;  // [out]

    void init(int in, int out, Rng& rng) {
        in_d = in;
        out_d = out;
        w.resize(static_cast<size_t>(out) * in);
        b.assign(out, 0.0);
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / in));
        for (double& x : w) x = nd(rng);
    }

    size_t param_count() const { return w.size() + b.size(); }

    std::vector<double> forward(const std::vector<double>& x) const {
        std::vector<double> y(out_d);
        for (int o = 0; o < out_d; ++o) {
            double s = b[o];
            const double* row = &w[static_cast<size_t>(o) * in_d];
            for (int i = 0; i < in_d; ++i) s += row[i] * x[i];
            y[o] = s;
        }
        return y;
    }

    std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& grad_out,
                                 std::vector<double>* gw, std::vector<double>* gb) const {
        std::vector<double> gin(in_d, 0.0);
        for (int o = 0; o < out_d; ++o) {
            const double g = grad_out[o];
            if (gb) (*gb)[o] += g;
            const double* row = &w[static_cast<size_t>(o) * in_d];
            for (int i = 0; i < in_d; ++i) {
                if (gw) (*gw)[static_cast<size_t>(o) * in_d + i] += g * x[i];
                gin[i] += g * row[i];
            }
        }
        return gin;
    }
};

// e = z / ||z||; throws on a degenerate (near-zero) pre-norm embedding.
inline std::vector<double> l2_normalize(const std::vector<double>& z, double* norm_out = nullptr) {
    double n2 = 0.0;
    for (double v : z) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n < 1e-9) throw NumericalError("l2_normalize: degenerate zero embedding");
    std::vector<double> e(z.size());
    for (size_t i = 0; i < z.size(); ++i) e[i] = z[i] / n;
    if (norm_out) *norm_out = n;
    return e;
}

inline std::vector<double> l2_normalize_backward(const std::vector<double>& e, double norm,
                                                 const std::vector<double>& grad_e) {
    double dot = 0.0;
    for (size_t i = 0; i < e.size(); ++i) dot += e[i] * grad_e[i];
    std::vector<double> gz(e.size());
    for (size_t i = 0; i < e.size(); ++i) gz[i] = (grad_e[i] - e[i] * dot) / norm;
    return gz;
}

// Adam with bias correction over a flat parameter view.
struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    std::int64_t t = 0;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }

    void step(std::vector<double*>& params, const std::vector<double>& grads) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            *params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace advpat::nn
