#pragma once

// Homography estimation, perspective warping of the masked pattern, and
// overlay onto person images: the operator o(x, T(M*delta)).

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "advpat/errors.hpp"
#include "advpat/image.hpp"

namespace advpat {

struct Point {
    double x = 0.0, y = 0.0;
};

// Four corners in pixel coordinates, ordered TL, TR, BR, BL.
struct AnchorQuad {
    std::array<Point, 4> pts;

    double area() const {  // shoelace
        double a = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Point& p = pts[i];
            const Point& q = pts[(i + 1) % 4];
            a += p.x * q.y - q.x * p.y;
        }
        return 0.5 * std::abs(a);
    }

    bool is_convex() const {
        int sign = 0;
        for (int i = 0; i < 4; ++i) {
            const Point& a = pts[i];
            const Point& b = pts[(i + 1) % 4];
            const Point& c = pts[(i + 2) % 4];
            const double cr = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if (cr == 0.0) continue;
            const int s = cr > 0 ? 1 : -1;
            if (sign == 0) sign = s;
            else if (s != sign) return false;
        }
        return sign != 0;
    }

    void validate(int img_h = -1, int img_w = -1) const {
        if (!is_convex() || area() < 4.0)
            throw GeometryError("AnchorQuad: degenerate or non-convex quad");
        if (img_h > 0) {
            for (const Point& p : pts) {
                if (p.x < 0 || p.y < 0 || p.x > img_w - 1 || p.y > img_h - 1)
                    throw GeometryError("AnchorQuad: corner outside image bounds");
            }
        }
    }

    // Axis-aligned rectangle helper, corners at integer pixel positions.
    static AnchorQuad rect(double x0, double y0, double x1, double y1) {
        return AnchorQuad{{Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}}};
    }
};

struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, m[8] == 1

    Point apply(const Point& p) const {
        const double wz = m[6] * p.x + m[7] * p.y + m[8];
        if (std::abs(wz) < 1e-15) throw GeometryError("Homography: point maps to infinity");
        return {(m[0] * p.x + m[1] * p.y + m[2]) / wz, (m[3] * p.x + m[4] * p.y + m[5]) / wz};
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Homography inverse() const {
        const double d = det();
        if (std::abs(d) < 1e-12) throw GeometryError("Homography: singular matrix");
        Homography inv;
        inv.m[0] = (m[4] * m[8] - m[5] * m[7]) / d;
        inv.m[1] = (m[2] * m[7] - m[1] * m[8]) / d;
        inv.m[2] = (m[1] * m[5] - m[2] * m[4]) / d;
        inv.m[3] = (m[5] * m[6] - m[3] * m[8]) / d;
        inv.m[4] = (m[0] * m[8] - m[2] * m[6]) / d;
        inv.m[5] = (m[2] * m[3] - m[0] * m[5]) / d;
        inv.m[6] = (m[3] * m[7] - m[4] * m[6]) / d;
        inv.m[7] = (m[1] * m[6] - m[0] * m[7]) / d;
        inv.m[8] = (m[0] * m[4] - m[1] * m[3]) / d;
        // renormalize so entry (3,3) is 1
        const double s = inv.m[8];
        if (std::abs(s) < 1e-15) throw GeometryError("Homography: cannot normalize inverse");
        for (double& v : inv.m) v /= s;
        return inv;
    }
};

namespace detail {

// Gaussian elimination with partial pivoting on an n x (n+1) augmented system.
inline void solve_linear(std::vector<double>& a, std::vector<double>& x, int n) {
    const int cols = n + 1;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * cols + col]) > std::abs(a[piv * cols + col])) piv = r;
        if (std::abs(a[piv * cols + col]) < 1e-12)
            throw GeometryError("estimate_homography: singular system");
        if (piv != col)
            for (int c = 0; c < cols; ++c) std::swap(a[col * cols + c], a[piv * cols + c]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * cols + col] / a[col * cols + col];
            for (int c = col; c < cols; ++c) a[r * cols + c] -= f * a[col * cols + c];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = a[r * cols + n];
        for (int c = r + 1; c < n; ++c) s -= a[r * cols + c] * x[c];
        x[r] = s / a[r * cols + r];
    }
}

}  // namespace detail

// Solve the standard 8-equation system for H mapping each src corner to the
// corresponding dst corner; resulting matrix has (3,3) entry 1.
inline Homography estimate_homography(const AnchorQuad& src, const AnchorQuad& dst) {
    src.validate();
    dst.validate();
    std::vector<double> a(8 * 9, 0.0);
    for (int i = 0; i < 4; ++i) {
        const double sx = src.pts[i].x, sy = src.pts[i].y;
        const double dx = dst.pts[i].x, dy = dst.pts[i].y;
        double* r0 = &a[(2 * i) * 9];
        double* r1 = &a[(2 * i + 1) * 9];
        r0[0] = sx; r0[1] = sy; r0[2] = 1; r0[6] = -sx * dx; r0[7] = -sy * dx; r0[8] = dx;
        r1[3] = sx; r1[4] = sy; r1[5] = 1; r1[6] = -sx * dy; r1[7] = -sy * dy; r1[8] = dy;
    }
    std::vector<double> h;
    detail::solve_linear(a, h, 8);
    Homography H;
    for (int i = 0; i < 8; ++i) H.m[i] = h[i];
    H.m[8] = 1.0;
    if (std::abs(H.det()) < 1e-12) throw GeometryError("estimate_homography: degenerate result");
    return H;
}

// Output of warping the masked pattern into image space.
struct WarpedPattern {
    int h = 0, w = 0;
    std::vector<double> raster;          // h*w*3, zero outside coverage
    std::vector<std::uint8_t> coverage;  // h*w, 1 where the pattern lands

    double& at(int y, int x, int c) { return raster[(static_cast<size_t>(y) * w + x) * kChannels + c]; }
    double at(int y, int x, int c) const { return raster[(static_cast<size_t>(y) * w + x) * kChannels + c]; }
    std::uint8_t cov(int y, int x) const { return coverage[static_cast<size_t>(y) * w + x]; }
};

namespace detail {

struct BilinearTap {
    int x0, y0;
    double fx, fy;  // fractional offsets
    bool in_bounds;
};

inline BilinearTap bilinear_tap(double sx, double sy, int src_h, int src_w) {
    BilinearTap t{};
    t.x0 = static_cast<int>(std::floor(sx));
    t.y0 = static_cast<int>(std::floor(sy));
    t.fx = sx - t.x0;
    t.fy = sy - t.y0;
    t.in_bounds = (sx >= 0.0 && sy >= 0.0 && sx <= src_w - 1.0 && sy <= src_h - 1.0);
    return t;
}

template <typename Fetch>
inline double bilinear_sample(const BilinearTap& t, int src_h, int src_w, Fetch fetch) {
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
    const int x0 = clampi(t.x0, src_w - 1), x1 = clampi(t.x0 + 1, src_w - 1);
    const int y0 = clampi(t.y0, src_h - 1), y1 = clampi(t.y0 + 1, src_h - 1);
    return (1 - t.fy) * ((1 - t.fx) * fetch(y0, x0) + t.fx * fetch(y0, x1)) +
           t.fy * ((1 - t.fx) * fetch(y1, x0) + t.fx * fetch(y1, x1));
}

}  // namespace detail

// Inverse-warp of the masked pattern M*delta into an out_h x out_w raster.
// Coverage is 1 where the bilinearly warped source mask is >= 0.5 and the
// source coordinate falls inside the pattern; raster is 0 outside coverage.
inline WarpedPattern warp_pattern(const Pattern& p, const Mask& m, const Homography& h,
                                  int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("warp_pattern: output size must be positive");
    if (m.height() != p.height() || m.width() != p.width())
        throw std::invalid_argument("warp_pattern: mask size must match pattern");
    const Homography hinv = h.inverse();
    WarpedPattern out;
    out.h = out_h;
    out.w = out_w;
    out.raster.assign(static_cast<size_t>(out_h) * out_w * kChannels, 0.0);
    out.coverage.assign(static_cast<size_t>(out_h) * out_w, 0);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Point s = hinv.apply({static_cast<double>(x), static_cast<double>(y)});
            const auto tap = detail::bilinear_tap(s.x, s.y, p.height(), p.width());
            if (!tap.in_bounds) continue;
            const double mv = detail::bilinear_sample(tap, p.height(), p.width(),
                [&](int yy, int xx) { return static_cast<double>(m.at(yy, xx)); });
            if (mv < 0.5) continue;
            out.coverage[static_cast<size_t>(y) * out_w + x] = 1;
            for (int c = 0; c < kChannels; ++c) {
                out.at(y, x, c) = detail::bilinear_sample(tap, p.height(), p.width(),
                    [&](int yy, int xx) { return m.at(yy, xx) ? p.at(yy, xx, c) : 0.0; });
            }
        }
    }
    return out;
}

// Transpose of warp_pattern with respect to the pattern pixels: scatter an
// image-space gradient back through the same bilinear taps. Only covered
// output pixels contribute; masked-out pattern pixels receive nothing.
inline std::vector<double> warp_pattern_backprop(const std::vector<double>& image_grad,
                                                 const Pattern& p, const Mask& m,
                                                 const Homography& h, int out_h, int out_w) {
    if (image_grad.size() != static_cast<size_t>(out_h) * out_w * kChannels)
        throw std::invalid_argument("warp_pattern_backprop: gradient size mismatch");
    const Homography hinv = h.inverse();
    std::vector<double> grad(p.size(), 0.0);
    auto gidx = [&](int y, int x, int c) { return (static_cast<size_t>(y) * p.width() + x) * kChannels + c; };
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Point s = hinv.apply({static_cast<double>(x), static_cast<double>(y)});
            const auto tap = detail::bilinear_tap(s.x, s.y, p.height(), p.width());
            if (!tap.in_bounds) continue;
            const double mv = detail::bilinear_sample(tap, p.height(), p.width(),
                [&](int yy, int xx) { return static_cast<double>(m.at(yy, xx)); });
            if (mv < 0.5) continue;
            auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
            const int x0 = clampi(tap.x0, p.width() - 1), x1 = clampi(tap.x0 + 1, p.width() - 1);
            const int y0 = clampi(tap.y0, p.height() - 1), y1 = clampi(tap.y0 + 1, p.height() - 1);
            const double w00 = (1 - tap.fy) * (1 - tap.fx), w01 = (1 - tap.fy) * tap.fx;
            const double w10 = tap.fy * (1 - tap.fx), w11 = tap.fy * tap.fx;
            for (int c = 0; c < kChannels; ++c) {
                const double g = image_grad[(static_cast<size_t>(y) * out_w + x) * kChannels + c];
                if (g == 0.0) continue;
                if (m.at(y0, x0)) grad[gidx(y0, x0, c)] += g * w00;
                if (m.at(y0, x1)) grad[gidx(y0, x1, c)] += g * w01;
                if (m.at(y1, x0)) grad[gidx(y1, x0, c)] += g * w10;
                if (m.at(y1, x1)) grad[gidx(y1, x1, c)] += g * w11;
            }
        }
    }
    return grad;
}

// Hard replacement where coverage is 1; pixels outside coverage are
// bit-identical to x.
inline Image overlay(const Image& x, const WarpedPattern& wp) {
    if (wp.h != x.height() || wp.w != x.width())
        throw std::invalid_argument("overlay: warped raster size must match image");
    Image out = x;
    for (int y = 0; y < x.height(); ++y)
        for (int xx = 0; xx < x.width(); ++xx)
            if (wp.cov(y, xx))
                for (int c = 0; c < kChannels; ++c)
                    out.at(y, xx, c) = std::clamp(wp.at(y, xx, c), 0.0, 1.0);
    return out;
}

// H mapping the full pattern rectangle onto an image-space quad.
inline Homography pattern_to_quad(const Pattern& p, const AnchorQuad& dst) {
    const AnchorQuad src = AnchorQuad::rect(0.0, 0.0, p.width() - 1.0, p.height() - 1.0);
    return estimate_homography(src, dst);
}

}  // namespace advpat
