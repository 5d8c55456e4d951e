#pragma once

// Physical-dynamics simulation: the degradation function (random brightness
// and Gaussian blur), multi-position augmentation (translation/scaling with
// consistent anchor-quad transport), and a synthetic multi-camera toy dataset
// generator standing in for street-camera footage at desk scale.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "advpat/errors.hpp"
#include "advpat/geometry.hpp"
#include "advpat/image.hpp"
#include "advpat/rng.hpp"

namespace advpat {

struct DegradeParams {
    double brightness_lo = 0.7, brightness_hi = 1.3;  // multiplicative factor
    double blur_sigma_lo = 0.0, blur_sigma_hi = 1.2;  // Gaussian sigma in px

    void validate() const {
        if (!(brightness_lo > 0.0 && brightness_lo <= brightness_hi && brightness_hi <= 2.0))
            throw ConfigError("DegradeParams: brightness range must lie in (0, 2]");
        if (!(blur_sigma_lo >= 0.0 && blur_sigma_lo <= blur_sigma_hi && blur_sigma_hi <= 3.0))
            throw ConfigError("DegradeParams: blur sigma range must lie in [0, 3]");
    }

    static DegradeParams identity() { return {1.0, 1.0, 0.0, 0.0}; }
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with edge replication.
inline Image gaussian_blur(const Image& x, double sigma) {
    if (sigma <= 0.0) return x;
    const auto k = gaussian_kernel(sigma);
    const int radius = (static_cast<int>(k.size()) - 1) / 2;
    const int h = x.height(), w = x.width();
    Image tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < kChannels; ++c) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[i + radius] * x.at(y, std::clamp(xx + i, 0, w - 1), c);
                tmp.at(y, xx, c) = s;
            }
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int c = 0; c < kChannels; ++c) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), xx, c);
                out.at(y, xx, c) = s;
            }
    return out;
}

}  // namespace detail

struct DegradeSample {
    double brightness = 1.0;
    double sigma = 0.0;
};

inline DegradeSample sample_degradation(const DegradeParams& dp, Rng& rng) {
    dp.validate();
    DegradeSample s;
    s.brightness = dp.brightness_lo == dp.brightness_hi ? dp.brightness_lo
                                                        : uniform(rng, dp.brightness_lo, dp.brightness_hi);
    s.sigma = dp.blur_sigma_lo == dp.blur_sigma_hi ? dp.blur_sigma_lo
                                                   : uniform(rng, dp.blur_sigma_lo, dp.blur_sigma_hi);
    return s;
}

// Fixed-sample form: brightness scale, clamp to [0,1], then blur.
inline Image degrade_with(const Image& x, const DegradeSample& s) {
    Image out = x;
    if (s.brightness != 1.0) {
        for (double& v : out.data()) v = std::clamp(v * s.brightness, 0.0, 1.0);
    }
    return detail::gaussian_blur(out, s.sigma);
}

inline Image degrade(const Image& x, const DegradeParams& dp, Rng& rng) {
    return degrade_with(x, sample_degradation(dp, rng));
}

struct AugmentConfig {
    // defaults sized to the position/scale spread of the toy cameras; larger
    // values easily push near-edge anchor quads out of frame
    double max_translate_frac = 0.06;  // of width/height
    double scale_lo = 0.95, scale_hi = 1.05;
    int max_tries = 50;
};

namespace detail {

// y = s*(p - center) + center + t, applied to image content via inverse
// mapping with edge replication.
struct Affine {
    double s = 1.0, tx = 0.0, ty = 0.0, cx = 0.0, cy = 0.0;
    Point fwd(const Point& p) const {
        return {s * (p.x - cx) + cx + tx, s * (p.y - cy) + cy + ty};
    }
    Point inv(const Point& p) const {
        return {(p.x - tx - cx) / s + cx, (p.y - ty - cy) / s + cy};
    }
};

inline Image apply_affine(const Image& x, const Affine& a) {
    const int h = x.height(), w = x.width();
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            Point s = a.inv({static_cast<double>(xx), static_cast<double>(y)});
            s.x = std::clamp(s.x, 0.0, w - 1.0);  // edge replication
            s.y = std::clamp(s.y, 0.0, h - 1.0);
            const auto tap = bilinear_tap(s.x, s.y, h, w);
            for (int c = 0; c < kChannels; ++c)
                out.at(y, xx, c) = bilinear_sample(tap, h, w,
                    [&](int py, int px) { return x.at(py, px, c); });
        }
    }
    return out;
}

}  // namespace detail

// Fixed-parameter form: scale about the image center, then translate.
inline std::pair<Image, AnchorQuad> augment_with(const Image& x, const AnchorQuad& quad,
                                                 double scale, double tx, double ty) {
    detail::Affine a;
    a.cx = 0.5 * (x.width() - 1);
    a.cy = 0.5 * (x.height() - 1);
    a.s = scale;
    a.tx = tx;
    a.ty = ty;
    AnchorQuad q2;
    for (int i = 0; i < 4; ++i) q2.pts[i] = a.fwd(quad.pts[i]);
    return {detail::apply_affine(x, a), q2};
}

// Random translation and scaling of the image content, transporting the
// anchor quad consistently. Resamples (up to max_tries) when the transformed
// quad leaves the frame.
inline std::pair<Image, AnchorQuad> synth_augment(const Image& x, const AnchorQuad& quad,
                                                  const AugmentConfig& cfg, Rng& rng) {
    quad.validate(x.height(), x.width());
    for (int attempt = 0; attempt < cfg.max_tries; ++attempt) {
        detail::Affine a;
        a.cx = 0.5 * (x.width() - 1);
        a.cy = 0.5 * (x.height() - 1);
        a.s = uniform(rng, cfg.scale_lo, cfg.scale_hi);
        a.tx = uniform(rng, -cfg.max_translate_frac, cfg.max_translate_frac) * x.width();
        a.ty = uniform(rng, -cfg.max_translate_frac, cfg.max_translate_frac) * x.height();
        AnchorQuad q2;
        bool ok = true;
        for (int i = 0; i < 4; ++i) {
            q2.pts[i] = a.fwd(quad.pts[i]);
            if (q2.pts[i].x < 0 || q2.pts[i].y < 0 || q2.pts[i].x > x.width() - 1 ||
                q2.pts[i].y > x.height() - 1)
                ok = false;
        }
        if (!ok) continue;
        return {detail::apply_affine(x, a), q2};
    }
    throw SamplingError("synth_augment: no in-frame transform found after max_tries");
}

// ----- synthetic multi-camera toy dataset --------------------------------

struct CameraStyle {
    double gain_r = 1.0, gain_g = 1.0, gain_b = 1.0;
    double contrast = 1.0;
    double brightness = 0.0;

    bool operator==(const CameraStyle& o) const {
        return gain_r == o.gain_r && gain_g == o.gain_g && gain_b == o.gain_b &&
               contrast == o.contrast && brightness == o.brightness;
    }
};

struct ToyDatasetConfig {
    int identity_count = 20;
    int camera_count = 3;  // the number of distinct camera views
    int images_per_identity_per_camera = 30;
    int image_height = 48;
    int image_width = 24;
    std::vector<CameraStyle> camera_styles;  // defaulted per camera when empty
    double quad_fraction = 0.9;              // pattern anchor size relative to torso
    std::uint64_t seed = 1;

    void validate() const {
        if (identity_count <= 0 || camera_count < 2 || images_per_identity_per_camera <= 0)
            throw ConfigError("ToyDatasetConfig: need positive counts and >= 2 cameras");
        if (image_height < kMinImageSide || image_width < kMinImageSide)
            throw ConfigError("ToyDatasetConfig: image size below floor");
        if (identity_count > 60)
            throw ConfigError("ToyDatasetConfig: identity_count exceeds distinguishable appearance combinations (60)");
        if (!camera_styles.empty()) {
            if (static_cast<int>(camera_styles.size()) != camera_count)
                throw ConfigError("ToyDatasetConfig: camera_styles size must match camera_count");
            for (size_t i = 0; i < camera_styles.size(); ++i)
                for (size_t j = i + 1; j < camera_styles.size(); ++j)
                    if (camera_styles[i] == camera_styles[j])
                        throw ConfigError("ToyDatasetConfig: camera styles must be pairwise distinct");
        }
    }
};

struct DatasetEntry {
    Image image;
    int identity = 0;  // 1-based
    int camera = 0;    // 1-based
    int sequence = 0;
    AnchorQuad quad;   // torso placement region for the pattern
};

struct Dataset {
    std::vector<DatasetEntry> entries;

    int camera_count() const {
        int m = 0;
        for (const auto& e : entries) m = std::max(m, e.camera);
        return m;
    }
    int identity_count() const {
        int m = 0;
        for (const auto& e : entries) m = std::max(m, e.identity);
        return m;
    }
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1) { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else { r1 = c; b1 = x; }
    const double m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

struct IdentityLook {
    double torso_rgb[3];
    double pants_rgb[3];
    double torso_width_frac;  // of image width
};

// Deterministic appearance per identity: golden-angle hue stepping keeps
// clothing colors well separated for up to 60 identities.
inline IdentityLook identity_look(int identity) {
    IdentityLook lk{};
    const double hue = std::fmod(137.50776405 * identity, 360.0);
    const double hue2 = std::fmod(hue + 180.0 + 23.0 * (identity % 3), 360.0);
    const double sat = 0.75 + 0.2 * ((identity % 4) / 3.0);
    const double val = 0.55 + 0.35 * ((identity % 5) / 4.0);
    hsv_to_rgb(hue, sat, val, lk.torso_rgb[0], lk.torso_rgb[1], lk.torso_rgb[2]);
    hsv_to_rgb(hue2, 0.6, 0.45 + 0.1 * (identity % 2), lk.pants_rgb[0], lk.pants_rgb[1],
               lk.pants_rgb[2]);
    lk.torso_width_frac = 0.55 + 0.12 * ((identity % 3) / 2.0);
    return lk;
}

inline std::vector<CameraStyle> default_camera_styles(int camera_count) {
    std::vector<CameraStyle> styles;
    for (int c = 0; c < camera_count; ++c) {
        CameraStyle s;
        // alternating warm / cool / neutral color temperature plus a
        // contrast and brightness spread: the cross-camera style gap the
        // attack exploits has to exist at desk scale
        const double t = camera_count > 1 ? static_cast<double>(c) / (camera_count - 1) : 0.0;
        s.gain_r = 1.12 - 0.28 * t;
        s.gain_b = 0.84 + 0.30 * t;
        s.gain_g = 1.0 - 0.06 * t;
        s.contrast = 0.85 + 0.3 * t;
        s.brightness = -0.04 + 0.08 * t;
        styles.push_back(s);
    }
    return styles;
}

inline double apply_style_channel(double v, double gain, const CameraStyle& st) {
    v = (v - 0.5) * st.contrast + 0.5;
    v = v * gain + st.brightness;
    return std::clamp(v, 0.0, 1.0);
}

// Viewing pose of the flat torso-mounted pattern surface per camera: each
// view sees the surface under its own in-plane rotation and vertical
// keystone, so the same pattern projects to genuinely different pixel
// content across cameras (the cross-camera appearance change the attack
// exploits; without it every attacked image would carry identical pattern
// pixels and cross-camera similarity could only go up).
struct QuadPose {
    double rot_rad = 0.0;
    double keystone = 0.0;  // right edge stretched by (1+k), left by (1-k)
};

inline QuadPose camera_quad_pose(int camera, int camera_count) {
    // interleave pose extremes across the camera order so the strongest
    // viewing angle does not coincide with the strongest color style (the
    // color styles ramp monotonically with the camera index)
    const int c0 = camera - 1;
    const int idx = c0 % 2 == 0 ? c0 / 2 : camera_count - 1 - c0 / 2;
    const double t = camera_count > 1 ? static_cast<double>(idx) / (camera_count - 1) : 0.5;
    return {(t - 0.5) * 30.0 * std::numbers::pi / 180.0, (t - 0.5) * 0.7};
}

// Rectangle of size w x h centered at (cx, cy), keystoned then rotated;
// shrunk uniformly toward its center until all corners are in frame.
inline AnchorQuad posed_quad(double cx, double cy, double w, double h,
                             const QuadPose& pose, int H, int W) {
    const double cr = std::cos(pose.rot_rad), sr = std::sin(pose.rot_rad);
    for (double s = 1.0; s > 0.1; s *= 0.9) {
        const double hw = 0.5 * w * s, hh = 0.5 * h * s;
        const double xs[4] = {-hw, hw, hw, -hw};
        const double ys[4] = {-hh, -hh, hh, hh};
        AnchorQuad q;
        bool ok = true;
        for (int i = 0; i < 4; ++i) {
            const double y = ys[i] * (1.0 + pose.keystone * (xs[i] > 0 ? 1.0 : -1.0));
            q.pts[i] = {cx + xs[i] * cr - y * sr, cy + xs[i] * sr + y * cr};
            if (q.pts[i].x < 0.0 || q.pts[i].x > W - 1.0 || q.pts[i].y < 0.0 ||
                q.pts[i].y > H - 1.0)
                ok = false;
        }
        if (ok) return q;
    }
    throw GeometryError("posed_quad: no in-frame quad found");
}

}  // namespace detail

// Renders each identity as a parameterized figure (head/torso/legs blocks
// with identity-specific colors and proportions) under per-camera style
// transforms and per-image position jitter. Deterministic given the seed.
inline Dataset generate_toy_dataset(const ToyDatasetConfig& cfg) {
    cfg.validate();
    const auto styles = cfg.camera_styles.empty()
                            ? detail::default_camera_styles(cfg.camera_count)
                            : cfg.camera_styles;
    Dataset ds;
    Rng rng = make_rng(cfg.seed, "toy-dataset");
    const int H = cfg.image_height, W = cfg.image_width;
    for (int id = 1; id <= cfg.identity_count; ++id) {
        const auto lk = detail::identity_look(id);
        for (int cam = 1; cam <= cfg.camera_count; ++cam) {
            const CameraStyle& st = styles[cam - 1];
            for (int n = 1; n <= cfg.images_per_identity_per_camera; ++n) {
                const double jx = uniform(rng, -0.06, 0.06) * W;
                const double jy = uniform(rng, -0.03, 0.03) * H;
                const double js = uniform(rng, 0.95, 1.05);

                Image img(H, W, 0.78);  // light background
                // figure layout in normalized rows, jittered
                const double cx = 0.5 * W + jx;
                const double head_h = 0.16 * H * js, torso_h = 0.40 * H * js,
                             legs_h = 0.34 * H * js;
                const double top = 0.05 * H + jy;
                const double torso_w = lk.torso_width_frac * W * js;
                auto paint = [&](double y0, double y1, double x0, double x1, const double rgb[3]) {
                    for (int y = std::max(0, (int)std::floor(y0)); y <= std::min(H - 1, (int)std::ceil(y1)); ++y)
                        for (int x = std::max(0, (int)std::floor(x0)); x <= std::min(W - 1, (int)std::ceil(x1)); ++x)
                            for (int c = 0; c < kChannels; ++c) img.at(y, x, c) = rgb[c];
                };
                const double skin[3] = {0.85, 0.68, 0.55};
                paint(top, top + head_h, cx - 0.14 * W, cx + 0.14 * W, skin);
                const double ty0 = top + head_h + 1, ty1 = ty0 + torso_h;
                paint(ty0, ty1, cx - 0.5 * torso_w, cx + 0.5 * torso_w, lk.torso_rgb);
                paint(ty1 + 1, ty1 + 1 + legs_h, cx - 0.30 * torso_w, cx + 0.30 * torso_w,
                      lk.pants_rgb);

                // camera style transform + mild sensor noise
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x) {
                        img.at(y, x, 0) = detail::apply_style_channel(img.at(y, x, 0), st.gain_r, st);
                        img.at(y, x, 1) = detail::apply_style_channel(img.at(y, x, 1), st.gain_g, st);
                        img.at(y, x, 2) = detail::apply_style_channel(img.at(y, x, 2), st.gain_b, st);
                    }
                for (double& v : img.data())
                    v = std::clamp(v + uniform(rng, -0.02, 0.02), 0.0, 1.0);

                // pattern anchor: the clothed region (torso plus upper legs,
                // a full-length garment) seen under this camera's viewing
                // pose; clothing colors are the dominant identity cue, so the
                // pattern must be able to cover them
                const double span_h = torso_h + 1 + 0.6 * legs_h;
                const double qw = cfg.quad_fraction * torso_w;
                const double qh = cfg.quad_fraction * span_h;
                const double qcx = cx, qcy = ty0 + 0.5 * span_h;
                AnchorQuad quad = detail::posed_quad(
                    qcx, qcy, qw, qh, detail::camera_quad_pose(cam, cfg.camera_count), H, W);
                quad.validate(H, W);

                ds.entries.push_back({std::move(img), id, cam, n, quad});
            }
        }
    }
    return ds;
}

// Deterministic train/test split: every k-th image per (identity, camera)
// group is held out.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int holdout_every = 5) {
    Dataset train, test;
    for (const auto& e : ds.entries) {
        if (e.sequence % holdout_every == 0) test.entries.push_back(e);
        else train.entries.push_back(e);
    }
    return {train, test};
}

}  // namespace advpat
