#pragma once

// Core raster types: Image (HxWx3, values in [0,1]), Pattern (the optimized
// raster delta constrained to a per-channel printable interval), Mask (binary
// shape), plus the total-variation regularizer and interval projection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "advpat/errors.hpp"

namespace advpat {

constexpr int kChannels = 3;
constexpr int kMinImageSide = 8;  // model input floor

class Image {
  public:
    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : h_(height), w_(width), pix_(static_cast<size_t>(height) * width * kChannels, fill) {
        if (height < kMinImageSide || width < kMinImageSide)
            throw std::invalid_argument("Image: size below 8x8 floor");
    }

    int height() const { return h_; }
    int width() const { return w_; }
    size_t size() const { return pix_.size(); }

    double& at(int y, int x, int c) { return pix_[(static_cast<size_t>(y) * w_ + x) * kChannels + c]; }
    double at(int y, int x, int c) const { return pix_[(static_cast<size_t>(y) * w_ + x) * kChannels + c]; }

    std::vector<double>& data() { return pix_; }
    const std::vector<double>& data() const { return pix_; }

    void clamp01() {
        for (double& v : pix_) v = std::clamp(v, 0.0, 1.0);
    }

    bool operator==(const Image& o) const { return h_ == o.h_ && w_ == o.w_ && pix_ == o.pix_; }

  private:
    int h_ = 0, w_ = 0;
    std::vector<double> pix_;
};

// Per-channel printable interval. Default excludes the high-brightness /
// high-saturation extremes while leaving a wide gamut.
struct ColorInterval {
    std::array<double, kChannels> lower{0.1, 0.1, 0.1};
    std::array<double, kChannels> upper{0.85, 0.85, 0.85};

    void validate() const {
        for (int c = 0; c < kChannels; ++c) {
            if (!(0.0 <= lower[c] && lower[c] < upper[c] && upper[c] <= 1.0))
                throw std::invalid_argument("ColorInterval: need 0 <= lower < upper <= 1");
        }
    }
    double midpoint(int c) const { return 0.5 * (lower[c] + upper[c]); }
};

class Pattern {
  public:
    Pattern() = default;
    Pattern(int height, int width, ColorInterval interval = {})
        : h_(height), w_(width), interval_(interval),
          pix_(static_cast<size_t>(height) * width * kChannels, 0.0) {
        if (height <= 0 || width <= 0) throw std::invalid_argument("Pattern: empty");
        interval_.validate();
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                for (int c = 0; c < kChannels; ++c) at(y, x, c) = interval_.midpoint(c);
    }

    int height() const { return h_; }
    int width() const { return w_; }
    size_t size() const { return pix_.size(); }
    const ColorInterval& interval() const { return interval_; }

    double& at(int y, int x, int c) { return pix_[(static_cast<size_t>(y) * w_ + x) * kChannels + c]; }
    double at(int y, int x, int c) const { return pix_[(static_cast<size_t>(y) * w_ + x) * kChannels + c]; }

    std::vector<double>& data() { return pix_; }
    const std::vector<double>& data() const { return pix_; }

    bool operator==(const Pattern& o) const { return h_ == o.h_ && w_ == o.w_ && pix_ == o.pix_; }

  private:
    int h_ = 0, w_ = 0;
    ColorInterval interval_;
    std::vector<double> pix_;
};

class Mask {
  public:
    Mask() = default;
    Mask(int height, int width, std::uint8_t fill = 1)
        : h_(height), w_(width), v_(static_cast<size_t>(height) * width, fill) {
        if (height <= 0 || width <= 0) throw std::invalid_argument("Mask: empty");
    }

    int height() const { return h_; }
    int width() const { return w_; }

    std::uint8_t& at(int y, int x) { return v_[static_cast<size_t>(y) * w_ + x]; }
    std::uint8_t at(int y, int x) const { return v_[static_cast<size_t>(y) * w_ + x]; }

    std::vector<std::uint8_t>& data() { return v_; }
    const std::vector<std::uint8_t>& data() const { return v_; }

    void validate() const {
        bool any = false;
        for (std::uint8_t b : v_) {
            if (b != 0 && b != 1) throw std::invalid_argument("Mask: values must be 0 or 1");
            any |= (b == 1);
        }
        if (!any) throw std::invalid_argument("Mask: at least one entry must be 1");
    }

  private:
    int h_ = 0, w_ = 0;
    std::vector<std::uint8_t> v_;
};

struct TvResult {
    double value = 0.0;
    std::vector<double> grad;  // same layout as Pattern pixels
};

// TV(delta) = sum over channels and pixels of
// sqrt((d[p,q]-d[p+1,q])^2 + (d[p,q]-d[p,q+1])^2),
// with out-of-range neighbor differences contributing 0 and the gradient of
// sqrt at 0 defined as 0.
inline TvResult total_variation(const Pattern& p) {
    if (p.size() == 0) throw std::invalid_argument("total_variation: empty pattern");
    TvResult r;
    r.grad.assign(p.size(), 0.0);
    const int h = p.height(), w = p.width();
    auto gidx = [&](int y, int x, int c) { return (static_cast<size_t>(y) * w + x) * kChannels + c; };
    for (int c = 0; c < kChannels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dv = (y + 1 < h) ? p.at(y, x, c) - p.at(y + 1, x, c) : 0.0;
                const double dh = (x + 1 < w) ? p.at(y, x, c) - p.at(y, x + 1, c) : 0.0;
                const double t = std::sqrt(dv * dv + dh * dh);
                r.value += t;
                if (t > 0.0) {
                    r.grad[gidx(y, x, c)] += (dv + dh) / t;
                    if (y + 1 < h) r.grad[gidx(y + 1, x, c)] -= dv / t;
                    if (x + 1 < w) r.grad[gidx(y, x + 1, c)] -= dh / t;
                }
            }
        }
    }
    return r;
}

// Clamp every pixel into the pattern's interval. Total and idempotent.
inline Pattern project_interval(Pattern p) {
    const ColorInterval& iv = p.interval();
    for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x)
            for (int c = 0; c < kChannels; ++c)
                p.at(y, x, c) = std::clamp(p.at(y, x, c), iv.lower[c], iv.upper[c]);
    return p;
}

}  // namespace advpat
