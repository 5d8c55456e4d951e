#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace advpat {

using Rng = std::mt19937_64;

// FNV-1a over a label, mixed with the global seed. Used to derive
// independent per-stage streams from one recorded seed.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view label) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h ^= global_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

inline Rng make_rng(std::uint64_t global_seed, std::string_view label) {
    return Rng(derive_seed(global_seed, label));
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace advpat
