#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mixsel {

namespace detail {

// splitmix64 finalizer; good avalanche, cheap.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Deterministic fan-out of a root seed to task-keyed streams.
// Order of mixing matters; callers key tasks by stable ids
// (restart number, replicate number, model hash), never by
// scheduling order.
inline std::uint64_t derive_seed(std::uint64_t root) { return detail::mix64(root); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t key, Rest... rest) {
    return derive_seed(detail::mix64(root ^ detail::mix64(key)), rest...);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(detail::mix64(seed)); }

// Uniform double in [0,1) built from the top 53 bits; identical
// on every platform, unlike std::uniform_real_distribution.
inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection-free scaling (n is tiny here;
// the modulo bias of 2^64 % n is immaterial, but keep it exact anyway).
inline int next_below(Rng& rng, int n) {
    return static_cast<int>(next_unit(rng) * n) % n;
}

// Categorical draw by CDF inversion over a probability vector.
inline int draw_categorical(Rng& rng, const std::vector<double>& probs) {
    const double u = next_unit(rng);
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < probs.size(); ++j) {
        acc += probs[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(probs.size()) - 1;
}

} // namespace mixsel
