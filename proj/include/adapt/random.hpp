#pragma once

#include <cstdint>
#include <random>

namespace adapt {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to fan one seed out into independent streams
// (per tree, per period, per row) without consuming a parent generator.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return derive_seed(derive_seed(seed, stream), counter);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Beta(a, b) via the two-gamma construction.
inline double sample_beta(double a, double b, Rng& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    if (x + y == 0.0) return uniform01(rng) < a / (a + b) ? 1.0 : 0.0;
    return x / (x + y);
}

}  // namespace adapt
