#pragma once

#include <cstdint>
#include <random>

namespace pondstat {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of replicate k under a master seed. Stable across runs and
/// independent of execution order, so serial and parallel runs draw the
/// same frames.
constexpr std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t k) noexcept {
    return splitmix64(master_seed ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

/// Seed for the held-out frame paired with replicate k.
constexpr std::uint64_t holdout_seed(std::uint64_t master_seed, std::uint64_t k) noexcept {
    return replicate_seed(splitmix64(master_seed ^ 0x4f1bbcdcbfa53e0bULL), k);
}

/// Uniform integer in [0, bound) by the multiply-shift method. Unlike
/// std::uniform_int_distribution the result is identical on every
/// standard library.
__extension__ using uint128 = unsigned __int128;

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const uint128 wide = static_cast<uint128>(rng()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace pondstat
