#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <random>

namespace fosemu {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Standard normal deviate that is a pure function of (seed, stream, t).
///
/// Used for per-time observation noise so that the noise at a given time point
/// does not depend on which other grid points were simulated: refining a grid
/// keeps the values at the shared points.
inline double keyed_normal(std::uint64_t seed, std::uint64_t stream, double t) {
    std::uint64_t bits = 0;
    const double key = t == 0.0 ? 0.0 : t;  // fold -0.0 onto 0.0
    std::memcpy(&bits, &key, sizeof bits);
    const std::uint64_t h = splitmix64(stream_seed(seed, stream) ^ splitmix64(bits));
    const std::uint64_t h2 = splitmix64(h);
    // 53-bit uniforms in (0, 1]
    const double u1 = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fosemu
