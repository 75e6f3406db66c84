#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every draw is a pure function of
// (seed, stream coordinates), so simulation results do not depend on
// traversal order or thread count.

namespace exsim::rng {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Collapse up to four stream coordinates and a seed into one 64-bit key.
inline std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t h = mix64(seed ^ 0x2545f4914f6cdd1dULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    h = mix64(h ^ d);
    return h;
}

// Uniform on [0,1), 53-bit resolution.
inline double uniform01(std::uint64_t k) {
    return static_cast<double>(k >> 11) * 0x1.0p-53;
}

// Uniform on the open interval (0,1); safe for log().
inline double uniform_open(std::uint64_t k) {
    return (static_cast<double>(k >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform on the open interval (-half_width, half_width).
inline double uniform_symmetric(std::uint64_t k, double half_width) {
    return (2.0 * uniform_open(k) - 1.0) * half_width;
}

// Standard normal via Box-Muller on two decorrelated substreams of the key.
inline double normal(std::uint64_t k) {
    const double u1 = uniform_open(mix64(k ^ 0xa0761d6478bd642fULL));
    const double u2 = uniform01(mix64(k ^ 0xe7037ed1a0b428dbULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace exsim::rng
