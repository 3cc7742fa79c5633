#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace evolt::rng {

// All randomness in the project flows through these helpers so that a seed
// reproduces bit-identical results regardless of platform or stdlib. The
// std::* distributions are implementation-defined and therefore avoided.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Uniform in [0,1) with 53-bit resolution.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Box-Muller; draws two engine values per variate.
inline double gaussian(std::mt19937_64& g) {
    double u1 = uniform01(g);
    double u2 = uniform01(g);
    if (u1 < 0x1.0p-1022) u1 = 0x1.0p-1022;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi_v<double> * u2);
}

// Bounded draw via 128-bit multiply; bias is < 2^-64 and identical everywhere.
inline std::uint64_t bounded(std::mt19937_64& g, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(g()) * n) >> 64);
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[bounded(g, i)]);
    }
}

}  // namespace evolt::rng
