#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dynlink {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Independent seed for a sub-stream of `seed`.
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t seed, Parts... parts) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t p : std::initializer_list<std::uint64_t>{static_cast<std::uint64_t>(parts)...}) {
        h = splitmix64(h ^ p);
    }
    return h;
}

// Uniform in [0, 1), independent of the standard library's distributions.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace dynlink
