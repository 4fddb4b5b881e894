#pragma once

#include <cstdint>
#include <string_view>

namespace t1::rng {

/// SplitMix64 output function. Counter-based and platform-stable: the i-th
/// draw from a given seed is a pure function of (seed, i), so results are
/// identical across compilers, standard libraries and thread schedules.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic stream of pseudo-random draws. Deliberately not
/// UniformRandomBitGenerator: std::*_distribution output is
/// implementation-defined, so all bounded draws are implemented here.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return mix64(state_++); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection sampling, unbiased. n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n);
        std::uint64_t r = next_u64();
        while (r > limit) r = next_u64();
        return r % n;
    }

    /// Bernoulli draw, true with probability prob (clamped to [0,1]).
    bool next_bool(double prob) {
        if (prob >= 1.0) return true;
        if (prob <= 0.0) return false;
        return next_unit() < prob;
    }

private:
    std::uint64_t state_;
};

/// Derives a child seed from a root seed and a label, so every stochastic
/// stage of a run draws from its own stream. FNV-1a over the label folded
/// into the root through mix64.
inline std::uint64_t derive(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix64(root ^ mix64(h));
}

} // namespace t1::rng
