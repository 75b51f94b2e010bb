#pragma once

// Reproducible random numbers.
//
// Generator: xoshiro256** (Blackman & Vigna), state expanded from a 64-bit
// seed and a 64-bit stream id with SplitMix64. Every distribution below is
// implemented here rather than taken from <random>, whose distributions are
// implementation-defined; the same (seed, stream) yields the same numbers on
// every platform.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "geneval/error.hpp"

namespace geneval {

struct RngSeed {
    std::uint64_t value = 0;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent child seed, e.g. one per experiment repetition.
inline RngSeed derive_seed(RngSeed parent, std::uint64_t tag) {
    std::uint64_t s = parent.value ^ (0xD1B54A32D192ED03ULL * (tag + 1));
    splitmix64(s);
    return RngSeed{splitmix64(s)};
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(RngSeed seed, std::uint64_t stream = 0) {
        std::uint64_t s = seed.value ^ (0x6A09E667F3BCC909ULL * (stream + 1));
        for (auto& word : state_) {
            word = splitmix64(s);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, bound), Lemire's nearly-divisionless method.
    std::uint64_t uniform_index(std::uint64_t bound) {
        require(bound > 0, "uniform_index: bound must be positive");
        __uint128_t m = static_cast<__uint128_t>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<__uint128_t>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via the Marsaglia polar method; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn with probability proportional to weights (weights need not be normalized).
    std::size_t categorical(const std::vector<double>& weights) {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        require(total > 0.0, "categorical: weights must have positive sum");
        const double target = uniform() * total;
        double running = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) {
                continue;
            }
            last_positive = i;
            running += weights[i];
            if (target < running) {
                return i;
            }
        }
        return last_positive;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// First `count` entries of a seeded Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, RngSeed seed) {
    require(count <= n, "sample_without_replacement: count exceeds population");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(perm[i], perm[j]);
    }
    perm.resize(count);
    return perm;
}

}  // namespace geneval
