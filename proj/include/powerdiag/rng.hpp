#pragma once

// Reproducible random streams.
//
// Core generator: xoshiro256** (Blackman & Vigna), state seeded from four
// consecutive SplitMix64 outputs. Substreams are addressed by an index:
//
//     substream_seed(seed, index) = splitmix64_mix(seed + 0x9E3779B97F4A7C15 * (index + 1))
//
// Uniform doubles take the top 53 bits. Gaussian draws use the cosine branch
// of Box-Muller on two uniforms (the sine branch is discarded so that every
// draw consumes exactly two words). Laplace draws use the inverse CDF on one
// uniform. None of this depends on <random> distributions, whose output is
// implementation-defined.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace powerdiag {

[[nodiscard]] constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64_mix(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : s_) {
            sm += 0x9E3779B97F4A7C15ULL;
            word = splitmix64_mix(sm);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// [0, 1)
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double gaussian() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Zero-mean Laplace with unit variance.
    double laplace() noexcept {
        const double u = uniform() - 0.5;  // [-0.5, 0.5)
        const double b = 1.0 / std::numbers::sqrt2;
        const double mag = -b * std::log(std::max(1.0 - 2.0 * std::fabs(u), 0x1.0p-53));
        return u < 0.0 ? -mag : mag;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace powerdiag
