#pragma once

// Test-only helpers: random sample sets and brute-force per-sample oracles
// that never go through the summary/finalize path.

#include "powerdiag/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testing {

using powerdiag::PairedSample;

/// Mixed-distribution sample set: x from one of several families, v a noisy
/// affine-free transform of x with random gain, occasionally independent.
inline std::vector<PairedSample> random_set(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> family(0, 4);
    std::uniform_real_distribution<double> gain(-3.0, 3.0);
    std::uniform_real_distribution<double> noise_scale(0.0, 2.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    std::exponential_distribution<double> expo(1.0);
    std::student_t_distribution<double> heavy(3.0);
    const int fx = family(rng);
    const double scale = std::pow(10.0, unit(rng) * 3.0);
    const double g = gain(rng);
    const double ns = noise_scale(rng);
    const bool independent = family(rng) == 0;
    auto draw = [&](int f) {
        switch (f) {
            case 0: return gauss(rng);
            case 1: return unit(rng);
            case 2: return expo(rng) * (unit(rng) < 0 ? -1.0 : 1.0);
            case 3: return heavy(rng);
            default: return 1.0 + 0.1 * gauss(rng);
        }
    };
    std::vector<PairedSample> out(n);
    for (auto& p : out) {
        p.x = scale * draw(fx);
        p.v = independent ? scale * draw(0) : g * p.x + ns * scale * draw(fx);
    }
    return out;
}

struct DirectMoments {
    long double ex2 = 0, ev2 = 0, exv = 0, mean_e = 0, mse = 0, coupling = 0;
};

/// Per-sample definitions evaluated in extended precision.
inline DirectMoments direct_moments(const std::vector<PairedSample>& s) {
    DirectMoments d;
    for (const auto& p : s) {
        const long double x = p.x, v = p.v, e = v - x;
        d.ex2 += x * x;
        d.ev2 += v * v;
        d.exv += x * v;
        d.mean_e += e;
        d.mse += e * e;
        d.coupling += v * e;
    }
    const long double n = static_cast<long double>(s.size());
    d.ex2 /= n; d.ev2 /= n; d.exv /= n; d.mean_e /= n; d.mse /= n; d.coupling /= n;
    return d;
}

inline bool rel_close(double a, double b, double rel, double floor = 1.0) {
    return std::fabs(a - b) <= rel * std::max({floor, std::fabs(a), std::fabs(b)});
}

}  // namespace testing
