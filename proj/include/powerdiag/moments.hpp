#pragma once

// Sufficient statistics for paired (true value, candidate) draws.
//
// Every quantity downstream (power ratio, coupling, MSE, optimal scale) is a
// function of five raw sums and a count, so a summary can be built in
// pieces, shipped between threads, and merged. Moments are population
// (divide-by-n) raw moments, not central ones.

#include "powerdiag/error.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

namespace powerdiag {

struct PairedSample {
    double x = 0.0;  ///< true signal draw
    double v = 0.0;  ///< estimate or unscaled candidate, same units as x

    friend bool operator==(const PairedSample&, const PairedSample&) = default;
};

enum class Summation { Plain, Compensated };

struct MomentSummary {
    std::size_t n = 0;
    double sum_xx = 0.0;
    double sum_vv = 0.0;
    double sum_xv = 0.0;
    double sum_x = 0.0;
    double sum_v = 0.0;
    Summation mode = Summation::Plain;
    /// Neumaier running corrections for the five sums, in declaration order.
    /// Stays zero in Plain mode.
    std::array<double, 5> carry{};

    [[nodiscard]] static MomentSummary compensated() {
        MomentSummary s;
        s.mode = Summation::Compensated;
        return s;
    }

    friend bool operator==(const MomentSummary&, const MomentSummary&) = default;
};

struct MomentStats {
    std::size_t n = 0;
    double ex2 = 0.0;       ///< mean of x^2
    double ev2 = 0.0;       ///< mean of v^2
    double exv = 0.0;       ///< mean of x*v
    double mean_e = 0.0;    ///< mean of v - x
    double mse = 0.0;       ///< mean of (v - x)^2, via ev2 - 2 exv + ex2
    double coupling = 0.0;  ///< mean of v * (v - x), via ev2 - exv
};

namespace detail {

inline void neumaier_add(double& sum, double& carry, double value) noexcept {
    const double t = sum + value;
    if (std::fabs(sum) >= std::fabs(value)) {
        carry += (sum - t) + value;
    } else {
        carry += (value - t) + sum;
    }
    sum = t;
}

inline void add_to(MomentSummary& s, std::size_t slot, double& sum, double value) noexcept {
    if (s.mode == Summation::Compensated) {
        neumaier_add(sum, s.carry[slot], value);
    } else {
        sum += value;
    }
}

}  // namespace detail

/// Returns `summary` extended by `batch`. Throws NonFiniteSample naming the
/// index (within `batch`) of the first pair with a NaN or infinite field;
/// nothing is accumulated in that case.
[[nodiscard]] inline MomentSummary accumulate(MomentSummary summary,
                                              std::span<const PairedSample> batch) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!std::isfinite(batch[i].x) || !std::isfinite(batch[i].v)) {
            throw Error(ErrorKind::NonFiniteSample,
                        "non-finite pair at index " + std::to_string(i), i);
        }
    }
    for (const auto& p : batch) {
        detail::add_to(summary, 0, summary.sum_xx, p.x * p.x);
        detail::add_to(summary, 1, summary.sum_vv, p.v * p.v);
        detail::add_to(summary, 2, summary.sum_xv, p.x * p.v);
        detail::add_to(summary, 3, summary.sum_x, p.x);
        detail::add_to(summary, 4, summary.sum_v, p.v);
    }
    summary.n += batch.size();
    return summary;
}

[[nodiscard]] inline MomentSummary summarize(std::span<const PairedSample> batch,
                                             Summation mode = Summation::Plain) {
    MomentSummary empty;
    empty.mode = mode;
    return accumulate(empty, batch);
}

/// Component-wise sum. The result is compensated if either input is.
[[nodiscard]] inline MomentSummary merge(const MomentSummary& a, const MomentSummary& b) noexcept {
    MomentSummary out = a;
    if (b.mode == Summation::Compensated) out.mode = Summation::Compensated;
    out.n = a.n + b.n;
    const std::array<double, 5> rhs{b.sum_xx, b.sum_vv, b.sum_xv, b.sum_x, b.sum_v};
    std::array<double*, 5> lhs{&out.sum_xx, &out.sum_vv, &out.sum_xv, &out.sum_x, &out.sum_v};
    for (std::size_t k = 0; k < 5; ++k) {
        detail::add_to(out, k, *lhs[k], rhs[k]);
        out.carry[k] += b.carry[k];
    }
    return out;
}

[[nodiscard]] inline MomentStats finalize(const MomentSummary& s) {
    if (s.n == 0) throw Error(ErrorKind::EmptySummary, "finalize requires at least one sample");
    const double n = static_cast<double>(s.n);
    MomentStats st;
    st.n = s.n;
    st.ex2 = (s.sum_xx + s.carry[0]) / n;
    st.ev2 = (s.sum_vv + s.carry[1]) / n;
    st.exv = (s.sum_xv + s.carry[2]) / n;
    st.mean_e = ((s.sum_v + s.carry[4]) - (s.sum_x + s.carry[3])) / n;
    st.mse = st.ev2 - 2.0 * st.exv + st.ex2;
    st.coupling = st.ev2 - st.exv;
    return st;
}

}  // namespace powerdiag
