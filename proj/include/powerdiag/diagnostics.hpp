#pragma once

// Power-regime classification and the estimator/error coupling verdicts.
//
// The coupling term E[v (v - x)] splits exactly as
//     coupling = mse / 2 + (E[v^2] - E[x^2]) / 2,
// so an estimate with more power than the signal carries coupling strictly
// above half its MSE, and one with at most the signal's power sits at or
// below it.

#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "json.hpp"

namespace powerdiag {

enum class RegimeLabel { PowerDominant, PowerConservative, PowerBalance };

[[nodiscard]] constexpr std::string_view to_string(RegimeLabel r) noexcept {
    switch (r) {
        case RegimeLabel::PowerDominant: return "power_dominant";
        case RegimeLabel::PowerConservative: return "power_conservative";
        case RegimeLabel::PowerBalance: return "power_balance";
    }
    return "unknown";
}

[[nodiscard]] inline RegimeLabel parse_regime(std::string_view s) {
    if (s == "power_dominant") return RegimeLabel::PowerDominant;
    if (s == "power_conservative") return RegimeLabel::PowerConservative;
    if (s == "power_balance") return RegimeLabel::PowerBalance;
    throw Error(ErrorKind::ParseError, "unknown regime '" + std::string(s) + "'");
}

inline constexpr double kDefaultBalanceTol = 1e-6;
inline constexpr double kDefaultDegeneracyTol = 1e-9;

struct CouplingDecomposition {
    double coupling = 0.0;
    double half_mse = 0.0;
    double half_power_gap = 0.0;  ///< (ev2 - ex2) / 2
    double residual = 0.0;        ///< coupling - half_mse - half_power_gap
};

struct PenaltyVerdict {
    RegimeLabel regime = RegimeLabel::PowerConservative;
    double coupling = 0.0;
    double bound = 0.0;  ///< mse / 2
    bool satisfied = false;
    bool degenerate = false;
    /// Informational: coupling is below zero. Shrinkage estimators land here;
    /// it is not a violation of anything provable.
    bool negative_coupling = false;
};

struct TriadReport {
    double bias = 0.0;
    double error_variance = 0.0;
    double power_ratio = 0.0;
    double mse = 0.0;
    double coupling = 0.0;
    RegimeLabel regime = RegimeLabel::PowerConservative;
    PenaltyVerdict verdict;
};

/// Regime from raw powers. `ex2` must be positive.
[[nodiscard]] inline RegimeLabel classify_power(double ex2, double ev2, double balance_tol) {
    if (!(ex2 > 0.0)) throw Error(ErrorKind::ZeroSignalPower, "signal power E[x^2] is zero");
    if (!(balance_tol >= 0.0)) throw Error(ErrorKind::InvalidArgument, "balance_tol must be >= 0");
    const double gap = ev2 - ex2;
    if (std::fabs(gap) <= balance_tol * ex2) return RegimeLabel::PowerBalance;
    if (gap > balance_tol * ex2) return RegimeLabel::PowerDominant;
    return RegimeLabel::PowerConservative;
}

[[nodiscard]] inline RegimeLabel classify_regime(const MomentStats& stats,
                                                 double balance_tol = kDefaultBalanceTol) {
    return classify_power(stats.ex2, stats.ev2, balance_tol);
}

[[nodiscard]] inline CouplingDecomposition decompose_coupling(const MomentStats& stats) {
    if (stats.n == 0) throw Error(ErrorKind::EmptySummary, "decomposition needs n >= 1");
    CouplingDecomposition d;
    d.coupling = stats.coupling;
    d.half_mse = 0.5 * stats.mse;
    d.half_power_gap = 0.5 * (stats.ev2 - stats.ex2);
    d.residual = d.coupling - d.half_mse - d.half_power_gap;
    return d;
}

[[nodiscard]] inline PenaltyVerdict check_penalty(const MomentStats& stats,
                                                  double tol = kDefaultDegeneracyTol,
                                                  double balance_tol = kDefaultBalanceTol) {
    if (!(tol >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be >= 0");
    PenaltyVerdict v;
    v.regime = classify_regime(stats, balance_tol);
    v.coupling = stats.coupling;
    v.bound = 0.5 * stats.mse;
    const double scale = std::max(1.0, stats.mse);
    v.degenerate = std::fabs(stats.coupling) <= tol * scale;
    if (v.regime == RegimeLabel::PowerDominant) {
        v.satisfied = v.coupling > v.bound;
    } else {
        v.satisfied = v.coupling <= v.bound + tol * scale;
    }
    v.negative_coupling = stats.coupling < -tol * scale;
    return v;
}

[[nodiscard]] inline TriadReport triad_report(const MomentStats& stats,
                                              double balance_tol = kDefaultBalanceTol,
                                              double tol = kDefaultDegeneracyTol) {
    TriadReport r;
    r.verdict = check_penalty(stats, tol, balance_tol);
    r.regime = r.verdict.regime;
    r.bias = stats.mean_e;
    r.error_variance = stats.mse - stats.mean_e * stats.mean_e;
    r.power_ratio = stats.ev2 / stats.ex2;
    r.mse = stats.mse;
    r.coupling = stats.coupling;
    return r;
}

[[nodiscard]] inline nlohmann::ordered_json to_json(const PenaltyVerdict& v) {
    nlohmann::ordered_json j;
    j["regime"] = to_string(v.regime);
    j["coupling"] = v.coupling;
    j["bound"] = v.bound;
    j["satisfied"] = v.satisfied;
    j["degenerate"] = v.degenerate;
    j["negative_coupling"] = v.negative_coupling;
    return j;
}

/// Fixed key order: bias, error_variance, power_ratio, mse, coupling,
/// regime, verdict.
[[nodiscard]] inline nlohmann::ordered_json to_json(const TriadReport& r) {
    nlohmann::ordered_json j;
    j["bias"] = r.bias;
    j["error_variance"] = r.error_variance;
    j["power_ratio"] = r.power_ratio;
    j["mse"] = r.mse;
    j["coupling"] = r.coupling;
    j["regime"] = to_string(r.regime);
    j["verdict"] = to_json(r.verdict);
    return j;
}

}  // namespace powerdiag
