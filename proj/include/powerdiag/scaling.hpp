#pragma once

// Scaled-estimator family v(t) = t z for a fixed candidate z.
//
// MSE(t) = t^2 E[z^2] - 2 t E[xz] + E[x^2] is a convex quadratic, minimised
// at t* = E[xz] / E[z^2]. At t* the estimate is orthogonal to its error and
// its power E[xz]^2 / E[z^2] never exceeds E[x^2] (Cauchy-Schwarz), with
// equality only for a collinear candidate.
//
// The controllers walk t from a start value toward t* and report how fast
// they got there and whether any iterate crossed into the power-dominant
// zone |t| > sqrt(E[x^2] / E[z^2]).

#include "powerdiag/diagnostics.hpp"
#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"
#include "powerdiag/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace powerdiag {

struct ScalingProblem {
    double ex2 = 0.0;  ///< E[x^2]
    double ez2 = 0.0;  ///< E[z^2]
    double exz = 0.0;  ///< E[x z]

    /// Candidate moments from stats whose `v` column holds the candidate z.
    [[nodiscard]] static ScalingProblem from_stats(const MomentStats& s) noexcept {
        return {s.ex2, s.ev2, s.exv};
    }

    [[nodiscard]] bool cauchy_schwarz_holds() const noexcept {
        return exz * exz <= ex2 * ez2 * (1.0 + 1e-12);
    }
};

struct ScalingCertificate {
    double t_star = 0.0;
    double mse_at_star = 0.0;
    double orthogonality_residual = 0.0;  ///< E[v(t*) e(t*)]
    double power_at_star = 0.0;           ///< t*^2 E[z^2]
    double conservation_margin = 0.0;     ///< E[x^2] - power_at_star
    bool collinear = false;
};

[[nodiscard]] inline double mse_of_t(const ScalingProblem& p, double t) noexcept {
    return t * t * p.ez2 - 2.0 * t * p.exz + p.ex2;
}

/// d MSE / dt
[[nodiscard]] inline double mse_gradient(const ScalingProblem& p, double t) noexcept {
    return 2.0 * p.ez2 * t - 2.0 * p.exz;
}

namespace detail {
inline void require_candidate_power(const ScalingProblem& p) {
    if (!(p.ez2 > 0.0)) throw Error(ErrorKind::ZeroCandidatePower, "candidate power E[z^2] is zero");
    if (p.ex2 < 0.0) throw Error(ErrorKind::InvalidArgument, "E[x^2] must be non-negative");
}
}  // namespace detail

[[nodiscard]] inline double optimal_scale(const ScalingProblem& p) {
    detail::require_candidate_power(p);
    return p.exz / p.ez2;
}

/// |t| at which the scaled candidate has exactly the signal's power.
[[nodiscard]] inline double balance_scale(const ScalingProblem& p) {
    detail::require_candidate_power(p);
    return std::sqrt(p.ex2 / p.ez2);
}

inline constexpr double kCollinearTol = 1e-9;

[[nodiscard]] inline ScalingCertificate certify_optimum(const ScalingProblem& p) {
    ScalingCertificate c;
    c.t_star = optimal_scale(p);
    c.mse_at_star = mse_of_t(p, c.t_star);
    c.orthogonality_residual = c.t_star * (c.t_star * p.ez2 - p.exz);
    c.power_at_star = c.t_star * c.t_star * p.ez2;
    c.conservation_margin = p.ex2 - c.power_at_star;
    c.collinear = std::fabs(c.conservation_margin) <= kCollinearTol * p.ex2;
    return c;
}

[[nodiscard]] inline nlohmann::ordered_json to_json(const ScalingCertificate& c) {
    nlohmann::ordered_json j;
    j["t_star"] = c.t_star;
    j["mse_at_star"] = c.mse_at_star;
    j["orthogonality_residual"] = c.orthogonality_residual;
    j["power_at_star"] = c.power_at_star;
    j["conservation_margin"] = c.conservation_margin;
    j["collinear"] = c.collinear;
    return j;
}

// ---------------------------------------------------------------------------
// Controllers

enum class ControllerKind { Gradient, Momentum, Projected };

[[nodiscard]] constexpr std::string_view to_string(ControllerKind k) noexcept {
    switch (k) {
        case ControllerKind::Gradient: return "gradient";
        case ControllerKind::Momentum: return "momentum";
        case ControllerKind::Projected: return "projected";
    }
    return "unknown";
}

struct ControllerConfig {
    ControllerKind kind = ControllerKind::Gradient;
    double eta = 0.1;       ///< step size
    double beta = 0.9;      ///< momentum coefficient (momentum kind only)
    double t0 = 0.0;        ///< start at the zero estimate
    double conv_tol = 1e-6;
    std::size_t max_steps = 1000;
    double balance_tol = kDefaultBalanceTol;
};

/// Keys: kind, eta, beta, t0, conv_tol, max_steps, balance_tol.
[[nodiscard]] inline ControllerConfig controller_from_map(
    const std::map<std::string, std::string>& kv, ControllerConfig cfg = {}) {
    for (const auto& [key, value] : kv) {
        if (key == "kind") {
            if (value == "gradient") cfg.kind = ControllerKind::Gradient;
            else if (value == "momentum") cfg.kind = ControllerKind::Momentum;
            else if (value == "projected") cfg.kind = ControllerKind::Projected;
            else throw Error(ErrorKind::InvalidSpec, "unknown controller kind '" + value + "'");
        } else if (key == "eta") {
            cfg.eta = text::require_real(key, value);
        } else if (key == "beta") {
            cfg.beta = text::require_real(key, value);
        } else if (key == "t0") {
            cfg.t0 = text::require_real(key, value);
        } else if (key == "conv_tol") {
            cfg.conv_tol = text::require_real(key, value);
        } else if (key == "max_steps") {
            cfg.max_steps = text::require_count(key, value);
        } else if (key == "balance_tol") {
            cfg.balance_tol = text::require_real(key, value);
        } else {
            throw Error(ErrorKind::InvalidSpec, "unknown controller key '" + key + "'");
        }
    }
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) {
        throw Error(ErrorKind::InvalidSpec, "eta must be positive");
    }
    if (!(cfg.conv_tol >= 0.0)) throw Error(ErrorKind::InvalidSpec, "conv_tol must be >= 0");
    if (!std::isfinite(cfg.t0) || !std::isfinite(cfg.beta)) {
        throw Error(ErrorKind::InvalidSpec, "t0 and beta must be finite");
    }
    return cfg;
}

[[nodiscard]] inline ControllerConfig parse_controller_config(std::string_view src) {
    return controller_from_map(text::parse_key_values(src));
}

struct PathIterate {
    std::size_t k = 0;
    double t = 0.0;
    double mse = 0.0;
    RegimeLabel regime = RegimeLabel::PowerConservative;
};

struct ScalingTrace {
    std::vector<PathIterate> iterates;
    double t_star = 0.0;
    double t_balance = 0.0;
    /// First k within conv_tol of t*; equals max_steps when never reached.
    std::size_t steps_to_converge = 0;
    bool converged = false;
    /// Furthest excursion past t* in the direction of travel from t0.
    double max_overshoot = 0.0;
    std::size_t forbidden_steps = 0;
};

[[nodiscard]] inline ScalingTrace run_path(const ScalingProblem& p, const ControllerConfig& cfg) {
    ScalingTrace tr;
    tr.t_star = optimal_scale(p);
    tr.t_balance = balance_scale(p);
    const double conv_band = cfg.conv_tol * std::max(1.0, std::fabs(tr.t_star));
    const double direction = tr.t_star >= cfg.t0 ? 1.0 : -1.0;

    auto record = [&](std::size_t k, double t) {
        PathIterate it{k, t, mse_of_t(p, t), classify_power(p.ex2, t * t * p.ez2, cfg.balance_tol)};
        if (it.regime == RegimeLabel::PowerDominant) ++tr.forbidden_steps;
        tr.max_overshoot = std::max(tr.max_overshoot, direction * (t - tr.t_star));
        tr.iterates.push_back(it);
        if (!tr.converged && std::fabs(t - tr.t_star) <= conv_band) {
            tr.converged = true;
            tr.steps_to_converge = k;
        }
    };

    double t = cfg.t0;
    double t_prev = cfg.t0;
    record(0, t);
    for (std::size_t k = 1; k <= cfg.max_steps && !tr.converged; ++k) {
        double next = 0.0;
        switch (cfg.kind) {
            case ControllerKind::Gradient:
                next = t - cfg.eta * mse_gradient(p, t);
                break;
            case ControllerKind::Momentum: {
                const double look = t + cfg.beta * (t - t_prev);
                next = look - cfg.eta * mse_gradient(p, look);
                break;
            }
            case ControllerKind::Projected:
                next = std::clamp(t - cfg.eta * mse_gradient(p, t), -tr.t_balance, tr.t_balance);
                break;
        }
        t_prev = t;
        t = next;
        record(k, t);
    }
    if (!tr.converged) tr.steps_to_converge = cfg.max_steps;
    return tr;
}

[[nodiscard]] inline std::string trace_to_csv(const ScalingTrace& tr) {
    std::string out = "k,t,mse,regime\n";
    for (const auto& it : tr.iterates) {
        out += std::to_string(it.k) + ',' + text::format_real(it.t) + ',' +
               text::format_real(it.mse) + ',' + std::string(to_string(it.regime)) + '\n';
    }
    return out;
}

[[nodiscard]] inline nlohmann::ordered_json trace_summary_json(const ScalingTrace& tr) {
    nlohmann::ordered_json j;
    j["t_star"] = tr.t_star;
    j["t_balance"] = tr.t_balance;
    j["steps_to_converge"] = tr.steps_to_converge;
    j["converged"] = tr.converged;
    j["max_overshoot"] = tr.max_overshoot;
    j["forbidden_steps"] = tr.forbidden_steps;
    j["final_t"] = tr.iterates.empty() ? 0.0 : tr.iterates.back().t;
    return j;
}

// ---------------------------------------------------------------------------
// Tracking a moving optimum with exponentially forgotten moments.

struct TrackRecord {
    std::size_t k = 0;
    double t_star = 0.0;  ///< ground-truth optimum at step k
    double t = 0.0;       ///< tracked scale m_xz / m_zz
    double tracking_error = 0.0;
    RegimeLabel regime = RegimeLabel::PowerConservative;  ///< of t z against step-k truth
};

struct TrackTrace {
    std::vector<TrackRecord> records;
    double forgetting = 1.0;
    std::size_t forbidden_steps = 0;
};

/// `stream[k]` carries (x_k, z_k); `truth[k]` the population moments in
/// force at step k. With forgetting < 1 the moments follow
///     m(k) = forgetting * m(k-1) + (1 - forgetting) * sample_k,  m(-1) = 0;
/// forgetting == 1 keeps the cumulative mean instead.
[[nodiscard]] inline TrackTrace track_moving_optimum(std::span<const PairedSample> stream,
                                                     std::span<const ScalingProblem> truth,
                                                     double forgetting,
                                                     double balance_tol = kDefaultBalanceTol) {
    if (!(forgetting > 0.0 && forgetting <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "forgetting factor must lie in (0, 1]");
    }
    if (truth.size() != stream.size()) {
        throw Error(ErrorKind::InvalidArgument, "truth schedule length must match stream length");
    }
    TrackTrace tr;
    tr.forgetting = forgetting;
    tr.records.reserve(stream.size());
    double m_xz = 0.0;
    double m_zz = 0.0;
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const auto& s = stream[k];
        if (!std::isfinite(s.x) || !std::isfinite(s.v)) {
            throw Error(ErrorKind::NonFiniteSample, "non-finite pair at index " + std::to_string(k), k);
        }
        const double w = forgetting < 1.0 ? 1.0 - forgetting : 1.0 / static_cast<double>(k + 1);
        m_xz += w * (s.x * s.v - m_xz);
        m_zz += w * (s.v * s.v - m_zz);
        if (!(m_zz > 0.0)) {
            throw Error(ErrorKind::DegenerateWindow,
                        "forgotten candidate power is zero at step " + std::to_string(k), k);
        }
        TrackRecord r;
        r.k = k;
        r.t_star = optimal_scale(truth[k]);
        r.t = m_xz / m_zz;
        r.tracking_error = std::fabs(r.t - r.t_star);
        r.regime = classify_power(truth[k].ex2, r.t * r.t * truth[k].ez2, balance_tol);
        if (r.regime == RegimeLabel::PowerDominant) ++tr.forbidden_steps;
        tr.records.push_back(r);
    }
    return tr;
}

/// Steps after `from` until the tracked scale first sits within
/// `rel_band * |t*|` of the truth; nullopt if it never does.
[[nodiscard]] inline std::optional<std::size_t> steps_to_band(const TrackTrace& tr,
                                                              std::size_t from, double rel_band) {
    for (std::size_t k = from; k < tr.records.size(); ++k) {
        const auto& r = tr.records[k];
        if (r.tracking_error <= rel_band * std::fabs(r.t_star)) return k - from;
    }
    return std::nullopt;
}

[[nodiscard]] inline std::string track_to_csv(const TrackTrace& tr) {
    std::string out = "k,t_star,t,tracking_error,regime\n";
    for (const auto& r : tr.records) {
        out += std::to_string(r.k) + ',' + text::format_real(r.t_star) + ',' +
               text::format_real(r.t) + ',' + text::format_real(r.tracking_error) + ',' +
               std::string(to_string(r.regime)) + '\n';
    }
    return out;
}

}  // namespace powerdiag
