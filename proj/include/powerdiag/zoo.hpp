#pragma once

// Seeded synthetic problems and estimator families with known population
// moments, used as ground truth for the diagnostics.
//
// Samples are generated in chunks of kChunkSize; chunk c of the main stream
// draws from Xoshiro256(substream_seed(seed, c)). Calibration and pilot
// streams use the same scheme with the index offset by kCalibrationStream or
// kPilotStream, so they never overlap the main stream. Within a sample the
// signal is drawn before the noise.

#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"
#include "powerdiag/rng.hpp"
#include "powerdiag/scaling.hpp"
#include "powerdiag/text.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace powerdiag::zoo {

inline constexpr std::size_t kChunkSize = 4096;
inline constexpr std::uint64_t kCalibrationStream = 1ULL << 48;
inline constexpr std::uint64_t kPilotStream = 2ULL << 48;

enum class ProblemKind {
    GaussianShrinkage,
    DeterministicParameter,
    HeavyTail,
    StepChange,
    DriftingPower,
};

inline constexpr std::array kProblemKinds{
    ProblemKind::GaussianShrinkage, ProblemKind::DeterministicParameter, ProblemKind::HeavyTail,
    ProblemKind::StepChange, ProblemKind::DriftingPower};

[[nodiscard]] constexpr std::string_view to_string(ProblemKind k) noexcept {
    switch (k) {
        case ProblemKind::GaussianShrinkage: return "gaussian_shrinkage";
        case ProblemKind::DeterministicParameter: return "deterministic_parameter";
        case ProblemKind::HeavyTail: return "heavy_tail";
        case ProblemKind::StepChange: return "step_change";
        case ProblemKind::DriftingPower: return "drifting_power";
    }
    return "unknown";
}

[[nodiscard]] constexpr std::string_view describe(ProblemKind k) noexcept {
    switch (k) {
        case ProblemKind::GaussianShrinkage:
            return "x ~ N(0, signal_power), z = x + N(0, noise_power)";
        case ProblemKind::DeterministicParameter:
            return "x = sqrt(signal_power) fixed, z = x + N(0, noise_power)";
        case ProblemKind::HeavyTail:
            return "x ~ Laplace with variance signal_power, z = x + N(0, noise_power)";
        case ProblemKind::StepChange:
            return "gaussian_shrinkage whose signal power jumps to power_after at change_at";
        case ProblemKind::DriftingPower:
            return "gaussian_shrinkage with signal power "
                   "signal_power * (1 + drift_amplitude * sin(2 pi k / drift_period))";
    }
    return "";
}

struct ProblemSpec {
    ProblemKind kind = ProblemKind::GaussianShrinkage;
    double signal_power = 1.0;
    double noise_power = 1.0;
    std::size_t change_at = 1000;  ///< step_change only
    double power_after = 4.0;      ///< step_change only
    double drift_amplitude = 0.5;  ///< drifting_power only, in [0, 1)
    double drift_period = 2000.0;  ///< drifting_power only
    std::uint64_t seed = 42;
};

[[nodiscard]] inline bool is_time_varying(ProblemKind k) noexcept {
    return k == ProblemKind::StepChange || k == ProblemKind::DriftingPower;
}

inline void validate(const ProblemSpec& p) {
    if (!(p.signal_power > 0.0) || !std::isfinite(p.signal_power)) {
        throw Error(ErrorKind::InvalidSpec, "signal_power must be positive");
    }
    if (!(p.noise_power >= 0.0) || !std::isfinite(p.noise_power)) {
        throw Error(ErrorKind::InvalidSpec, "noise_power must be non-negative");
    }
    if (p.kind == ProblemKind::StepChange && (!(p.power_after > 0.0) || !std::isfinite(p.power_after))) {
        throw Error(ErrorKind::InvalidSpec, "power_after must be positive");
    }
    if (p.kind == ProblemKind::DriftingPower &&
        (!(p.drift_amplitude >= 0.0 && p.drift_amplitude < 1.0) || !(p.drift_period > 0.0))) {
        throw Error(ErrorKind::InvalidSpec, "drift_amplitude must be in [0,1) and drift_period > 0");
    }
}

/// Signal power in force at stream index k.
[[nodiscard]] inline double signal_power_at(const ProblemSpec& p, std::size_t k) noexcept {
    switch (p.kind) {
        case ProblemKind::StepChange:
            return k < p.change_at ? p.signal_power : p.power_after;
        case ProblemKind::DriftingPower:
            return p.signal_power *
                   (1.0 + p.drift_amplitude *
                              std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / p.drift_period));
        default:
            return p.signal_power;
    }
}

/// Population moments (E[x^2], E[z^2], E[xz]) at stream index k.
[[nodiscard]] inline ScalingProblem population_moments(const ProblemSpec& p, std::size_t k) {
    validate(p);
    const double sx = signal_power_at(p, k);
    return {sx, sx + p.noise_power, sx};
}

[[nodiscard]] inline std::vector<ScalingProblem> truth_schedule(const ProblemSpec& p, std::size_t n) {
    std::vector<ScalingProblem> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(population_moments(p, k));
    return out;
}

/// Optimal scale of the raw candidate under population moments. Throws
/// NoClosedForm for time-varying kinds; use true_optimum_at for those.
[[nodiscard]] inline double true_optimum(const ProblemSpec& p) {
    validate(p);
    if (is_time_varying(p.kind)) {
        throw Error(ErrorKind::NoClosedForm,
                    std::string(to_string(p.kind)) + " has a per-step optimum; use true_optimum_at");
    }
    return p.signal_power / (p.signal_power + p.noise_power);
}

[[nodiscard]] inline double true_optimum_at(const ProblemSpec& p, std::size_t k) {
    return optimal_scale(population_moments(p, k));
}

namespace detail {

inline std::vector<PairedSample> generate_stream(const ProblemSpec& p, std::size_t n,
                                                 std::uint64_t stream_base) {
    validate(p);
    if (n == 0) throw Error(ErrorKind::InvalidSpec, "sample count must be >= 1");
    std::vector<PairedSample> out(n);
    const double noise_sd = std::sqrt(p.noise_power);
    for (std::size_t chunk = 0; chunk * kChunkSize < n; ++chunk) {
        Xoshiro256 rng(substream_seed(p.seed, stream_base + chunk));
        const std::size_t end = std::min(n, (chunk + 1) * kChunkSize);
        for (std::size_t k = chunk * kChunkSize; k < end; ++k) {
            double x = 0.0;
            switch (p.kind) {
                case ProblemKind::DeterministicParameter:
                    x = std::sqrt(p.signal_power);
                    break;
                case ProblemKind::HeavyTail:
                    x = std::sqrt(p.signal_power) * rng.laplace();
                    break;
                default:
                    x = std::sqrt(signal_power_at(p, k)) * rng.gaussian();
                    break;
            }
            const double noise = noise_sd > 0.0 ? noise_sd * rng.gaussian() : 0.0;
            out[k] = {x, x + noise};
        }
    }
    return out;
}

}  // namespace detail

/// n pairs (x, z) with z the raw candidate. Deterministic in (spec, n).
[[nodiscard]] inline std::vector<PairedSample> generate(const ProblemSpec& p, std::size_t n) {
    return detail::generate_stream(p, n, 0);
}

/// Held-out draws from an independent substream, for fitting estimators.
[[nodiscard]] inline std::vector<PairedSample> generate_calibration(const ProblemSpec& p,
                                                                     std::size_t n) {
    return detail::generate_stream(p, n, kCalibrationStream);
}

// ---------------------------------------------------------------------------
// Estimators

enum class EstimatorKind { Zero, Identity, Scale, EmpiricalMmse, Amplifier };

inline constexpr std::array kEstimatorKinds{EstimatorKind::Zero, EstimatorKind::Identity,
                                            EstimatorKind::Scale, EstimatorKind::EmpiricalMmse,
                                            EstimatorKind::Amplifier};

[[nodiscard]] constexpr std::string_view to_string(EstimatorKind k) noexcept {
    switch (k) {
        case EstimatorKind::Zero: return "zero";
        case EstimatorKind::Identity: return "identity";
        case EstimatorKind::Scale: return "scale";
        case EstimatorKind::EmpiricalMmse: return "empirical_mmse";
        case EstimatorKind::Amplifier: return "amplifier";
    }
    return "unknown";
}

[[nodiscard]] constexpr std::string_view describe(EstimatorKind k) noexcept {
    switch (k) {
        case EstimatorKind::Zero: return "v = 0";
        case EstimatorKind::Identity: return "v = z";
        case EstimatorKind::Scale: return "v = c z";
        case EstimatorKind::EmpiricalMmse: return "v = c z, c = E[xz]/E[z^2] fitted on a calibration split";
        case EstimatorKind::Amplifier: return "v = c z with c > 1 and E[v^2] > E[x^2] on a pilot sample";
    }
    return "";
}

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::Identity;
    double c = 1.0;  ///< scale and amplifier only

    [[nodiscard]] std::string label() const {
        switch (kind) {
            case EstimatorKind::Scale:
            case EstimatorKind::Amplifier:
                return std::string(to_string(kind)) + "(" + text::format_real(c) + ")";
            default:
                return std::string(to_string(kind));
        }
    }
};

inline constexpr std::size_t kPilotSamples = 4096;

/// Amplifier whose gain is checked against a pilot draw of `problem`: the
/// amplified candidate must out-power the signal there.
[[nodiscard]] inline EstimatorSpec make_amplifier(double c, const ProblemSpec& problem) {
    if (!(c > 1.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidSpec, "amplifier gain must exceed 1");
    const auto pilot = detail::generate_stream(problem, kPilotSamples, kPilotStream);
    const auto st = finalize(summarize(pilot));
    if (!(c * c * st.ev2 > st.ex2)) {
        throw Error(ErrorKind::InvalidSpec, "amplifier gain does not exceed signal power on pilot sample");
    }
    return {EstimatorKind::Amplifier, c};
}

/// c = E[xz] / E[z^2] over `calibration`.
[[nodiscard]] inline double fit_mmse_scale(std::span<const PairedSample> calibration) {
    if (calibration.empty()) {
        throw Error(ErrorKind::InvalidSpec, "empirical_mmse needs a non-empty calibration split");
    }
    return optimal_scale(ScalingProblem::from_stats(finalize(summarize(calibration))));
}

/// Maps each candidate z to the estimate v; x is carried through.
[[nodiscard]] inline std::vector<PairedSample> apply(const EstimatorSpec& est,
                                                     std::span<const PairedSample> samples,
                                                     std::span<const PairedSample> calibration = {}) {
    double gain = 1.0;
    switch (est.kind) {
        case EstimatorKind::Zero: gain = 0.0; break;
        case EstimatorKind::Identity: gain = 1.0; break;
        case EstimatorKind::Scale: gain = est.c; break;
        case EstimatorKind::Amplifier:
            if (!(est.c > 1.0)) throw Error(ErrorKind::InvalidSpec, "amplifier gain must exceed 1");
            gain = est.c;
            break;
        case EstimatorKind::EmpiricalMmse: gain = fit_mmse_scale(calibration); break;
    }
    if (!std::isfinite(gain)) throw Error(ErrorKind::InvalidSpec, "estimator gain must be finite");
    std::vector<PairedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.x, gain * s.v});
    return out;
}

// ---------------------------------------------------------------------------
// Text forms: "kind" or "kind:key=value,key=value" for problems, "kind" or
// "kind:c" / "kind:c=value" for estimators.

[[nodiscard]] inline ProblemKind parse_problem_kind(std::string_view s) {
    for (auto k : kProblemKinds) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorKind::InvalidSpec, "unknown problem kind '" + std::string(s) + "'");
}

[[nodiscard]] inline EstimatorKind parse_estimator_kind(std::string_view s) {
    for (auto k : kEstimatorKinds) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorKind::InvalidSpec, "unknown estimator kind '" + std::string(s) + "'");
}

inline void set_problem_key(ProblemSpec& p, std::string_view key, std::string_view value) {
    if (key == "signal_power") p.signal_power = text::require_real(key, value);
    else if (key == "noise_power") p.noise_power = text::require_real(key, value);
    else if (key == "change_at") p.change_at = text::require_count(key, value);
    else if (key == "power_after") p.power_after = text::require_real(key, value);
    else if (key == "drift_amplitude") p.drift_amplitude = text::require_real(key, value);
    else if (key == "drift_period") p.drift_period = text::require_real(key, value);
    else if (key == "seed") p.seed = text::require_count(key, value);
    else throw Error(ErrorKind::InvalidSpec, "unknown problem key '" + std::string(key) + "'");
}

[[nodiscard]] inline ProblemSpec parse_problem(std::string_view s, ProblemSpec base = {}) {
    s = text::trim(s);
    const auto colon = s.find(':');
    base.kind = parse_problem_kind(text::trim(s.substr(0, colon)));
    if (colon != std::string_view::npos) {
        for (auto item : text::split(s.substr(colon + 1), ',')) {
            item = text::trim(item);
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) {
                throw Error(ErrorKind::InvalidSpec, "expected key=value in '" + std::string(item) + "'");
            }
            set_problem_key(base, text::trim(item.substr(0, eq)), text::trim(item.substr(eq + 1)));
        }
    }
    validate(base);
    return base;
}

[[nodiscard]] inline EstimatorSpec parse_estimator(std::string_view s) {
    s = text::trim(s);
    const auto colon = s.find(':');
    EstimatorSpec e;
    e.kind = parse_estimator_kind(text::trim(s.substr(0, colon)));
    const bool needs_gain = e.kind == EstimatorKind::Scale || e.kind == EstimatorKind::Amplifier;
    if (colon == std::string_view::npos) {
        if (needs_gain) {
            throw Error(ErrorKind::InvalidSpec, std::string(to_string(e.kind)) + " requires a gain, e.g. '" +
                                                    std::string(to_string(e.kind)) + ":2'");
        }
        return e;
    }
    if (!needs_gain) {
        throw Error(ErrorKind::InvalidSpec, std::string(to_string(e.kind)) + " takes no parameters");
    }
    auto arg = text::trim(s.substr(colon + 1));
    if (arg.starts_with("c=")) arg = text::trim(arg.substr(2));
    e.c = text::require_real("c", arg);
    if (e.kind == EstimatorKind::Amplifier && !(e.c > 1.0)) {
        throw Error(ErrorKind::InvalidSpec, "amplifier gain must exceed 1");
    }
    return e;
}

[[nodiscard]] inline std::string format_problem(const ProblemSpec& p) {
    std::string out = std::string(to_string(p.kind)) + ":signal_power=" + text::format_real(p.signal_power) +
                      ",noise_power=" + text::format_real(p.noise_power);
    if (p.kind == ProblemKind::StepChange) {
        out += ",change_at=" + std::to_string(p.change_at) + ",power_after=" + text::format_real(p.power_after);
    } else if (p.kind == ProblemKind::DriftingPower) {
        out += ",drift_amplitude=" + text::format_real(p.drift_amplitude) +
               ",drift_period=" + text::format_real(p.drift_period);
    }
    out += ",seed=" + std::to_string(p.seed);
    return out;
}

}  // namespace powerdiag::zoo
