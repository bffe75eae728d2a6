#include "commands.hpp"

#include "powerdiag.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace powerdiag::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Everything a command may read. Precedence: defaults < flags < --config.
struct RunConfig {
    std::vector<std::string> inputs;
    std::string problem;  ///< empty: the command's default kind
    std::map<std::string, std::string> problem_overrides;
    std::vector<std::string> estimators;
    std::string controller;
    std::map<std::string, std::string> controller_overrides;
    std::string moments;
    std::size_t samples = 10000;
    std::uint64_t seed = 42;
    double balance_tol = kDefaultBalanceTol;
    double degeneracy_tol = kDefaultDegeneracyTol;
    std::string format;
    std::string out;
    double forgetting = 0.99;
};

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    for (auto part : text::split(s, sep)) {
        part = text::trim(part);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    const auto kv = text::parse_key_values(text::read_file(path));
    for (const auto& [key, value] : kv) {
        if (key == "input") cfg.inputs = split_list(value, ';');
        else if (key == "problem") cfg.problem = value;
        else if (key.starts_with("problem.")) cfg.problem_overrides[key.substr(8)] = value;
        else if (key == "estimator") cfg.estimators = split_list(value, ';');
        else if (key == "controller") cfg.controller = value;
        else if (key.starts_with("controller.")) cfg.controller_overrides[key.substr(11)] = value;
        else if (key == "moments") cfg.moments = value;
        else if (key == "samples") cfg.samples = text::require_count(key, value);
        else if (key == "seed") cfg.seed = text::require_count(key, value);
        else if (key == "balance_tol") cfg.balance_tol = text::require_real(key, value);
        else if (key == "degeneracy_tol") cfg.degeneracy_tol = text::require_real(key, value);
        else if (key == "format") cfg.format = value;
        else if (key == "out") cfg.out = value;
        else if (key == "lambda") cfg.forgetting = text::require_real(key, value);
        else throw Error(ErrorKind::ParseError, path + ": unknown key '" + key + "'");
    }
}

zoo::ProblemSpec problem_of(const RunConfig& cfg,
                            std::string_view fallback_kind = "gaussian_shrinkage") {
    zoo::ProblemSpec base;
    base.seed = cfg.seed;
    std::string src = cfg.problem;
    if (src.empty()) src = std::string(fallback_kind);
    auto spec = zoo::parse_problem(src, base);
    for (const auto& [k, v] : cfg.problem_overrides) zoo::set_problem_key(spec, k, v);
    zoo::validate(spec);
    return spec;
}

std::vector<PairedSample> read_pairs(const std::string& path) {
    return parse_pairs_csv(text::read_file(path));
}

/// Estimated pairs for the first configured estimator on the configured problem.
std::vector<PairedSample> zoo_estimates(const RunConfig& cfg, const zoo::ProblemSpec& problem,
                                        const std::string& estimator) {
    auto est = zoo::parse_estimator(estimator);
    if (est.kind == zoo::EstimatorKind::Amplifier) est = zoo::make_amplifier(est.c, problem);
    const auto samples = zoo::generate(problem, cfg.samples);
    std::vector<PairedSample> calibration;
    if (est.kind == zoo::EstimatorKind::EmpiricalMmse) {
        calibration = zoo::generate_calibration(problem, cfg.samples);
    }
    return zoo::apply(est, samples, calibration);
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& body) {
    if (cfg.out.empty()) {
        out << body;
    } else {
        text::write_file_atomic(cfg.out, body);
    }
}

void check_format(const RunConfig& cfg, std::initializer_list<std::string_view> allowed) {
    if (cfg.format.empty()) return;
    if (std::find(allowed.begin(), allowed.end(), cfg.format) == allowed.end()) {
        throw Error(ErrorKind::InvalidArgument, "unsupported --format '" + cfg.format + "' for this command");
    }
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"json"});
    std::vector<PairedSample> pairs;
    if (!cfg.inputs.empty()) {
        pairs = read_pairs(cfg.inputs.front());
    } else {
        const auto problem = problem_of(cfg);
        pairs = zoo_estimates(cfg, problem, cfg.estimators.empty() ? "identity" : cfg.estimators.front());
    }
    if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no samples to diagnose");
    const auto report = triad_report(finalize(summarize(pairs)), cfg.balance_tol, cfg.degeneracy_tol);
    emit(cfg, out, to_json(report).dump(2) + '\n');
    if (report.regime != RegimeLabel::PowerDominant) return kExitOk;
    return report.verdict.satisfied && !report.verdict.degenerate ? kExitForbidden : kExitForbiddenDegenerate;
}

ScalingProblem scaling_problem_of(const RunConfig& cfg) {
    if (!cfg.moments.empty()) {
        const auto parts = split_list(cfg.moments, ',');
        if (parts.size() != 3) throw Error(ErrorKind::ParseError, "--moments expects EX2,EZ2,EXZ");
        ScalingProblem p{text::require_real("ex2", parts[0]), text::require_real("ez2", parts[1]),
                         text::require_real("exz", parts[2])};
        if (p.ex2 < 0.0 || p.ez2 < 0.0) throw Error(ErrorKind::InvalidArgument, "powers must be non-negative");
        return p;
    }
    if (!cfg.inputs.empty()) {
        const auto pairs = read_pairs(cfg.inputs.front());
        if (pairs.empty()) throw Error(ErrorKind::EmptyInput, "no samples");
        return ScalingProblem::from_stats(finalize(summarize(pairs)));
    }
    const auto problem = problem_of(cfg);
    return ScalingProblem::from_stats(finalize(summarize(zoo::generate(problem, cfg.samples))));
}

int cmd_scale(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"json"});
    const auto cert = certify_optimum(scaling_problem_of(cfg));
    emit(cfg, out, to_json(cert).dump(2) + '\n');
    return kExitOk;
}

ControllerConfig controller_of(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    if (!cfg.controller.empty()) {
        if (fs::exists(cfg.controller)) {
            kv = text::parse_key_values(text::read_file(cfg.controller));
        } else {
            for (const auto& item : split_list(cfg.controller, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) {
                    throw Error(ErrorKind::ParseError, "--controller: '" + cfg.controller +
                                                           "' is neither a file nor key=value pairs");
                }
                kv[std::string(text::trim(item.substr(0, eq)))] = std::string(text::trim(item.substr(eq + 1)));
            }
        }
    }
    for (const auto& [k, v] : cfg.controller_overrides) kv[k] = v;
    if (!kv.contains("balance_tol")) kv["balance_tol"] = text::format_real(cfg.balance_tol);
    return controller_from_map(kv);
}

int cmd_path(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"csv", "json"});
    const auto trace = run_path(scaling_problem_of(cfg), controller_of(cfg));
    const auto summary = trace_summary_json(trace).dump(2) + '\n';
    if (!cfg.out.empty()) {
        text::write_file_atomic(cfg.out, trace_to_csv(trace));
        out << summary;
    } else {
        out << (cfg.format == "csv" ? trace_to_csv(trace) : summary);
    }
    return kExitOk;
}

int cmd_track(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"csv", "json"});
    const auto problem = problem_of(cfg, "step_change");
    const auto stream = zoo::generate(problem, cfg.samples);
    const auto truth = zoo::truth_schedule(problem, cfg.samples);
    const auto trace = track_moving_optimum(stream, truth, cfg.forgetting, cfg.balance_tol);

    ordered_json summary;
    summary["problem"] = zoo::format_problem(problem);
    summary["lambda"] = cfg.forgetting;
    summary["steps"] = trace.records.size();
    summary["forbidden_steps"] = trace.forbidden_steps;
    summary["final_t"] = trace.records.back().t;
    summary["final_t_star"] = trace.records.back().t_star;
    summary["final_tracking_error"] = trace.records.back().tracking_error;
    if (problem.kind == zoo::ProblemKind::StepChange && problem.change_at < trace.records.size()) {
        const auto reentry = steps_to_band(trace, problem.change_at, 0.05);
        summary["steps_to_5pct_band_after_change"] =
            reentry ? ordered_json(*reentry) : ordered_json(nullptr);
    }
    const auto summary_text = summary.dump(2) + '\n';
    if (!cfg.out.empty()) {
        text::write_file_atomic(cfg.out, track_to_csv(trace));
        out << summary_text;
    } else {
        out << (cfg.format == "csv" ? track_to_csv(trace) : summary_text);
    }
    return kExitOk;
}

const std::vector<std::string> kDefaultMapEstimators{"zero", "scale:0.5", "identity", "empirical_mmse",
                                                     "amplifier:1.5", "amplifier:2"};

int cmd_map(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"csv", "json", "svg"});
    std::vector<map::MapPoint> points;
    if (!cfg.inputs.empty()) {
        for (const auto& path : cfg.inputs) {
            const auto pairs = read_pairs(path);
            if (pairs.empty()) throw Error(ErrorKind::EmptyInput, path + ": no samples");
            points.push_back(map::map_point(fs::path(path).stem().string(), finalize(summarize(pairs)),
                                            cfg.balance_tol, cfg.degeneracy_tol));
        }
    } else {
        const auto problem = problem_of(cfg);
        const auto& estimators = cfg.estimators.empty() ? kDefaultMapEstimators : cfg.estimators;
        for (const auto& e : estimators) {
            const auto stats = finalize(summarize(zoo_estimates(cfg, problem, e)));
            points.push_back(map::map_point(zoo::parse_estimator(e).label(), stats, cfg.balance_tol,
                                            cfg.degeneracy_tol));
        }
        const auto candidate = zoo::generate(problem, cfg.samples);
        points.push_back(map::map_point_certified(
            "certified_optimum", ScalingProblem::from_stats(finalize(summarize(candidate))), cfg.balance_tol));
    }

    const std::string stem = cfg.out.empty() ? "safezone" : cfg.out;
    const bool want_csv = cfg.format.empty() || cfg.format == "csv";
    const bool want_json = cfg.format.empty() || cfg.format == "csv" || cfg.format == "json";
    const bool want_svg = cfg.format.empty() || cfg.format == "svg";
    for (const auto& dataset : {map::build_left_map(points, cfg.balance_tol),
                                map::build_right_map(points, cfg.balance_tol)}) {
        const std::string base = stem + "_" + std::string(map::to_string(dataset.kind));
        const auto emitted = map::emit_dataset(dataset);
        if (want_csv) {
            text::write_file_atomic(base + ".csv", emitted.csv);
            out << base << ".csv\n";
        }
        if (want_json) {
            text::write_file_atomic(base + ".json", emitted.json);
            out << base << ".json\n";
        }
        if (want_svg) {
            text::write_file_atomic(base + ".svg", map::render_svg(dataset));
            out << base << ".svg\n";
        }
    }
    return kExitOk;
}

int cmd_zoo_list(std::ostream& out) {
    out << "problems:\n";
    for (auto k : zoo::kProblemKinds) out << "  " << zoo::to_string(k) << "  " << zoo::describe(k) << '\n';
    out << "estimators:\n";
    for (auto k : zoo::kEstimatorKinds) out << "  " << zoo::to_string(k) << "  " << zoo::describe(k) << '\n';
    return kExitOk;
}

int cmd_zoo_run(const RunConfig& cfg, std::ostream& out) {
    check_format(cfg, {"csv"});
    const auto problem = problem_of(cfg);
    std::vector<PairedSample> pairs;
    if (cfg.estimators.empty()) {
        pairs = zoo::generate(problem, cfg.samples);
    } else {
        pairs = zoo_estimates(cfg, problem, cfg.estimators.front());
    }
    emit(cfg, out, write_pairs_csv(pairs));
    return kExitOk;
}

void add_common(CLI::App* sub, RunConfig& cfg, std::string& config_path) {
    sub->add_option("--config", config_path, "flat key = value file; its keys override flags");
    sub->add_option("--problem", cfg.problem, "zoo problem, e.g. gaussian_shrinkage:signal_power=1,noise_power=1");
    sub->add_option("--samples", cfg.samples, "sample count")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "64-bit seed");
    sub->add_option("--balance-tol", cfg.balance_tol, "relative width of the power-balance band")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--degeneracy-tol", cfg.degeneracy_tol, "coupling threshold treated as zero")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"csv", "json", "svg"}));
    sub->add_option("--out", cfg.out, "output path (map: file stem)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"powerdiag: power-regime diagnostics and MSE-optimal scaling"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string config_path;

    auto* diagnose = app.add_subcommand("diagnose", "bias/variance/power report for paired samples");
    add_common(diagnose, cfg, config_path);
    diagnose->add_option("--input", cfg.inputs, "CSV with header x,v");
    diagnose->add_option("--estimator", cfg.estimators, "zoo estimator, e.g. amplifier:2");

    auto* scale = app.add_subcommand("scale", "certify the optimal scaling of a candidate");
    add_common(scale, cfg, config_path);
    scale->add_option("--input", cfg.inputs, "CSV with header x,v (v = candidate)");
    scale->add_option("--moments", cfg.moments, "EX2,EZ2,EXZ");

    auto* path = app.add_subcommand("path", "run a scaling controller from t0 toward t*");
    add_common(path, cfg, config_path);
    path->add_option("--input", cfg.inputs, "CSV with header x,v (v = candidate)");
    path->add_option("--moments", cfg.moments, "EX2,EZ2,EXZ");
    path->add_option("--controller", cfg.controller, "controller file or inline kind=...,eta=...");

    auto* track = app.add_subcommand("track", "track a moving optimum with forgotten moments");
    add_common(track, cfg, config_path);
    track->add_option("--lambda", cfg.forgetting, "forgetting factor in (0, 1]");

    auto* mapcmd = app.add_subcommand("map", "emit the two safe-zone maps");
    add_common(mapcmd, cfg, config_path);
    mapcmd->add_option("--input", cfg.inputs, "CSV files with header x,v, one point each");
    mapcmd->add_option("--estimator", cfg.estimators, "zoo estimators to plot");

    auto* zoocmd = app.add_subcommand("zoo", "synthetic problem catalogue");
    zoocmd->require_subcommand(1);
    zoocmd->add_subcommand("list", "print problem and estimator kinds");
    auto* zoorun = zoocmd->add_subcommand("run", "generate a paired-sample CSV");
    add_common(zoorun, cfg, config_path);
    zoorun->add_option("--estimator", cfg.estimators, "apply a zoo estimator to the candidate");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        if (*diagnose) return cmd_diagnose(cfg, out);
        if (*scale) return cmd_scale(cfg, out);
        if (*path) return cmd_path(cfg, out);
        if (*track) return cmd_track(cfg, out);
        if (*mapcmd) return cmd_map(cfg, out);
        if (*zoocmd) {
            if (zoocmd->got_subcommand("list")) return cmd_zoo_list(out);
            return cmd_zoo_run(cfg, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::ParseError:
            case ErrorKind::IoError:
            case ErrorKind::InvalidArgument:
                return kExitUsage;
            default:
                return kExitDomainError;
        }
    }
    return kExitUsage;
}

}  // namespace powerdiag::cli
