#pragma once

// Safe-zone maps in (power ratio, normalised coupling) coordinates.
//
//   x = E[v^2] / E[x^2]        (balance line at x = 1)
//   y = E[v e] / MSE           (penalty line at y = 1/2)
//
// Normalising the coupling by each point's own MSE makes the penalty line
// the same constant for every estimator. Non-degenerate power-dominant
// points always plot above it; MSE-optimal scalings plot on y = 0 at
// x = E[xz]^2 / (E[x^2] E[z^2]) <= 1. The two lines meet at (1, 1/2).
//
// The left map shades the two regime bands; the right map adds the penalty
// line, the singularity, the ideal path from the zero estimate, and marks
// the safe rectangle as bounded against the open forbidden quadrant.

#include "powerdiag/diagnostics.hpp"
#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"
#include "powerdiag/scaling.hpp"
#include "powerdiag/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace powerdiag::map {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct MapPoint {
    std::string label;
    double power_ratio = 0.0;
    std::optional<double> coupling_norm;  ///< empty when the MSE is zero
    double coupling_raw = 0.0;
    RegimeLabel regime = RegimeLabel::PowerConservative;
    bool degenerate = false;
    bool certified = false;  ///< produced at an MSE-optimal scaling
};

/// Equality over the columns that survive CSV emission.
[[nodiscard]] inline bool same_columns(const MapPoint& a, const MapPoint& b) noexcept {
    const bool norms_equal = a.coupling_norm.has_value() == b.coupling_norm.has_value() &&
                             (!a.coupling_norm || *a.coupling_norm == *b.coupling_norm);
    return a.label == b.label && a.power_ratio == b.power_ratio && norms_equal &&
           a.coupling_raw == b.coupling_raw && a.regime == b.regime;
}

enum class Region { Safe, Forbidden, Boundary };

[[nodiscard]] constexpr std::string_view to_string(Region r) noexcept {
    switch (r) {
        case Region::Safe: return "safe";
        case Region::Forbidden: return "forbidden";
        case Region::Boundary: return "boundary";
    }
    return "unknown";
}

/// Region membership from the horizontal coordinate alone.
[[nodiscard]] inline Region region_of(double power_ratio, double balance_tol = kDefaultBalanceTol) noexcept {
    const double gap = power_ratio - 1.0;
    if (std::fabs(gap) <= balance_tol) return Region::Boundary;
    return gap > 0.0 ? Region::Forbidden : Region::Safe;
}

[[nodiscard]] constexpr Region region_for(RegimeLabel r) noexcept {
    switch (r) {
        case RegimeLabel::PowerDominant: return Region::Forbidden;
        case RegimeLabel::PowerBalance: return Region::Boundary;
        case RegimeLabel::PowerConservative: return Region::Safe;
    }
    return Region::Safe;
}

namespace detail {
/// MSE at or below this fraction of the total power is treated as zero.
inline constexpr double kZeroMseRel = 8.0 * std::numeric_limits<double>::epsilon();

inline std::optional<double> normalised(double coupling, double mse, double scale) {
    if (!(mse > kZeroMseRel * scale)) return std::nullopt;
    return coupling / mse;
}
}  // namespace detail

[[nodiscard]] inline MapPoint map_point(std::string label, const MomentStats& stats,
                                        double balance_tol = kDefaultBalanceTol,
                                        double tol = kDefaultDegeneracyTol) {
    const auto verdict = check_penalty(stats, tol, balance_tol);
    MapPoint p;
    p.label = std::move(label);
    p.power_ratio = stats.ev2 / stats.ex2;
    p.coupling_raw = stats.coupling;
    p.coupling_norm = detail::normalised(stats.coupling, stats.mse, stats.ex2 + stats.ev2);
    p.regime = verdict.regime;
    p.degenerate = verdict.degenerate;
    return p;
}

/// Point for the scaling t* z, computed from the certificate rather than
/// from transformed samples.
[[nodiscard]] inline MapPoint map_point_certified(std::string label, const ScalingProblem& problem,
                                                  double balance_tol = kDefaultBalanceTol) {
    const auto cert = certify_optimum(problem);
    MapPoint p;
    p.label = std::move(label);
    p.power_ratio = cert.power_at_star / problem.ex2;
    p.coupling_raw = cert.orthogonality_residual;
    p.coupling_norm = detail::normalised(cert.orthogonality_residual, cert.mse_at_star,
                                         problem.ex2 + cert.power_at_star);
    p.regime = classify_power(problem.ex2, cert.power_at_star, balance_tol);
    p.degenerate = true;
    p.certified = true;
    return p;
}

enum class MapKind { Left, Right };

[[nodiscard]] constexpr std::string_view to_string(MapKind k) noexcept {
    return k == MapKind::Left ? "left" : "right";
}

struct RegionShape {
    std::string name;   ///< "safe" or "forbidden"
    std::string color;  ///< "green" or "red"
    bool bounded = false;
    std::vector<Vec2> polygon;
};

struct Bounds {
    double x_min = 0.0, x_max = 2.0, y_min = -0.5, y_max = 1.0;
};

struct MapGeometry {
    std::array<Vec2, 2> balance_line{};
    std::array<Vec2, 2> penalty_line{};
    Vec2 singularity{1.0, 0.5};
    std::array<Vec2, 2> ideal_path{};
    std::vector<RegionShape> regions;
};

struct MapDataset {
    MapKind kind = MapKind::Left;
    std::vector<MapPoint> points;
    std::vector<Region> point_regions;  ///< parallel to points
    Bounds bounds;
    MapGeometry geometry;
    double balance_tol = kDefaultBalanceTol;
};

namespace detail {

inline Bounds fit_bounds(std::span<const MapPoint> points) {
    Bounds b;
    for (const auto& p : points) {
        b.x_max = std::max(b.x_max, 1.15 * p.power_ratio);
        if (p.coupling_norm) {
            const double y = *p.coupling_norm;
            if (std::isfinite(y)) {
                b.y_max = std::max(b.y_max, y + 0.15 * std::fabs(y) + 0.1);
                b.y_min = std::min(b.y_min, y - 0.15 * std::fabs(y) - 0.1);
            }
        }
    }
    return b;
}

inline MapDataset build_common(MapKind kind, std::span<const MapPoint> points, double balance_tol) {
    if (points.empty()) throw Error(ErrorKind::EmptyInput, "a map needs at least one point");
    MapDataset d;
    d.kind = kind;
    d.balance_tol = balance_tol;
    d.points.assign(points.begin(), points.end());
    for (const auto& p : d.points) d.point_regions.push_back(region_of(p.power_ratio, balance_tol));
    d.bounds = fit_bounds(points);
    const auto& b = d.bounds;
    auto& g = d.geometry;
    g.balance_line = {Vec2{1.0, b.y_min}, Vec2{1.0, b.y_max}};
    g.penalty_line = {Vec2{b.x_min, 0.5}, Vec2{b.x_max, 0.5}};
    g.singularity = {1.0, 0.5};
    double rho = 1.0;
    bool any_certified = false;
    for (const auto& p : d.points) {
        if (!p.certified) continue;
        rho = any_certified ? std::max(rho, p.power_ratio) : p.power_ratio;
        any_certified = true;
    }
    g.ideal_path = {Vec2{0.0, 0.0}, Vec2{rho, 0.0}};
    return d;
}

}  // namespace detail

/// Regime bands: safe for ratio <= 1, forbidden beyond.
[[nodiscard]] inline MapDataset build_left_map(std::span<const MapPoint> points,
                                               double balance_tol = kDefaultBalanceTol) {
    auto d = detail::build_common(MapKind::Left, points, balance_tol);
    const auto& b = d.bounds;
    d.geometry.regions = {
        {"safe", "green", false, {{b.x_min, b.y_min}, {1.0, b.y_min}, {1.0, b.y_max}, {b.x_min, b.y_max}}},
        {"forbidden", "red", false, {{1.0, b.y_min}, {b.x_max, b.y_min}, {b.x_max, b.y_max}, {1.0, b.y_max}}},
    };
    return d;
}

/// Bounded safe rectangle (ratio <= 1, coupling_norm <= 1/2) against the
/// unbounded forbidden quadrant above and right of the singularity.
[[nodiscard]] inline MapDataset build_right_map(std::span<const MapPoint> points,
                                                double balance_tol = kDefaultBalanceTol) {
    auto d = detail::build_common(MapKind::Right, points, balance_tol);
    const auto& b = d.bounds;
    d.geometry.regions = {
        {"safe", "green", true, {{b.x_min, b.y_min}, {1.0, b.y_min}, {1.0, 0.5}, {b.x_min, 0.5}}},
        {"forbidden", "red", false, {{1.0, 0.5}, {b.x_max, 0.5}, {b.x_max, b.y_max}, {1.0, b.y_max}}},
    };
    return d;
}

// ---------------------------------------------------------------------------
// Emission

struct EmittedDataset {
    std::string csv;
    std::string json;
};

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Splits one CSV record honouring double-quoted fields.
inline std::vector<std::string> csv_record(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": unterminated quote", line_no);
    }
    return fields;
}

inline nlohmann::ordered_json pair(Vec2 v) { return nlohmann::ordered_json::array({v.x, v.y}); }

}  // namespace detail

inline constexpr std::string_view kMapCsvHeader = "label,power_ratio,coupling_norm,coupling_raw,regime";

[[nodiscard]] inline nlohmann::ordered_json geometry_json(const MapDataset& d) {
    nlohmann::ordered_json j;
    j["map"] = to_string(d.kind);
    j["bounds"] = {{"x", {d.bounds.x_min, d.bounds.x_max}}, {"y", {d.bounds.y_min, d.bounds.y_max}}};
    const auto& g = d.geometry;
    j["balance_line"] = {detail::pair(g.balance_line[0]), detail::pair(g.balance_line[1])};
    j["penalty_line"] = {detail::pair(g.penalty_line[0]), detail::pair(g.penalty_line[1])};
    j["singularity"] = detail::pair(g.singularity);
    j["ideal_path"] = {detail::pair(g.ideal_path[0]), detail::pair(g.ideal_path[1])};
    auto regions = nlohmann::ordered_json::array();
    for (const auto& r : g.regions) {
        nlohmann::ordered_json jr;
        jr["name"] = r.name;
        jr["color"] = r.color;
        jr["bounded"] = r.bounded;
        auto poly = nlohmann::ordered_json::array();
        for (const auto& v : r.polygon) poly.push_back(detail::pair(v));
        jr["polygon"] = std::move(poly);
        regions.push_back(std::move(jr));
    }
    j["regions"] = std::move(regions);
    j["point_count"] = d.points.size();
    auto notes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        notes.push_back({{"label", d.points[i].label}, {"region", to_string(d.point_regions[i])}});
    }
    j["point_regions"] = std::move(notes);
    return j;
}

[[nodiscard]] inline EmittedDataset emit_dataset(const MapDataset& d) {
    EmittedDataset out;
    out.csv = std::string(kMapCsvHeader) + '\n';
    for (const auto& p : d.points) {
        out.csv += detail::csv_field(p.label) + ',' + text::format_real(p.power_ratio) + ',' +
                   text::format_real(p.coupling_norm.value_or(std::nan(""))) + ',' +
                   text::format_real(p.coupling_raw) + ',' + std::string(to_string(p.regime)) + '\n';
    }
    out.json = geometry_json(d).dump(2) + '\n';
    return out;
}

[[nodiscard]] inline std::vector<MapPoint> parse_map_csv(std::string_view csv) {
    std::vector<MapPoint> out;
    std::size_t line_no = 0;
    bool header = false;
    for (auto line : text::split(csv, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header) {
            if (line != kMapCsvHeader) {
                throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad header", line_no);
            }
            header = true;
            continue;
        }
        auto f = detail::csv_record(line, line_no);
        if (f.size() != 5) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected 5 fields", line_no);
        }
        MapPoint p;
        p.label = f[0];
        double norm = 0.0;
        if (!text::parse_real(f[1], p.power_ratio) || !text::parse_real(f[2], norm) ||
            !text::parse_real(f[3], p.coupling_raw)) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": bad number", line_no);
        }
        if (!std::isnan(norm)) p.coupling_norm = norm;
        p.regime = parse_regime(f[4]);
        out.push_back(std::move(p));
    }
    if (!header) throw Error(ErrorKind::ParseError, "missing header", 1);
    return out;
}

// ---------------------------------------------------------------------------
// SVG

struct StyleConfig {
    int width = 640;
    int height = 480;
    int margin = 56;
    double point_radius = 4.5;
    bool show_labels = true;
    std::string title;  ///< defaults by map kind when empty
};

namespace detail {

inline std::string fixed(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Canvas {
    Bounds b;
    double left, top, w, h;
    [[nodiscard]] double px(double x) const { return left + (x - b.x_min) / (b.x_max - b.x_min) * w; }
    [[nodiscard]] double py(double y) const { return top + (b.y_max - y) / (b.y_max - b.y_min) * h; }
    [[nodiscard]] double clamp_y(double y) const { return std::clamp(y, b.y_min, b.y_max); }
};

inline std::string_view regime_color(RegimeLabel r) {
    switch (r) {
        case RegimeLabel::PowerDominant: return "#b71c1c";
        case RegimeLabel::PowerBalance: return "#f9a825";
        case RegimeLabel::PowerConservative: return "#1b5e20";
    }
    return "black";
}

inline std::string_view fill_for(std::string_view color) {
    return color == "green" ? "#66bb6a" : "#ef5350";
}

}  // namespace detail

[[nodiscard]] inline std::string render_svg(const MapDataset& d, const StyleConfig& style = {}) {
    using detail::fixed;
    const detail::Canvas cv{d.bounds, static_cast<double>(style.margin), static_cast<double>(style.margin),
                            static_cast<double>(style.width - 2 * style.margin),
                            static_cast<double>(style.height - 2 * style.margin)};
    const std::string title = !style.title.empty() ? style.title
                              : d.kind == MapKind::Left ? "Safe-zone map: power regimes"
                                                        : "Safe-zone map: bounded vs. unbounded optimisation";
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(style.width) +
         "\" height=\"" + std::to_string(style.height) + "\" viewBox=\"0 0 " + std::to_string(style.width) + ' ' +
         std::to_string(style.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<title>" + detail::xml_escape(title) + "</title>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(style.width) + "\" height=\"" +
         std::to_string(style.height) + "\" fill=\"white\"/>\n";

    for (const auto& r : d.geometry.regions) {
        std::string pts;
        for (const auto& v : r.polygon) {
            if (!pts.empty()) pts += ' ';
            pts += fixed(cv.px(v.x)) + ',' + fixed(cv.py(cv.clamp_y(v.y)));
        }
        s += "<polygon class=\"region " + r.name + "\" data-bounded=\"" + (r.bounded ? "true" : "false") +
             "\" points=\"" + pts + "\" fill=\"" + std::string(detail::fill_for(r.color)) +
             "\" fill-opacity=\"0.35\" stroke=\"none\"/>\n";
    }

    // axes
    const double x0 = cv.px(d.bounds.x_min), x1 = cv.px(d.bounds.x_max);
    const double y0 = cv.py(d.bounds.y_min), y1 = cv.py(d.bounds.y_max);
    s += "<g class=\"axes\" stroke=\"#333\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + fixed(x0) + "\" y1=\"" + fixed(y0) + "\" x2=\"" + fixed(x1) + "\" y2=\"" + fixed(y0) + "\"/>\n";
    s += "<line x1=\"" + fixed(x0) + "\" y1=\"" + fixed(y0) + "\" x2=\"" + fixed(x0) + "\" y2=\"" + fixed(y1) + "\"/>\n";
    if (d.bounds.y_min < 0.0 && d.bounds.y_max > 0.0) {
        s += "<line x1=\"" + fixed(x0) + "\" y1=\"" + fixed(cv.py(0.0)) + "\" x2=\"" + fixed(x1) + "\" y2=\"" +
             fixed(cv.py(0.0)) + "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
    }
    s += "</g>\n";
    s += "<g class=\"ticks\" fill=\"#333\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = d.bounds.x_min + (d.bounds.x_max - d.bounds.x_min) * i / 4.0;
        const double yv = d.bounds.y_min + (d.bounds.y_max - d.bounds.y_min) * i / 4.0;
        s += "<text x=\"" + fixed(cv.px(xv)) + "\" y=\"" + fixed(y0 + 16) + "\" text-anchor=\"middle\">" +
             fixed(xv) + "</text>\n";
        s += "<text x=\"" + fixed(x0 - 6) + "\" y=\"" + fixed(cv.py(yv) + 4) + "\" text-anchor=\"end\">" +
             fixed(yv) + "</text>\n";
    }
    s += "</g>\n";
    s += "<text class=\"axis-label\" x=\"" + fixed((x0 + x1) / 2) + "\" y=\"" + fixed(y0 + 36) +
         "\" text-anchor=\"middle\">power ratio E[v^2]/E[x^2]</text>\n";
    s += "<text class=\"axis-label\" x=\"14\" y=\"" + fixed((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         fixed((y0 + y1) / 2) + ")\">coupling E[v e] / MSE</text>\n";

    const auto& g = d.geometry;
    s += "<line class=\"balance-line\" x1=\"" + fixed(cv.px(g.balance_line[0].x)) + "\" y1=\"" +
         fixed(cv.py(g.balance_line[0].y)) + "\" x2=\"" + fixed(cv.px(g.balance_line[1].x)) + "\" y2=\"" +
         fixed(cv.py(g.balance_line[1].y)) + "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    s += "<text class=\"annotation\" x=\"" + fixed(cv.px(1.0) + 4) + "\" y=\"" + fixed(y1 + 12) +
         "\">power-balance line</text>\n";

    if (d.kind == MapKind::Right) {
        s += "<line class=\"penalty-line\" x1=\"" + fixed(cv.px(g.penalty_line[0].x)) + "\" y1=\"" +
             fixed(cv.py(0.5)) + "\" x2=\"" + fixed(cv.px(g.penalty_line[1].x)) + "\" y2=\"" + fixed(cv.py(0.5)) +
             "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
        s += "<text class=\"annotation\" x=\"" + fixed(x1 - 4) + "\" y=\"" + fixed(cv.py(0.5) - 4) +
             "\" text-anchor=\"end\">penalty line</text>\n";
        s += "<line class=\"ideal-path\" x1=\"" + fixed(cv.px(g.ideal_path[0].x)) + "\" y1=\"" +
             fixed(cv.py(g.ideal_path[0].y)) + "\" x2=\"" + fixed(cv.px(g.ideal_path[1].x)) + "\" y2=\"" +
             fixed(cv.py(g.ideal_path[1].y)) + "\" stroke=\"blue\" stroke-width=\"3\"/>\n";
        s += "<text class=\"annotation\" x=\"" + fixed(cv.px(0.5 * (d.bounds.x_min + 1.0))) + "\" y=\"" +
             fixed(cv.py(0.5) + 14) + "\" text-anchor=\"middle\">bounded</text>\n";
        s += "<text class=\"annotation\" x=\"" + fixed(cv.px(0.5 * (1.0 + d.bounds.x_max))) + "\" y=\"" +
             fixed(y1 + 28) + "\" text-anchor=\"middle\">unbounded</text>\n";
    } else {
        s += "<text class=\"annotation\" x=\"" + fixed(cv.px(0.5 * (d.bounds.x_min + 1.0))) + "\" y=\"" +
             fixed(y1 + 28) + "\" text-anchor=\"middle\">safe zone</text>\n";
        s += "<text class=\"annotation\" x=\"" + fixed(cv.px(0.5 * (1.0 + d.bounds.x_max))) + "\" y=\"" +
             fixed(y1 + 28) + "\" text-anchor=\"middle\">forbidden zone</text>\n";
    }

    for (std::size_t i = 0; i < d.points.size(); ++i) {
        const auto& p = d.points[i];
        const double y = p.coupling_norm && std::isfinite(*p.coupling_norm) ? *p.coupling_norm : 0.0;
        const double cx = cv.px(std::min(p.power_ratio, d.bounds.x_max));
        const double cy = cv.py(cv.clamp_y(y));
        s += "<circle class=\"point\" data-regime=\"" + std::string(to_string(p.regime)) + "\" cx=\"" + fixed(cx) +
             "\" cy=\"" + fixed(cy) + "\" r=\"" + fixed(style.point_radius) + "\" fill=\"" +
             std::string(detail::regime_color(p.regime)) + "\"" +
             (p.coupling_norm ? "" : " stroke=\"black\" fill-opacity=\"0.3\"") + "/>\n";
        if (style.show_labels) {
            std::string label = detail::xml_escape(p.label);
            if (d.point_regions[i] == Region::Boundary) label += " (on boundary)";
            s += "<text class=\"point-label\" x=\"" + fixed(cx + 6) + "\" y=\"" + fixed(cy - 6) + "\">" + label +
                 "</text>\n";
        }
    }

    if (d.kind == MapKind::Right) {
        s += "<circle class=\"singularity\" cx=\"" + fixed(cv.px(g.singularity.x)) + "\" cy=\"" +
             fixed(cv.py(g.singularity.y)) + "\" r=\"5\" fill=\"red\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace powerdiag::map
