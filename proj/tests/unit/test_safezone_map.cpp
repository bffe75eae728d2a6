#include "powerdiag/safezone_map.hpp"
#include "powerdiag/zoo.hpp"
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace powerdiag;
using namespace powerdiag::map;
using Catch::Approx;

namespace {

std::vector<PairedSample> unit_signal(double gain) {
    std::vector<PairedSample> out;
    for (int i = 0; i < 8; ++i) {
        const double x = i % 2 == 0 ? 1.0 : -1.0;
        out.push_back({x, gain * x});
    }
    return out;
}

MomentStats stats_of(const std::vector<PairedSample>& s) { return finalize(summarize(s)); }

std::size_t count_of(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

/// Minimal XML well-formedness: balanced tags, quoted attributes, no stray '<'.
bool well_formed(const std::string& doc) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while ((i = doc.find('<', i)) != std::string::npos) {
        const auto close = doc.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = doc.substr(i + 1, close - i - 1);
        if (tag.find('<') != std::string::npos) return false;
        i = close + 1;
        if (tag.starts_with('?') || tag.starts_with('!')) continue;
        if (count_of(tag, "\"") % 2 != 0) return false;
        if (tag.starts_with('/')) {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
        } else if (!tag.ends_with('/')) {
            stack.push_back(tag.substr(0, tag.find_first_of(" \n")));
        }
    }
    return stack.empty();
}

bool inside(const RegionShape& r, double x, double y) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& v : r.polygon) {
        xmin = std::min(xmin, v.x); xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y); ymax = std::max(ymax, v.y);
    }
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
}

const RegionShape& region_named(const MapDataset& d, const std::string& name) {
    for (const auto& r : d.geometry.regions) {
        if (r.name == name) return r;
    }
    throw std::runtime_error("no region " + name);
}

}  // namespace

TEST_CASE("map_point: closed-form coordinates", "[map]") {
    SECTION("amplified v = 2x: coupling 2, mse 1") {
        const auto p = map_point("2x", stats_of(unit_signal(2.0)));
        CHECK(p.power_ratio == 4.0);
        REQUIRE(p.coupling_norm.has_value());
        CHECK(*p.coupling_norm == 2.0);
        CHECK(p.regime == RegimeLabel::PowerDominant);
        CHECK(region_of(p.power_ratio) == Region::Forbidden);
    }
    SECTION("certified optimum of (1, 2, 1)") {
        const auto p = map_point_certified("opt", ScalingProblem{1.0, 2.0, 1.0});
        CHECK(p.power_ratio == 0.5);
        REQUIRE(p.coupling_norm.has_value());
        CHECK(*p.coupling_norm == 0.0);
        CHECK(p.regime == RegimeLabel::PowerConservative);
        CHECK(p.certified);
        const auto d = build_right_map(std::vector{p});
        CHECK(d.geometry.ideal_path[1] == Vec2{0.5, 0.0});
    }
    SECTION("zero estimate sits at the origin") {
        const auto p = map_point("zero", stats_of(unit_signal(0.0)));
        CHECK(p.power_ratio == 0.0);
        REQUIRE(p.coupling_norm.has_value());
        CHECK(*p.coupling_norm == 0.0);
    }
    SECTION("zero MSE leaves the vertical coordinate undefined") {
        const auto p = map_point("ideal", stats_of(unit_signal(1.0)));
        CHECK_FALSE(p.coupling_norm.has_value());
        CHECK(p.power_ratio == 1.0);
        CHECK(p.regime == RegimeLabel::PowerBalance);
    }
    SECTION("zero signal power") {
        std::vector<PairedSample> s{{0, 1}, {0, 2}};
        CHECK_THROWS_AS(map_point("bad", stats_of(s)), Error);
    }
}

TEST_CASE("build_left_map: regions and annotations", "[map]") {
    SECTION("single safe point") {
        const auto d = build_left_map(std::vector{map_point("half", stats_of(unit_signal(0.5)))});
        REQUIRE(d.points.size() == 1);
        CHECK(d.point_regions[0] == Region::Safe);
        CHECK(inside(region_named(d, "safe"), d.points[0].power_ratio, *d.points[0].coupling_norm));
        CHECK(region_named(d, "safe").color == "green");
        CHECK(region_named(d, "forbidden").color == "red");
    }
    SECTION("mixed zoo run") {
        zoo::ProblemSpec problem;
        const auto samples = zoo::generate(problem, 20000);
        std::vector<MapPoint> pts;
        for (const auto* e : {"zero", "scale:0.5", "amplifier:2"}) {
            const auto spec = zoo::parse_estimator(e);
            pts.push_back(map_point(spec.label(), finalize(summarize(zoo::apply(spec, samples)))));
        }
        const auto d = build_left_map(pts);
        const auto& amp = d.points[2];
        CHECK(d.point_regions[2] == Region::Forbidden);
        CHECK(amp.power_ratio > 1.0);
        CHECK(inside(region_named(d, "forbidden"), amp.power_ratio, *amp.coupling_norm));
        CHECK_FALSE(inside(region_named(d, "safe"), amp.power_ratio, *amp.coupling_norm));
    }
    SECTION("point on the balance line") {
        auto p = map_point("edge", stats_of(unit_signal(-1.0)));
        CHECK(p.power_ratio == 1.0);
        const auto d = build_left_map(std::vector{p});
        CHECK(d.point_regions[0] == Region::Boundary);
        CHECK(render_svg(d).find("(on boundary)") != std::string::npos);
    }
    SECTION("empty input") {
        CHECK_THROWS_AS(build_left_map(std::vector<MapPoint>{}), Error);
        CHECK_THROWS_AS(build_right_map(std::vector<MapPoint>{}), Error);
    }
}

TEST_CASE("build_right_map: optima on the ideal path, amplifiers above the penalty line", "[map]") {
    std::mt19937_64 rng(17);
    std::vector<MapPoint> optima;
    for (int i = 0; i < 10; ++i) {
        zoo::ProblemSpec p;
        p.signal_power = 0.5 + (rng() % 1000) / 500.0;
        p.noise_power = 0.1 + (rng() % 1000) / 400.0;
        p.seed = rng();
        const auto samples = zoo::generate(p, 5000);
        const auto prob = ScalingProblem::from_stats(finalize(summarize(samples)));
        // Apply t* to the samples and measure on the transformed data.
        const auto scaled = zoo::apply({zoo::EstimatorKind::Scale, optimal_scale(prob)}, samples);
        auto pt = map_point("opt" + std::to_string(i), finalize(summarize(scaled)));
        REQUIRE(pt.coupling_norm.has_value());
        CHECK(std::fabs(*pt.coupling_norm) <= 1e-9);
        CHECK(pt.power_ratio <= 1.0 + 1e-12);
        optima.push_back(pt);
    }
    const auto d = build_right_map(optima);
    CHECK(d.geometry.singularity == Vec2{1.0, 0.5});
    CHECK(region_named(d, "safe").bounded);
    CHECK_FALSE(region_named(d, "forbidden").bounded);

    SECTION("amplifier family: closed form and brute force agree") {
        zoo::ProblemSpec p;
        p.seed = 2;
        const auto samples = zoo::generate(p, 50000);
        double prev_raw = -1e300;
        for (double c : {1.5, 2.0, 4.0}) {
            const auto amp = zoo::apply({zoo::EstimatorKind::Amplifier, c}, samples);
            const auto pt = map_point("amp", finalize(summarize(amp)));
            const auto direct = testing::direct_moments(amp);
            REQUIRE(pt.coupling_norm.has_value());
            CHECK(*pt.coupling_norm == Approx(static_cast<double>(direct.coupling / direct.mse)).epsilon(1e-10));
            // population: coupling = 2c^2 - c, mse = 2c^2 - 2c + 1 for unit signal and noise
            CHECK(*pt.coupling_norm == Approx((2 * c * c - c) / (2 * c * c - 2 * c + 1)).epsilon(0.03));
            CHECK(*pt.coupling_norm > 0.5);
            CHECK(pt.coupling_raw > prev_raw);
            prev_raw = pt.coupling_raw;
        }
    }
    SECTION("no certified point: ideal path runs to ratio 1") {
        const auto e = build_right_map(std::vector{map_point("zero", stats_of(unit_signal(0.0)))});
        CHECK(e.geometry.ideal_path[0] == Vec2{0.0, 0.0});
        CHECK(e.geometry.ideal_path[1] == Vec2{1.0, 0.0});
    }
}

TEST_CASE("render_svg: structure and determinism", "[map][svg]") {
    const std::vector pts{map_point("zero", stats_of(unit_signal(0.0))),
                          map_point("half & <half>", stats_of(unit_signal(0.5))),
                          map_point("double", stats_of(unit_signal(2.0))),
                          map_point_certified("opt", ScalingProblem{1.0, 2.0, 1.0})};
    for (const auto& d : {build_left_map(pts), build_right_map(pts)}) {
        const auto svg = render_svg(d);
        CHECK(well_formed(svg));
        CHECK(svg.starts_with("<?xml"));
        CHECK(count_of(svg, "class=\"region ") == 2);
        CHECK(count_of(svg, "<circle class=\"point\"") == d.points.size());
        CHECK(svg == render_svg(d));
        CHECK(svg.find("half &amp; &lt;half&gt;") != std::string::npos);
        if (d.kind == MapKind::Right) {
            CHECK(count_of(svg, "class=\"singularity\"") == 1);
            CHECK(svg.find("class=\"singularity\" cx=") != std::string::npos);
            CHECK(svg.find("fill=\"red\"/>") != std::string::npos);
            CHECK(svg.find("class=\"ideal-path\"") != std::string::npos);
            CHECK(svg.find("stroke=\"blue\"") != std::string::npos);
            CHECK(count_of(svg, "class=\"penalty-line\"") == 1);
        } else {
            CHECK(count_of(svg, "class=\"singularity\"") == 0);
        }
        CHECK(count_of(svg, "class=\"balance-line\"") == 1);
    }
    StyleConfig bare;
    bare.show_labels = false;
    bare.title = "bare";
    const auto svg = render_svg(build_left_map(std::vector{pts[0]}), bare);
    CHECK(well_formed(svg));
    CHECK(count_of(svg, "class=\"region ") == 2);
    CHECK(count_of(svg, "point-label") == 0);
}

TEST_CASE("emit_dataset: CSV rows, JSON geometry, exact round trip", "[map][csv]") {
    const std::vector pts{map_point("zero", stats_of(unit_signal(0.0))),
                          map_point("comma, \"quoted\"", stats_of(unit_signal(0.3))),
                          map_point("ideal", stats_of(unit_signal(1.0)))};
    const auto d = build_right_map(pts);
    const auto out = emit_dataset(d);
    CHECK(count_of(out.csv, "\n") == 4);
    CHECK(out.csv.starts_with("label,power_ratio,coupling_norm,coupling_raw,regime\n"));

    const auto j = nlohmann::json::parse(out.json);
    CHECK(j["singularity"] == nlohmann::json::array({1.0, 0.5}));
    CHECK(j["map"] == "right");
    CHECK(j["ideal_path"][0] == nlohmann::json::array({0.0, 0.0}));
    CHECK(j["penalty_line"][0][1] == 0.5);
    CHECK(j["balance_line"][0][0] == 1.0);
    CHECK(j["regions"].size() == 2);
    CHECK(j["point_count"] == 3);

    const auto back = parse_map_csv(out.csv);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(same_columns(back[i], pts[i]));
    CHECK_FALSE(back[2].coupling_norm.has_value());

    CHECK_THROWS_AS(parse_map_csv("bad header\n"), Error);
    CHECK_THROWS_AS(parse_map_csv(std::string(kMapCsvHeader) + "\na,1,2\n"), Error);
}

TEST_CASE("property: map geometry agrees with the diagnostics", "[map][property]") {
    std::mt19937_64 rng(4242);
    std::vector<MapPoint> pts;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto set = testing::random_set(rng, 2 + rng() % 300);
        const auto st = finalize(summarize(set));
        if (!(st.ex2 > 0.0)) continue;
        const auto p = map_point("p", st);
        REQUIRE(region_of(p.power_ratio) == region_for(p.regime));
        if (p.regime == RegimeLabel::PowerDominant && !p.degenerate && p.coupling_norm) {
            REQUIRE(*p.coupling_norm > 0.5);
        }
        if (p.regime != RegimeLabel::PowerDominant && p.coupling_norm) {
            REQUIRE(*p.coupling_norm <= 0.5 + 1e-9);
        }
        if (st.ev2 > 0.0) {
            const auto c = map_point_certified("c", ScalingProblem::from_stats(st));
            if (c.coupling_norm) REQUIRE(std::fabs(*c.coupling_norm) <= 1e-9);
            REQUIRE(c.power_ratio <= 1.0 + 1e-12);
        }
        pts.push_back(p);
    }
    const auto d = build_left_map(pts);
    const auto back = parse_map_csv(emit_dataset(d).csv);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) REQUIRE(same_columns(back[i], pts[i]));
}
