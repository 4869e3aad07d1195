#include "catch_amalgamated.hpp"

#include "levelctl/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace levelctl;
using Catch::Approx;

namespace {

const Map2Params reference_map2{4.0, 1.0, 0.25, 0.2, 0.5, 1.0};

/// Brute-force oracle: settle on the attracting cycle, then average
/// ln|f'(q)| over one period.
double cycle_exponent(double a, int period) {
    double q = 0.5;
    for (int i = 0; i < 200000; ++i) q = reduced_map_step(q, a);
    double sum = 0.0;
    for (int i = 0; i < period; ++i) {
        sum += std::log(std::abs(reduced_map_derivative(q, a)));
        q = reduced_map_step(q, a);
    }
    return sum / period;
}

}  // namespace

TEST_CASE("iterate_orbit periods of the reduced map", "[bifurcation]") {
    const MapFamily f = MapFamily::reduced();
    const OrbitSummary one = iterate_orbit(f, 1.0, {0.5, 0.0});
    REQUIRE(one.period);
    CHECK(*one.period == 1);
    CHECK(one.samples.back().Q == Approx(1.0).epsilon(1e-12));
    CHECK(*iterate_orbit(f, 2.4, {0.5, 0.0}).period == 2);
    CHECK(*iterate_orbit(f, 2.58, {0.5, 0.0}).period == 4);
    const OrbitSummary chaos = iterate_orbit(f, 2.7, {0.5, 0.0});
    CHECK_FALSE(chaos.period);
    CHECK(chaos.lyapunov > 0.0);
    for (const MapPoint& p : chaos.samples) CHECK(chaos.Q_bounds.contains(p.Q));
}

TEST_CASE("iterate_orbit reports divergence with the last finite iterate", "[bifurcation]") {
    const MapFamily f = MapFamily::first(Map1Params{400.0, 1.0, 0.0, 1.0});
    try {
        (void)iterate_orbit(f, 2.0, {1e-3, 0.0});
        FAIL("expected divergence");
    } catch (const OrbitDiverged& e) {
        CHECK(e.kind() == ErrorKind::orbit_diverged);
        CHECK(std::isfinite(e.last_finite().Q));
    }
}

TEST_CASE("detect_period", "[bifurcation]") {
    const std::vector<double> flat(200, 3.0);
    CHECK(*detect_period(flat) == 1);
    std::vector<double> alt;
    for (int i = 0; i < 200; ++i) alt.push_back(i % 2 ? 1.4 : 0.6);
    CHECK(*detect_period(alt) == 2);
    CHECK_THROWS_AS(detect_period(std::vector<double>(10, 1.0)), Error);

    SECTION("rotation invariance") {
        std::vector<double> cyc;
        const double pattern[] = {0.3, 1.1, 0.7, 1.9, 0.5};
        for (int i = 0; i < 400; ++i) cyc.push_back(pattern[i % 5]);
        const auto base = detect_period(cyc);
        for (int r = 1; r < 7; ++r) {
            std::vector<double> rotated = cyc;
            std::rotate(rotated.begin(), rotated.begin() + r, rotated.end());
            CHECK(detect_period(rotated) == base);
        }
        CHECK(*base == 5);

        std::vector<double> chaotic;
        double q = 0.5;
        for (int i = 0; i < 10000; ++i) q = reduced_map_step(q, 2.7);
        for (int i = 0; i < 1000; ++i) chaotic.push_back(q = reduced_map_step(q, 2.7));
        for (int r = 0; r < 5; ++r) {
            std::rotate(chaotic.begin(), chaotic.begin() + 37, chaotic.end());
            CHECK_FALSE(detect_period(chaotic));
        }
    }
}

TEST_CASE("Lyapunov exponent of the reduced map", "[bifurcation]") {
    const double superstable = lyapunov_reduced(1.0, 0.5, 1000, 1000).exponent;
    CHECK(superstable >= -50.0);  // per-term clamp
    CHECK(superstable < -30.0);   // |f'| sits at rounding level (1e-16) near q = 1
    const LyapunovEstimate chaos = lyapunov_reduced(2.7, 0.5, 10000, 100000);
    CHECK(chaos.exponent == Approx(0.09).margin(0.02));
    CHECK(chaos.reliable);
    const LyapunovEstimate two = lyapunov_reduced(2.4, 0.5, 10000, 10000);
    CHECK(two.exponent < 0.0);
    CHECK(two.exponent == Approx(cycle_exponent(2.4, 2)).margin(1e-3));
    CHECK(lyapunov_reduced(2.58, 0.5, 20000, 20000).exponent == Approx(cycle_exponent(2.58, 4)).margin(1e-3));
}

TEST_CASE("Lyapunov exponent of the two-dimensional maps", "[bifurcation]") {
    SECTION("stable map 1 fixed point") {
        const Map1Params p{1.0, 1.0, 0.1, 0.4};
        const MapFamily f = MapFamily::first(p);
        CHECK(lyapunov_2d(f, 0.4, fixed_point_map1(p), 100, 1000).exponent < 0.0);
    }
    SECTION("map 1 in the chaotic regime follows the reduced map") {
        const MapFamily f = MapFamily::first(Map1Params{1.0, 1.0, 0.1534, 1.35});
        const double two_d = lyapunov_2d(f, 1.35, {0.5, 0.0}, 10000, 100000).exponent;
        CHECK(two_d == Approx(0.09).margin(0.02));
        CHECK(two_d == Approx(lyapunov_reduced(2.7, 0.5, 10000, 100000).exponent).margin(0.01));
    }
    SECTION("computer zero makes map 2 unreliable") {
        const MapFamily f = MapFamily::second(reference_map2);
        const LyapunovEstimate e = lyapunov_2d(f, 1.89, f.default_start(1.89), 10000, 10000);
        CHECK_FALSE(e.reliable);
        CHECK(e.note == "unreliable: computer zero");
        CHECK(e.underflow_events >= 1);
    }
}

TEST_CASE("map 1 and reduced Lyapunov exponents agree", "[bifurcation][property]") {
    Catch::SimplePcg32 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const double a = 2.0 + 0.8 * (1.0 - u(rng));
        const double dt = a / 2.0;  // lambda_tilde = 1
        const MapFamily f = MapFamily::first(Map1Params{1.0, 1.0, 0.05, dt});
        const double two_d = lyapunov_2d(f, dt, {0.5, 0.0}, 10000, 20000).exponent;
        const double one_d = lyapunov_reduced(a, 0.5, 10000, 20000).exponent;
        CHECK(two_d == Approx(one_d).margin(0.01));
    }
}

TEST_CASE("refine_flip on the reduced map", "[bifurcation]") {
    const MapFamily f = MapFamily::reduced();
    const double first = refine_flip(f, 2.0, 2.6, 1e-6);
    CHECK(first == Approx(2.5265).margin(5e-4));
    const double second = refine_flip(f, 2.6, 2.68, 1e-6);
    CHECK(second == Approx(2.6564).margin(5e-4));

    // period p just below, 2p just above at tolerance scale
    OrbitOptions o;
    o.transient = 200000;
    o.samples = 512;
    o.max_period = 128;
    o.rel_tol = 1e-6;
    CHECK(*iterate_orbit(f, first - 2e-3, {0.5, 0.0}, o).period == 2);
    CHECK(*iterate_orbit(f, first + 2e-3, {0.5, 0.0}, o).period == 4);

    try {
        (void)refine_flip(f, 2.1, 2.3, 1e-6);
        FAIL("expected no flip");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::no_flip_in_bracket);
    }
}

TEST_CASE("refine_flip on map 2", "[bifurcation]") {
    const MapFamily f = MapFamily::second(reference_map2);
    CHECK(refine_flip(f, 1.7, 1.86, 1e-6) == Approx(1.84664).margin(5e-4));
}

TEST_CASE("scan_cascade on the reduced map", "[bifurcation]") {
    const MapFamily f = MapFamily::reduced();
    ScanOptions opt;
    opt.keep_samples = 16;
    const ScanResult r = scan_cascade(f, {1.5, 2.85}, 270, opt);
    CHECK(r.cells.size() == 270);
    CHECK(r.parameter_grid().front() == 1.5);
    CHECK(r.parameter_grid().back() == 2.85);
    REQUIRE(r.flip_points.size() >= 3);
    CHECK(std::is_sorted(r.flip_points.begin(), r.flip_points.end()));
    CHECK(std::adjacent_find(r.flip_points.begin(), r.flip_points.end()) == r.flip_points.end());
    CHECK(r.flip_points[0] == Approx(2.0).margin(1e-2));
    CHECK(r.flip_points[1] == Approx(2.5265).margin(5e-4));
    CHECK(r.flip_points[2] == Approx(2.6564).margin(5e-4));
    const double width = 1.35 / 269.0;
    CHECK(std::abs(r.flip_points[1] - refine_flip(f, 2.0, 2.6, 1e-6)) <= 2 * width);
    REQUIRE(r.chaos_onset);
    CHECK(*r.chaos_onset == Approx(2.6924).margin(2 * width));

    SECTION("single-cell scan") {
        const ScanResult s = scan_cascade(f, {2.4, 2.4}, 50, opt);
        CHECK(s.cells.size() == 1);
        CHECK(*s.cells[0].period == 2);
    }
}

TEST_CASE("scan_cascade on map 2", "[bifurcation]") {
    const MapFamily f = MapFamily::second(reference_map2);
    ScanOptions opt;
    opt.keep_samples = 8;
    const ScanResult r = scan_cascade(f, {1.6, 1.9}, 301, opt);
    REQUIRE(r.flip_points.size() >= 3);
    CHECK(r.flip_points[0] == Approx(1.65685).margin(1e-3));
    CHECK(r.flip_points[1] == Approx(1.84664).margin(5e-4));
    CHECK(r.flip_points[2] == Approx(1.87434).margin(5e-4));
    // the last cells are captured by the zero ray
    CHECK(r.cells.back().underflow_events >= 1);
    CHECK_FALSE(r.cells.back().lyapunov_reliable);
}

TEST_CASE("Feigenbaum-like shrinking of the flip intervals", "[bifurcation][property]") {
    const MapFamily f = MapFamily::reduced();
    const double f1 = 2.0;
    const double f2 = refine_flip(f, 2.2, 2.6, 1e-7);
    const double f3 = refine_flip(f, 2.6, 2.67, 1e-7);
    const double f4 = refine_flip(f, 2.67, 2.688, 1e-7);
    const double f5 = refine_flip(f, 2.688, 2.6915, 1e-7);
    CHECK((f2 - f1) / (f3 - f2) > 3.0);
    CHECK((f3 - f2) / (f4 - f3) > 3.0);
    CHECK((f4 - f3) / (f5 - f4) > 3.0);
}

TEST_CASE("orbits are deterministic", "[bifurcation][property]") {
    const MapFamily f = MapFamily::second(reference_map2);
    const OrbitSummary a = iterate_orbit(f, 1.87, f.default_start(1.87));
    const OrbitSummary b = iterate_orbit(f, 1.87, f.default_start(1.87));
    CHECK(a.samples == b.samples);
    CHECK(a.lyapunov == b.lyapunov);
}
