#include "catch_amalgamated.hpp"

#include "levelctl/closedloop.hpp"

#include <cmath>
#include <random>

using namespace levelctl;
using Catch::Approx;

namespace {

LoopConfig reference_alg2(double dt = 1.0) {
    LoopConfig c;
    c.algorithm = Algorithm::alg2;
    c.plant = {0.2, 0.25};
    c.controller.lambda_tilde = 4.0;
    c.controller.Q_setpoint = 1.0;
    c.controller.delta_N_init = 0.5;
    c.controller.dt_schedule = {dt};
    c.initial = make_state(c.plant, 0.0, 2.0, 1.0);
    return c;
}

LoopConfig slow_alg1(double dt) {
    LoopConfig c;
    c.algorithm = Algorithm::alg1;
    c.plant = {0.2, 0.02};
    c.controller.lambda_tilde = 1.0;
    c.controller.Q_setpoint = 1.0;
    c.controller.delta_N_init = 0.5;
    c.controller.dt_schedule = {dt};
    c.initial = make_state(c.plant, 0.0, 2.0, 1.0);
    return c;
}

/// Real-mode template: ramped control and finite-difference measurement.
LoopConfig real_mode(Algorithm alg, PlantMode plant) {
    LoopConfig c;
    c.algorithm = alg;
    c.plant_mode = plant;
    c.measurement_mode = MeasurementMode::finite_difference;
    c.plant = {0.2, 0.02};
    c.controller.lambda_tilde = 1.0;
    c.controller.Q_setpoint = 1.0;
    c.controller.delta_N_init = 0.16;
    c.initial = make_state(c.plant, 0.0, 2.0, 1.0);
    c.steps = 0;
    return c;
}

}  // namespace

TEST_CASE("Algorithm 2 on the idealized plant settles at its fixed point", "[closedloop]") {
    LoopConfig c = reference_alg2();
    c.steps = 200;
    const Trajectory t = run_loop(c);
    REQUIRE(t.records.size() == 201);
    CHECK_FALSE(t.truncated);
    CHECK(t.records.back().Q == Approx(1.125).margin(1e-6));
    CHECK(t.records.back().lambda == Approx(0.125).margin(1e-6));
}

TEST_CASE("Algorithm 1 with a small step approaches the setpoint monotonically", "[closedloop]") {
    LoopConfig c = slow_alg1(0.25);
    c.steps = 400;
    const Trajectory t = run_loop(c);
    const std::vector<double> qs = control_instant_Q(t);
    REQUIRE(qs.size() > 100);
    for (std::size_t k = 3; k + 1 < qs.size(); ++k) CHECK(std::abs(qs[k + 1] - 1.0) <= std::abs(qs[k] - 1.0) + 1e-15);
    CHECK(qs.back() == Approx(1.0).margin(1e-9));

    // oracle: the map iterated from the first converged control instant
    const Map1Params mp = map1_params_for(c);
    const Record& r = t.records[t.record_of_step(4)];
    MapPoint x{r.Q, r.lambda};
    for (std::size_t i = 4; i + 2 <= 400; i += 2) {
        const Record& rec = t.records[t.record_of_step(i)];
        CHECK(std::abs(rec.Q - x.Q) <= 1e-10 * x.Q);
        x = map1_step(x, mp);
    }
}

TEST_CASE("zero steps gives the initial record only", "[closedloop]") {
    LoopConfig c = slow_alg1(0.5);
    c.steps = 0;
    const Trajectory t = run_loop(c);
    REQUIRE(t.records.size() == 1);
    CHECK(t.records[0].Q == 2.0);
    CHECK(t.records[0].step == 0);
}

TEST_CASE("loop configuration is validated", "[closedloop]") {
    LoopConfig c = real_mode(Algorithm::modified2, PlantMode::exact);
    CHECK_THROWS_AS(run_loop(c), Error);
    c = real_mode(Algorithm::modified2, PlantMode::ramped);
    c.measurement_mode = MeasurementMode::instantaneous;
    CHECK_THROWS_AS(run_loop(c), Error);
    c = reference_alg2();
    c.plant_mode = PlantMode::ramped;
    CHECK_THROWS_AS(run_loop(c), Error);
}

TEST_CASE("overflow truncates the trajectory with an event", "[closedloop]") {
    LoopConfig c = reference_alg2(40.0);
    c.controller.delta_N_init = 0.01;  // wildly over-aggressive
    c.initial = make_state(c.plant, 0.0, 0.5, 1.0);  // below the setpoint: the first push overflows
    c.steps = 50;
    const Trajectory t = run_loop(c);
    CHECK(t.truncated);
    REQUIRE_FALSE(t.events.empty());
    CHECK(is_fatal(t.events.back().event));
    CHECK(is_fatal(t.records.back().event));
}

TEST_CASE("computer zero is recorded, not fatal", "[closedloop]") {
    LoopConfig c = reference_alg2(1.89);
    c.steps = 2000;
    const MapPoint fp = fixed_point_map2(map2_params_for(c));
    c.initial = make_state(c.plant, 0.0, 1.01 * fp.Q, 0.99 * fp.lambda / c.plant.delta_N);
    const Trajectory t = run_loop(c);
    CHECK_FALSE(t.truncated);
    bool seen = false;
    for (const EventMarker& e : t.events) seen = seen || e.event == LoopEvent::computer_zero;
    CHECK(seen);
    CHECK(t.records.back().Q == 0.0);
}

TEST_CASE("time stamps are t0 plus the summed schedule", "[closedloop][property]") {
    LoopConfig c = slow_alg1(0.1);
    c.initial = make_state(c.plant, 3.0, 2.0, 1.0);
    c.controller.dt_schedule = {0.3, 0.1, 0.7, 0.2};
    c.steps = 25;
    const Trajectory t = run_loop(c);
    double elapsed = 0.0;
    for (std::size_t i = 1; i < t.records.size(); ++i) {
        elapsed += c.controller.step_duration(i);
        CHECK(t.records[i].t == 3.0 + elapsed);
        CHECK(t.records[i].t > t.records[i - 1].t);
    }
}

TEST_CASE("idealized loops match their maps", "[closedloop][property]") {
    Catch::SimplePcg32 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        LoopConfig c1 = slow_alg1(0.2 + 0.8 * u(rng));
        c1.plant = {0.1 + u(rng), 0.3 * (u(rng) - 0.5)};
        c1.controller.delta_N_init = c1.plant.delta_N * (1.0 + u(rng));
        c1.initial = make_state(c1.plant, 0.0, 0.5 + u(rng), u(rng));
        c1.steps = 200;
        const EquivalenceResult r1 = map_equivalence_check(c1, map1_params_for(c1));
        CHECK(r1.compared >= 90);
        CHECK(r1.max_residual < 1e-10);

        LoopConfig c2 = reference_alg2(0.2 + u(rng));
        c2.plant = {0.1 + 0.3 * u(rng), 0.5 * (u(rng) - 0.5)};
        c2.controller.delta_N_init = 0.3 + u(rng);
        c2.initial = make_state(c2.plant, 0.0, 0.5 + u(rng), u(rng));
        c2.steps = 200;
        const EquivalenceResult r2 = map_equivalence_check(c2, map2_params_for(c2));
        CHECK(r2.compared == 200);
        CHECK(r2.max_residual < 1e-10);
    }
}

TEST_CASE("equivalence check requires idealized mode", "[closedloop]") {
    const LoopConfig c = real_mode(Algorithm::modified1, PlantMode::ramped);
    try {
        (void)map_equivalence_check(c, map1_params_for(c));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::requires_idealized_mode);
    }
}

TEST_CASE("real-mode map residual in Q shrinks with the step", "[closedloop]") {
    // Q deviates from the map at first order in dt. The rate residual does
    // not shrink during the transient: a finite-difference rate lags a ramp
    // by delta_N dN / 2, and the early controls dN are O(1).
    double previous = 0.0;
    for (double dt : {0.2, 0.1, 0.05, 0.025}) {
        LoopConfig c = real_mode(Algorithm::modified2, PlantMode::ramped);
        c.controller.dt_schedule = {dt};
        c.steps = 40;
        const EquivalenceResult r = map_residual(run_loop(c), map2_params_for(c), 1);
        CHECK(r.max_Q_residual > 0.0);
        if (previous > 0.0) {
            const double ratio = previous / r.max_Q_residual;
            CHECK(ratio > 1.7);
            CHECK(ratio < 2.5);
        }
        previous = r.max_Q_residual;
    }
}

TEST_CASE("Algorithm 1 stays inside the attractor rectangle", "[closedloop][property]") {
    for (double dt : {0.7, 0.95, 1.2, 1.35}) {
        LoopConfig c = slow_alg1(dt);
        c.controller.delta_N_init = 0.2;
        c.steps = 600;
        const Trajectory t = run_loop(c);
        REQUIRE_FALSE(t.truncated);
        const AttractorRectangle box = attractor_rectangle(map1_params_for(c));
        // the box is forward invariant once entered (cascade parameter >= 1)
        const std::vector<double> qs = control_instant_Q(t);
        bool inside = false;
        for (std::size_t k = 2; k < qs.size(); ++k) {
            if (inside) CHECK(box.Q.contains(qs[k], 1e-9));
            inside = inside || box.Q.contains(qs[k]);
        }
        CHECK(inside);
    }
}

TEST_CASE("convergence study on the ramped plant", "[closedloop]") {
    const LoopConfig c = real_mode(Algorithm::modified2, PlantMode::ramped);
    const ConvergenceTable t = convergence_study(c, {0.4, 0.2, 0.1, 0.05});
    REQUIRE(t.rows.size() == 4);
    for (const ConvergenceRow& r : t.rows) CHECK(r.settled);
    CHECK(t.strictly_decreasing);
    CHECK(*t.rows.back().steady_error < 1e-3);

    const ConvergenceTable single = convergence_study(c, {0.1});
    CHECK(single.rows.size() == 1);
    CHECK_FALSE(single.strictly_decreasing);
}

TEST_CASE("convergence study on the two-variable ODE", "[closedloop]") {
    LoopConfig c = real_mode(Algorithm::modified2, PlantMode::ode);
    c.ode_substeps = 20;
    const ConvergenceTable t = convergence_study(c, {0.4, 0.2, 0.1, 0.05});
    REQUIRE(t.rows.size() == 4);
    CHECK(t.strictly_decreasing);
    CHECK(*t.rows.back().steady_error < 1e-3);
}

TEST_CASE("idealized runs are bit-for-bit reproducible", "[closedloop][property]") {
    LoopConfig c = reference_alg2(1.3);
    c.steps = 300;
    const Trajectory a = run_loop(c);
    const Trajectory b = run_loop(c);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].Q == b.records[i].Q);
        CHECK(a.records[i].N == b.records[i].N);
    }
}

TEST_CASE("modified Algorithm 1: the ramp biases the time-gain estimate", "[closedloop]") {
    // A finite-difference rate over an interval with a ramp carries only half
    // of that ramp's effect, so the next odd step sees delta_t + delta_N dN / (2 dt).
    // The even-step correction then works against the previous control and
    // the control sequence alternates with growing magnitude at any step size.
    for (double dt : {0.2, 0.1, 0.05}) {
        LoopConfig c = real_mode(Algorithm::modified1, PlantMode::ramped);
        c.controller.dt_schedule = {dt};
        c.steps = 60;
        const Trajectory t = run_loop(c);
        std::size_t first = 0;
        for (std::size_t i = 1; i < t.records.size() && first == 0; ++i) {
            if (t.records[i].dN != 0.0) first = i;
        }
        REQUIRE(first > 0);
        REQUIRE(first + 1 < t.records.size());
        const double predicted = c.plant.delta_t + c.plant.delta_N * t.records[first].dN / (2.0 * dt);
        CHECK(t.records[first + 1].delta_t_est == Approx(predicted).epsilon(0.02));
        // the first gain update sees only half of the ramp as well
        CHECK(t.records[first].delta_N_est == Approx(c.plant.delta_N / 2.0).epsilon(0.02));

        std::vector<double> controls;
        for (const Record& r : t.records) {
            if (r.dN != 0.0) controls.push_back(r.dN);
        }
        REQUIRE(controls.size() >= 5);
        for (std::size_t k = 1; k < 5; ++k) {
            CHECK(controls[k] * controls[k - 1] < 0.0);
            CHECK(std::abs(controls[k]) > std::abs(controls[k - 1]));
        }
    }
}
