#pragma once

// Sampled feedback controllers. Both algorithms steer the growth rate toward
// lambda_tilde * (1 - Q / Q_setpoint); Algorithm 1 alternates a passive step
// (drift estimate) with an active step (control + gain re-estimate),
// Algorithm 2 acts every step with a fixed gain guess.
//
// Controllers only see Measurements, never plant internals.

#include "levelctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace levelctl {

struct ControllerConfig {
    double lambda_tilde = 1.0;
    double Q_setpoint = 1.0;
    double delta_N_init = 1.0;
    std::vector<double> dt_schedule{1.0};  // last entry repeats
    double n_scale = 1.0;                  // typical |N|, sets the gain-update guard

    void validate() const {
        detail::require(std::isfinite(lambda_tilde) && lambda_tilde > 0.0, "lambda_tilde must be > 0");
        detail::require(std::isfinite(Q_setpoint) && Q_setpoint > 0.0, "Q_setpoint must be > 0");
        detail::require(std::isfinite(delta_N_init) && delta_N_init != 0.0, "delta_N_init must be nonzero");
        detail::require(!dt_schedule.empty(), "dt schedule is empty");
        for (double dt : dt_schedule) detail::require(std::isfinite(dt) && dt > 0.0, "dt schedule entries must be > 0");
        detail::require(std::isfinite(n_scale), "n_scale must be finite");
    }

    /// Duration of interval `step` (1-based; 0 is the warm-up interval of the
    /// finite-difference variants and shares the first entry).
    [[nodiscard]] double step_duration(std::size_t step) const {
        const std::size_t k = step == 0 ? 0 : step - 1;
        return dt_schedule[std::min(k, dt_schedule.size() - 1)];
    }

    [[nodiscard]] double dn_epsilon() const noexcept { return 1e-12 * (1.0 + std::abs(n_scale)); }
};

/// Test-harness check of the Algorithm 1 gain requirement: same sign as the
/// true gain and at least as large in magnitude.
[[nodiscard]] inline bool gain_guess_admissible(double delta_N_guess, double delta_N_true) noexcept {
    return (delta_N_guess > 0.0) == (delta_N_true > 0.0) && std::abs(delta_N_guess) >= std::abs(delta_N_true);
}

struct Measurement {
    double Q = 1.0;
    double lambda = 0.0;
    double t = 0.0;
};

enum class Parity { odd, even };

struct Alg1State {
    Parity parity = Parity::odd;
    double delta_t_est = 0.0;
    double delta_N_est = 1.0;
    double last_lambda = 0.0;
    double last_Q = 0.0;
    double last_dN = 0.0;
    std::size_t step_index = 1;
};

[[nodiscard]] inline Alg1State alg1_init(const ControllerConfig& config) {
    config.validate();
    Alg1State s;
    s.delta_N_est = config.delta_N_init;
    return s;
}

struct Alg2State {
    double last_lambda = 0.0;
    double last_Q = 0.0;
};

[[nodiscard]] inline double target_lambda(const ControllerConfig& config, double Q) noexcept {
    return config.lambda_tilde * (1.0 - Q / config.Q_setpoint);
}

/// Passive step: N untouched, drift rate estimated from the lambda change.
[[nodiscard]] inline Alg1State alg1_odd_step(Alg1State state, const Measurement& prev, const Measurement& now) {
    const double dt = now.t - prev.t;
    if (!(dt > 0.0)) throw Error(ErrorKind::non_monotone_time, "odd step over dt = " + std::to_string(dt));
    state.delta_t_est = (now.lambda - prev.lambda) / dt;
    state.parity = Parity::even;
    state.last_lambda = now.lambda;
    state.last_Q = now.Q;
    state.last_dN = 0.0;
    ++state.step_index;
    return state;
}

struct Alg1Control {
    Alg1State state;
    double dN = 0.0;
};

/// Active step: control increment that should bring lambda to its target by
/// the end of the coming interval, correcting for the estimated drift.
[[nodiscard]] inline Alg1Control alg1_even_step(Alg1State state, const ControllerConfig& config,
                                                const Measurement& now) {
    detail::require(state.parity == Parity::even, "alg1_even_step called on an odd step");
    if (state.delta_N_est == 0.0) throw Error(ErrorKind::degenerate_gain);
    const double dt = config.step_duration(state.step_index);
    const double dN = (target_lambda(config, now.Q) - now.lambda - state.delta_t_est * dt) / state.delta_N_est;
    state.parity = Parity::odd;
    state.last_lambda = now.lambda;
    state.last_Q = now.Q;
    state.last_dN = dN;
    ++state.step_index;
    return {state, dN};
}

/// Gain re-estimate after the interval that followed an active step.
/// Skipped when the applied increment is below the guard.
[[nodiscard]] inline Alg1State alg1_gain_update(Alg1State state, const Measurement& prev, const Measurement& now,
                                                double dn_epsilon = 1e-12) {
    if (!(std::abs(state.last_dN) > dn_epsilon)) return state;
    const double dt = now.t - prev.t;
    const double estimate = ((now.lambda - prev.lambda) - state.delta_t_est * dt) / state.last_dN;
    if (std::isfinite(estimate) && estimate != 0.0) state.delta_N_est = estimate;
    return state;
}

struct Alg2Control {
    Alg2State state;
    double dN = 0.0;
};

[[nodiscard]] inline Alg2Control alg2_step(Alg2State state, const ControllerConfig& config, const Measurement& now) {
    if (config.delta_N_init == 0.0) throw Error(ErrorKind::degenerate_gain);
    const double dN = (target_lambda(config, now.Q) - now.lambda) / config.delta_N_init;
    state.last_lambda = now.lambda;
    state.last_Q = now.Q;
    return {state, dN};
}

/// Growth rate from two samples of Q: 2 (Q1 - Q0) / (dt (Q1 + Q0)).
[[nodiscard]] inline double lambda_finite_difference(double Q_now, double Q_prev, double dt) {
    detail::require(std::isfinite(dt) && dt > 0.0, "finite-difference dt must be > 0");
    const double sum = Q_now + Q_prev;
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw Error(ErrorKind::invalid_measurement, "Q_now + Q_prev = " + std::to_string(sum));
    }
    return 2.0 * (Q_now - Q_prev) / (dt * sum);
}

}  // namespace levelctl
