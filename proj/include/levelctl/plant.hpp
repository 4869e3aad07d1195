#pragma once

// Idealized controlled system Q' = (delta_N * N + delta_t * t) * Q, solved in
// closed form, plus a fixed-step RK4 integrator for general systems that only
// follow the same rule approximately.

#include "levelctl/error.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace levelctl {

using Vector = std::vector<double>;

struct PlantParams {
    double delta_N = 1.0;  // control gain, 1/(time * N-unit)
    double delta_t = 0.0;  // drift of the growth rate, 1/time^2

    void validate() const {
        detail::require(std::isfinite(delta_N) && std::isfinite(delta_t), "plant coefficients must be finite");
        detail::require(delta_N != 0.0, "delta_N must be nonzero");
    }
};

/// Growth rate lambda = Q'/Q of the idealized plant. The constant term of the
/// general rate law is absorbed into the origin of N.
[[nodiscard]] constexpr double growth_rate(const PlantParams& p, double N, double t) noexcept {
    return p.delta_N * N + p.delta_t * t;
}

struct PlantState {
    double t = 0.0;
    double Q = 1.0;
    double N = 0.0;
    double lambda = 0.0;
    bool computer_zero = false;  // Q underflowed to exactly 0 at some point
};

/// Builds a state whose lambda is consistent with (N, t).
[[nodiscard]] inline PlantState make_state(const PlantParams& p, double t, double Q, double N) {
    return PlantState{t, Q, N, growth_rate(p, N, t), Q == 0.0};
}

namespace detail {

inline void check_state(const PlantState& s) {
    require(std::isfinite(s.t) && std::isfinite(s.N), "state time and control must be finite");
    require(std::isfinite(s.Q) && s.Q >= 0.0, "state quantity must be finite and non-negative");
}

// Q * exp(log_gain) with overflow reported and underflow flagged.
inline PlantState advance(PlantState s, double log_gain, double t_new, double N_new, const PlantParams& p) {
    const double Q_new = s.Q * std::exp(log_gain);
    if (!std::isfinite(Q_new)) {
        throw Error(ErrorKind::quantity_overflow, "Q * exp(" + std::to_string(log_gain) + ")");
    }
    if (Q_new == 0.0 && s.Q != 0.0) s.computer_zero = true;
    s.Q = Q_new;
    s.t = t_new;
    s.N = N_new;
    s.lambda = growth_rate(p, N_new, t_new);
    return s;
}

}  // namespace detail

/// Exact evolution over dt with N held fixed.
[[nodiscard]] inline PlantState evolve_exact(const PlantState& state, const PlantParams& params, double dt) {
    params.validate();
    detail::check_state(state);
    detail::require(std::isfinite(dt) && dt >= 0.0, "dt must be finite and >= 0");
    // ln Q gains lambda(t) dt + delta_t dt^2 / 2; the same integral as the
    // textbook ratio of exponentials without squaring absolute times.
    const double lambda0 = growth_rate(params, state.N, state.t);
    const double log_gain = lambda0 * dt + 0.5 * params.delta_t * dt * dt;
    return detail::advance(state, log_gain, state.t + dt, state.N, params);
}

/// Instantaneous control: N += dN. Q and t are untouched; lambda jumps by delta_N * dN.
[[nodiscard]] inline PlantState apply_impulse(PlantState state, const PlantParams& params, double dN) {
    detail::require(std::isfinite(dN), "dN must be finite");
    state.N += dN;
    state.lambda = growth_rate(params, state.N, state.t);
    return state;
}

/// Evolution over dt while N moves linearly from N to N + dN_total.
[[nodiscard]] inline PlantState evolve_ramped(const PlantState& state, const PlantParams& params, double dt,
                                              double dN_total) {
    params.validate();
    detail::check_state(state);
    detail::require(std::isfinite(dt) && dt > 0.0, "ramped evolution needs dt > 0");
    detail::require(std::isfinite(dN_total), "dN_total must be finite");
    const double lambda0 = growth_rate(params, state.N, state.t);
    const double log_gain = lambda0 * dt + 0.5 * params.delta_N * dN_total * dt + 0.5 * params.delta_t * dt * dt;
    return detail::advance(state, log_gain, state.t + dt, state.N + dN_total, params);
}

/// General system dx/dt = rhs(t, x) with designated Q and N components.
struct OdeSystem {
    std::size_t dimension = 2;
    std::function<Vector(double, const Vector&)> rhs;
    std::size_t q_index = 0;
    std::size_t n_index = 1;

    void validate() const {
        detail::require(dimension >= 2, "ODE dimension must be >= 2");
        detail::require(q_index < dimension && n_index < dimension, "Q/N indices out of range");
        detail::require(q_index != n_index, "Q and N indices must differ");
        detail::require(static_cast<bool>(rhs), "ODE right-hand side is empty");
    }
};

/// The two-variable system Q' = delta_N N Q, N' = delta_t / delta_N.
/// Its Q follows the idealized rule with lambda = delta_N * N(t).
[[nodiscard]] inline OdeSystem drifting_control_system(const PlantParams& params) {
    params.validate();
    OdeSystem sys;
    sys.dimension = 2;
    sys.q_index = 0;
    sys.n_index = 1;
    sys.rhs = [p = params](double, const Vector& x) {
        return Vector{p.delta_N * x[1] * x[0], p.delta_t / p.delta_N};
    };
    return sys;
}

namespace detail {

inline Vector eval_rhs(const OdeSystem& system, double t, const Vector& x) {
    Vector dx = system.rhs(t, x);
    if (dx.size() != system.dimension) {
        throw Error(ErrorKind::integration_failure, "right-hand side returned wrong dimension");
    }
    for (double v : dx) {
        if (!std::isfinite(v)) throw Error(ErrorKind::integration_failure, "non-finite derivative");
    }
    return dx;
}

inline Vector axpy(const Vector& x, double h, const Vector& k) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * k[i];
    return out;
}

}  // namespace detail

/// One classical fourth-order Runge-Kutta step.
[[nodiscard]] inline Vector rk4_step(const OdeSystem& system, double t, const Vector& state, double h) {
    system.validate();
    detail::require(state.size() == system.dimension, "state has wrong dimension");
    detail::require(std::isfinite(h) && h > 0.0, "RK4 step must be > 0");

    const Vector k1 = detail::eval_rhs(system, t, state);
    const Vector k2 = detail::eval_rhs(system, t + 0.5 * h, detail::axpy(state, 0.5 * h, k1));
    const Vector k3 = detail::eval_rhs(system, t + 0.5 * h, detail::axpy(state, 0.5 * h, k2));
    const Vector k4 = detail::eval_rhs(system, t + h, detail::axpy(state, h, k3));

    Vector out(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        out[i] = state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(out[i])) throw Error(ErrorKind::integration_failure, "non-finite state after step");
    }
    return out;
}

/// Integrates over `duration` with `substeps` equal RK4 steps.
[[nodiscard]] inline Vector rk4_integrate(const OdeSystem& system, double t, Vector state, double duration,
                                          std::size_t substeps) {
    detail::require(substeps >= 1, "need at least one substep");
    detail::require(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
    const double h = duration / static_cast<double>(substeps);
    for (std::size_t k = 0; k < substeps; ++k) {
        state = rk4_step(system, t + static_cast<double>(k) * h, state, h);
    }
    return state;
}

}  // namespace levelctl
