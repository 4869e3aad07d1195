#pragma once

// Closed-loop maps induced by the two controllers on the idealized plant.
//
// Map 1 (Algorithm 1, one full odd/even cycle of length 2 dt):
//     Q'      = Q exp(2 dt lambda_tilde (1 - Q / Q_setpoint))
//     lambda' = lambda_tilde (1 - Q / Q_setpoint) + delta_t dt
// With q = Q / Q_setpoint it reduces to the Ricker-type map q exp(a (1 - q)),
// a = 2 dt lambda_tilde ("cascade parameter").
//
// Map 2 (Algorithm 2, one step of length dt), with gain ratio
// a = delta_N / delta_N_tilde and rate ratio b = lambda_tilde / Q_setpoint:
//     dN      = (lambda_tilde (1 - Q / Q_setpoint) - lambda) / delta_N_tilde
//     Q'      = Q exp(lambda dt + delta_N dN dt + delta_t dt^2 / 2)
//     lambda' = lambda + delta_N dN + delta_t dt

#include "levelctl/error.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>

namespace levelctl {

struct MapPoint {
    double Q = 0.0;
    double lambda = 0.0;

    friend bool operator==(const MapPoint&, const MapPoint&) = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x, double slack = 0.0) const noexcept {
        return x >= lo - slack && x <= hi + slack;
    }
};

using Jacobian = std::array<std::array<double, 2>, 2>;
using EigenPair = std::array<std::complex<double>, 2>;

struct Map1Params {
    double lambda_tilde = 1.0;
    double Q_setpoint = 1.0;
    double delta_t = 0.0;
    double dt = 0.5;

    [[nodiscard]] double cascade_parameter() const noexcept { return 2.0 * dt * lambda_tilde; }

    void validate() const {
        detail::require(std::isfinite(lambda_tilde) && lambda_tilde > 0.0, "lambda_tilde must be > 0");
        detail::require(std::isfinite(Q_setpoint) && Q_setpoint > 0.0, "Q_setpoint must be > 0");
        detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
        detail::require(std::isfinite(delta_t), "delta_t must be finite");
    }
};

struct Map2Params {
    double lambda_tilde = 4.0;
    double Q_setpoint = 1.0;
    double delta_t = 0.25;
    double delta_N = 0.2;
    double delta_N_tilde = 0.5;
    double dt = 1.0;

    [[nodiscard]] double gain_ratio() const noexcept { return delta_N / delta_N_tilde; }
    [[nodiscard]] double rate_ratio() const noexcept { return lambda_tilde / Q_setpoint; }

    void validate() const {
        detail::require(std::isfinite(lambda_tilde) && lambda_tilde > 0.0, "lambda_tilde must be > 0");
        detail::require(std::isfinite(Q_setpoint) && Q_setpoint > 0.0, "Q_setpoint must be > 0");
        detail::require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
        detail::require(std::isfinite(delta_t), "delta_t must be finite");
        detail::require(std::isfinite(delta_N) && std::isfinite(delta_N_tilde) && delta_N_tilde != 0.0,
                        "gains must be finite, delta_N_tilde nonzero");
        detail::require(gain_ratio() > 0.0, "gain ratio delta_N / delta_N_tilde must be > 0");
    }
};

struct StabilityReport {
    MapPoint fixed_point;
    EigenPair eigenvalues{};
    bool stable = false;                  // both |eigenvalue| < 1
    bool conscious = true;                // fixed point has Q > 0
    std::optional<bool> small_step_stable;  // map 2 only: verdict for all small dt
    std::optional<double> critical_dt;
    Interval dt_validity{0.0, std::numeric_limits<double>::infinity()};
    std::string note;
};

namespace detail {

inline double checked_exp_product(double Q, double exponent) {
    const double out = Q * std::exp(exponent);
    if (!std::isfinite(out)) throw Error(ErrorKind::quantity_overflow, "Q * exp(" + std::to_string(exponent) + ")");
    return out;
}

inline bool eigen_stable(const EigenPair& e) noexcept { return std::abs(e[0]) < 1.0 && std::abs(e[1]) < 1.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Map 1 and its one-dimensional reduction

[[nodiscard]] inline MapPoint map1_step(const MapPoint& p, const Map1Params& params) {
    const double target = params.lambda_tilde * (1.0 - p.Q / params.Q_setpoint);
    return {detail::checked_exp_product(p.Q, 2.0 * params.dt * target), target + params.delta_t * params.dt};
}

[[nodiscard]] inline double reduced_map_step(double q, double a) noexcept { return q * std::exp(a * (1.0 - q)); }

[[nodiscard]] inline double reduced_map_derivative(double q, double a) noexcept {
    return std::exp(a * (1.0 - q)) * (1.0 - a * q);
}

[[nodiscard]] inline Jacobian map1_jacobian(const MapPoint& p, const Map1Params& params) noexcept {
    const double a = params.cascade_parameter();
    const double q = p.Q / params.Q_setpoint;
    return Jacobian{{{reduced_map_derivative(q, a), 0.0}, {-params.lambda_tilde / params.Q_setpoint, 0.0}}};
}

[[nodiscard]] inline MapPoint fixed_point_map1(const Map1Params& params) {
    return {params.Q_setpoint, params.delta_t * params.dt};
}

/// Eigenvalues (1 - a, 0); stable iff dt < 1 / lambda_tilde.
[[nodiscard]] inline StabilityReport stability_map1(const Map1Params& params) {
    params.validate();
    StabilityReport r;
    r.fixed_point = fixed_point_map1(params);
    r.eigenvalues = {std::complex<double>(1.0 - params.cascade_parameter(), 0.0), std::complex<double>(0.0, 0.0)};
    r.stable = detail::eigen_stable(r.eigenvalues);
    r.critical_dt = 1.0 / params.lambda_tilde;
    return r;
}

/// Extremes of the reduced map for a > 0: q_max = f(1/a), q_min = f(q_max).
struct ReducedBounds {
    double q_min = 0.0;
    double q_max = 0.0;
};

[[nodiscard]] inline ReducedBounds reduced_bounds(double a) {
    detail::require(std::isfinite(a) && a > 0.0, "cascade parameter must be > 0");
    const double q_max = std::exp(a - 1.0) / a;
    return {reduced_map_step(q_max, a), q_max};
}

struct AttractorRectangle {
    Interval Q;
    Interval lambda;
};

/// Box holding every attracting set of map 1 (meaningful for a > 2; for
/// a <= 2 it still bounds the orbit after its first pass through q_max).
[[nodiscard]] inline AttractorRectangle attractor_rectangle(const Map1Params& params) {
    params.validate();
    const ReducedBounds b = reduced_bounds(params.cascade_parameter());
    const double Q_max = params.Q_setpoint * b.q_max;
    const double Q_min = params.Q_setpoint * b.q_min;
    const double shift = params.delta_t * params.dt;
    return {{Q_min, Q_max},
            {params.lambda_tilde * (1.0 - Q_max / params.Q_setpoint) + shift,
             params.lambda_tilde * (1.0 - Q_min / params.Q_setpoint) + shift}};
}

/// Curve in the (Q, lambda) plane carrying every image point of map 1.
[[nodiscard]] inline double invariant_curve_Q(double lambda, const Map1Params& params) noexcept {
    const double shifted = lambda - params.delta_t * params.dt;
    return params.Q_setpoint * (1.0 - shifted / params.lambda_tilde) * std::exp(2.0 * params.dt * shifted);
}

// ---------------------------------------------------------------------------
// Map 2

[[nodiscard]] inline MapPoint map2_step(const MapPoint& p, const Map2Params& params) {
    const double target = params.lambda_tilde * (1.0 - p.Q / params.Q_setpoint);
    const double dN = (target - p.lambda) / params.delta_N_tilde;
    const double jump = params.delta_N * dN;
    const double dt = params.dt;
    const double exponent = p.lambda * dt + jump * dt + 0.5 * params.delta_t * dt * dt;
    // Q == 0 stays on the zero ray whatever the exponent.
    const double Q_next = p.Q == 0.0 ? 0.0 : detail::checked_exp_product(p.Q, exponent);
    return {Q_next, p.lambda + jump + params.delta_t * dt};
}

[[nodiscard]] inline Jacobian map2_jacobian(const MapPoint& p, const Map2Params& params) noexcept {
    const double a = params.gain_ratio();
    const double b = params.rate_ratio();
    const double dt = params.dt;
    const double target = params.lambda_tilde * (1.0 - p.Q / params.Q_setpoint);
    const double exponent = ((1.0 - a) * p.lambda + a * target) * dt + 0.5 * params.delta_t * dt * dt;
    const double growth = std::exp(exponent);
    return Jacobian{{{growth * (1.0 - a * b * p.Q * dt), p.Q * growth * (1.0 - a) * dt}, {-a * b, 1.0 - a}}};
}

/// Positive fixed point; throws fixed_point_not_conscious when its Q <= 0.
[[nodiscard]] inline MapPoint fixed_point_map2(const Map2Params& params) {
    params.validate();
    const double a = params.gain_ratio();
    const double Q_bar =
        params.Q_setpoint * (1.0 - params.delta_t * params.dt * (0.5 - 1.0 / a) / params.lambda_tilde);
    if (!(Q_bar > 0.0)) {
        throw Error(ErrorKind::fixed_point_not_conscious, "Q_bar = " + std::to_string(Q_bar));
    }
    return {Q_bar, 0.5 * params.delta_t * params.dt};
}

/// Range of dt on which the positive fixed point exists (Q_bar > 0).
struct ValidityInterval {
    Interval dt;
    char case_label = 'c';  // 'a': delta_t > 0, a > 2; 'b': delta_t < 0, 0 < a < 2; 'c': unrestricted
};

[[nodiscard]] inline ValidityInterval dt_validity_map2(const Map2Params& params) {
    const double a = params.gain_ratio();
    const double inf = std::numeric_limits<double>::infinity();
    const bool case_a = params.delta_t > 0.0 && a > 2.0;
    const bool case_b = params.delta_t < 0.0 && a > 0.0 && a < 2.0;
    if (case_a || case_b) {
        return {{0.0, params.lambda_tilde / (params.delta_t * (0.5 - 1.0 / a))}, case_a ? 'a' : 'b'};
    }
    return {{0.0, inf}, 'c'};
}

/// Eigenvalues at the positive fixed point as a function of h = Q_bar dt.
[[nodiscard]] inline EigenPair eigenvalues_map2_at(double a, double b, double h) {
    using C = std::complex<double>;
    const C radicand(a * (h * h * a * b * b + h * 2.0 * b * (a - 2.0) + a), 0.0);
    const C root = std::sqrt(radicand);
    const double centre = (2.0 - a) - h * a * b;
    return {(centre + root) / 2.0, (centre - root) / 2.0};
}

[[nodiscard]] inline EigenPair eigenvalues_map2(const Map2Params& params) {
    const MapPoint fp = fixed_point_map2(params);
    return eigenvalues_map2_at(params.gain_ratio(), params.rate_ratio(), fp.Q * params.dt);
}

/// Step at which the positive fixed point loses stability through an
/// eigenvalue -1, i.e. where h(dt) = Q_bar(dt) dt reaches 2 (2 - a) / (a b).
/// Empty when that level is never reached.
[[nodiscard]] inline std::optional<double> critical_dt_map2(const Map2Params& params) {
    const double a = params.gain_ratio();
    const double b = params.rate_ratio();
    const double Qs = params.Q_setpoint;
    if (!(a < 2.0)) return std::nullopt;
    const double c = params.delta_t * (0.5 - 1.0 / a);
    double radicand = Qs * Qs - 8.0 * c * (2.0 - a) / (a * b * b);
    constexpr double radicand_tol = 1e-14;
    if (radicand < -radicand_tol) return std::nullopt;
    if (radicand < radicand_tol) radicand = 0.0;
    // Rationalized smaller root of (c / b) dt^2 - Qs dt + h0 = 0; stays
    // accurate as c -> 0, where it tends to h0 / Qs.
    const double dt0 = 4.0 * (2.0 - a) / (a * b * (Qs + std::sqrt(radicand)));
    if (!(dt0 > 0.0) || !std::isfinite(dt0)) return std::nullopt;
    return dt0;
}

[[nodiscard]] inline StabilityReport stability_map2(const Map2Params& params) {
    params.validate();
    const double a = params.gain_ratio();
    const double b = params.rate_ratio();
    StabilityReport r;
    // At h = 0 the eigenvalues are 1 and 1 - a, and d(theta_1)/dh = -b < 0,
    // so small steps are stable exactly when 0 < a < 2, whatever a b is.
    r.small_step_stable = a < 2.0;
    if (a < 2.0 && a * b <= 1.0) {
        r.note = "a b <= 1: small steps are still stable (theta_1 = 1 - b h + O(h^2)), but only weakly";
    }
    r.critical_dt = critical_dt_map2(params);
    const ValidityInterval validity = dt_validity_map2(params);
    r.dt_validity = validity.dt;
    if (validity.case_label == 'a') {
        if (!r.note.empty()) r.note += "; ";
        r.note += "validity case a (delta_t > 0, a > 2) lies outside the small-step stability region a < 2";
    }
    try {
        r.fixed_point = fixed_point_map2(params);
        r.eigenvalues = eigenvalues_map2(params);
        r.stable = detail::eigen_stable(r.eigenvalues);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::fixed_point_not_conscious) throw;
        r.conscious = false;
        r.stable = false;
        r.fixed_point = {params.Q_setpoint * (1.0 - params.delta_t * params.dt * (0.5 - 1.0 / a) / params.lambda_tilde),
                         0.5 * params.delta_t * params.dt};
        if (!r.note.empty()) r.note += "; ";
        r.note += "fixed point not conscious at this dt";
    }
    return r;
}

struct ZeroFixedPoint {
    MapPoint point;
    bool stable = false;
};

/// Fixed point on the invariant ray Q = 0.
[[nodiscard]] inline ZeroFixedPoint fixed_point_map2_zero(const Map2Params& params) {
    params.validate();
    const double a = params.gain_ratio();
    const double drift = params.delta_t * params.dt;
    const bool stable = params.delta_t < 0.0 && a < 2.0 * drift / (drift - 2.0 * params.lambda_tilde);
    return {{0.0, params.lambda_tilde + drift / a}, stable};
}

}  // namespace levelctl
