#pragma once

// Couples the controllers to a plant, records trajectories, checks them
// against the analytic closed-loop maps and runs step-size convergence studies.

#include "levelctl/controllers.hpp"
#include "levelctl/error.hpp"
#include "levelctl/maps.hpp"
#include "levelctl/plant.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace levelctl {

enum class PlantMode { exact, ramped, ode };
enum class MeasurementMode { instantaneous, finite_difference };
enum class Algorithm { alg1, alg2, modified1, modified2 };

[[nodiscard]] constexpr bool is_modified(Algorithm a) noexcept {
    return a == Algorithm::modified1 || a == Algorithm::modified2;
}
[[nodiscard]] constexpr bool is_first_algorithm(Algorithm a) noexcept {
    return a == Algorithm::alg1 || a == Algorithm::modified1;
}

struct LoopConfig {
    PlantMode plant_mode = PlantMode::exact;
    MeasurementMode measurement_mode = MeasurementMode::instantaneous;
    Algorithm algorithm = Algorithm::alg2;
    std::size_t steps = 100;
    PlantParams plant{};
    PlantState initial{};  // lambda is recomputed from (N, t)
    ControllerConfig controller{};
    std::optional<OdeSystem> ode;  // defaults to drifting_control_system(plant)
    std::size_t ode_substeps = 100;

    void validate() const {
        plant.validate();
        controller.validate();
        detail::check_state(initial);
        detail::require(initial.Q > 0.0, "initial Q must be > 0");
        if (is_modified(algorithm)) {
            detail::require(plant_mode == PlantMode::ramped || plant_mode == PlantMode::ode,
                            "modified algorithms need a ramped or ODE plant");
            detail::require(measurement_mode == MeasurementMode::finite_difference,
                            "modified algorithms need finite-difference measurement");
        } else {
            detail::require(plant_mode != PlantMode::ramped, "ramped control belongs to the modified algorithms");
        }
        if (plant_mode == PlantMode::ode) {
            detail::require(ode_substeps >= 1, "ode_substeps must be >= 1");
            if (ode) ode->validate();
        }
    }

    /// Control is spread uniformly over the interval for the modified algorithms.
    [[nodiscard]] bool ramped_control() const noexcept { return is_modified(algorithm); }
    [[nodiscard]] bool has_warmup() const noexcept {
        return measurement_mode == MeasurementMode::finite_difference;
    }
};

enum class LoopEvent { none, computer_zero, quantity_overflow, integration_failure, invalid_measurement, degenerate_gain };

[[nodiscard]] constexpr std::string_view to_string(LoopEvent e) noexcept {
    switch (e) {
        case LoopEvent::none: return "";
        case LoopEvent::computer_zero: return "computer_zero";
        case LoopEvent::quantity_overflow: return "quantity_overflow";
        case LoopEvent::integration_failure: return "integration_failure";
        case LoopEvent::invalid_measurement: return "invalid_measurement";
        case LoopEvent::degenerate_gain: return "degenerate_gain";
    }
    return "";
}

[[nodiscard]] constexpr bool is_fatal(LoopEvent e) noexcept {
    return e != LoopEvent::none && e != LoopEvent::computer_zero;
}

/// State at one sampling instant. `dN` is the increment applied over the
/// interval that ended here; estimates are those held after this instant's
/// updates (NaN for Algorithm 2, which estimates nothing).
struct Record {
    std::size_t step = 0;
    double t = 0.0;
    double Q = 0.0;
    double lambda = 0.0;           // true plant rate
    double lambda_measured = 0.0;  // what the controller saw
    double N = 0.0;
    double dN = 0.0;
    double delta_t_est = 0.0;
    double delta_N_est = 0.0;
    LoopEvent event = LoopEvent::none;
};

struct EventMarker {
    std::size_t step = 0;
    LoopEvent event = LoopEvent::none;
    std::string detail;
};

struct Trajectory {
    std::vector<Record> records;
    std::vector<EventMarker> events;
    bool truncated = false;  // a fatal event stopped the run
    bool has_warmup = false;  // records[0] is the zero (warm-up) instant
    Algorithm algorithm = Algorithm::alg2;

    /// Index of the record at which algorithm step `i` (1-based) is taken.
    [[nodiscard]] std::size_t record_of_step(std::size_t i) const noexcept { return has_warmup ? i : i - 1; }
};

namespace detail {

inline LoopEvent event_of(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::quantity_overflow: return LoopEvent::quantity_overflow;
        case ErrorKind::integration_failure: return LoopEvent::integration_failure;
        case ErrorKind::invalid_measurement: return LoopEvent::invalid_measurement;
        case ErrorKind::degenerate_gain: return LoopEvent::degenerate_gain;
        default: return LoopEvent::integration_failure;
    }
}

// Uniform interface over the three plant realizations.
class PlantDriver {
public:
    explicit PlantDriver(const LoopConfig& cfg) : cfg_(cfg) {
        if (cfg.plant_mode == PlantMode::ode) {
            system_ = cfg.ode ? *cfg.ode : drifting_control_system(cfg.plant);
            x_.assign(system_.dimension, 0.0);
            x_[system_.q_index] = cfg.initial.Q;
            x_[system_.n_index] = cfg.initial.N;
            t_ = cfg.initial.t;
        } else {
            state_ = make_state(cfg.plant, cfg.initial.t, cfg.initial.Q, cfg.initial.N);
        }
    }

    [[nodiscard]] double t() const noexcept { return ode() ? t_ : state_.t; }
    [[nodiscard]] double Q() const noexcept { return ode() ? x_[system_.q_index] : state_.Q; }
    [[nodiscard]] double N() const noexcept { return ode() ? x_[system_.n_index] : state_.N; }

    /// Instantaneous growth rate; for ODE plants read off the right-hand side.
    [[nodiscard]] double lambda() const {
        if (!ode()) return state_.lambda;
        const double q = Q();
        if (q == 0.0) return 0.0;
        return eval_rhs(system_, t_, x_)[system_.q_index] / q;
    }

    /// Applies dN (impulse or ramp) and evolves to absolute time t_end = t + dt.
    void advance(double dt, double dN, bool ramp, double t_end) {
        if (ode()) {
            OdeSystem sys = system_;
            if (ramp) {
                const double rate = dN / dt;
                const std::size_t n_idx = system_.n_index;
                sys.rhs = [base = system_.rhs, rate, n_idx](double t, const Vector& x) {
                    Vector dx = base(t, x);
                    if (n_idx < dx.size()) dx[n_idx] += rate;
                    return dx;
                };
            } else {
                x_[system_.n_index] += dN;
            }
            const double q_before = Q();
            x_ = rk4_integrate(sys, t_, x_, dt, cfg_.ode_substeps);
            if (x_[system_.q_index] < 0.0 && q_before >= 0.0) x_[system_.q_index] = 0.0;
            t_ = t_end;
            return;
        }
        if (ramp) {
            state_ = evolve_ramped(state_, cfg_.plant, dt, dN);
        } else {
            state_ = evolve_exact(apply_impulse(state_, cfg_.plant, dN), cfg_.plant, dt);
        }
        state_.t = t_end;
        state_.lambda = growth_rate(cfg_.plant, state_.N, state_.t);
    }

private:
    [[nodiscard]] bool ode() const noexcept { return cfg_.plant_mode == PlantMode::ode; }

    const LoopConfig& cfg_;
    PlantState state_{};
    OdeSystem system_{};
    Vector x_;
    double t_ = 0.0;
};

}  // namespace detail

/// Runs the configured controller against the configured plant for
/// `config.steps` algorithm steps (plus the warm-up interval in
/// finite-difference mode). Fatal numerical events end the run early; the
/// last record then carries the event.
[[nodiscard]] inline Trajectory run_loop(const LoopConfig& config) {
    config.validate();
    const ControllerConfig& cc = config.controller;
    const bool first_alg = is_first_algorithm(config.algorithm);
    const bool fd = config.measurement_mode == MeasurementMode::finite_difference;

    Trajectory traj;
    traj.has_warmup = config.has_warmup();
    traj.algorithm = config.algorithm;
    traj.records.reserve(config.steps + 2);

    detail::PlantDriver plant(config);
    Alg1State s1 = alg1_init(cc);
    Alg2State s2{};
    const double t0 = config.initial.t;
    double elapsed = 0.0;
    double Q_prev = plant.Q();
    double dt_prev = 0.0;
    bool zero_seen = false;

    auto estimates = [&](Record& r) {
        if (first_alg) {
            r.delta_t_est = s1.delta_t_est;
            r.delta_N_est = s1.delta_N_est;
        } else {
            r.delta_t_est = std::numeric_limits<double>::quiet_NaN();
            r.delta_N_est = cc.delta_N_init;
        }
    };

    auto measure = [&](bool have_prev) {
        Measurement m{plant.Q(), plant.lambda(), plant.t()};
        if (fd) m.lambda = have_prev ? lambda_finite_difference(m.Q, Q_prev, dt_prev) : 0.0;
        return m;
    };

    auto push_record = [&](std::size_t step, double dN, const Measurement& m) {
        Record r;
        r.step = step;
        r.t = plant.t();
        r.Q = plant.Q();
        r.lambda = plant.lambda();
        r.lambda_measured = m.lambda;
        r.N = plant.N();
        r.dN = dN;
        estimates(r);
        if (r.Q == 0.0 && !zero_seen) {
            zero_seen = true;
            r.event = LoopEvent::computer_zero;
            traj.events.push_back({step, LoopEvent::computer_zero, "Q underflowed to 0"});
        }
        traj.records.push_back(r);
    };

    auto fail = [&](const Error& e, std::size_t step) {
        const LoopEvent ev = detail::event_of(e.kind());
        traj.truncated = true;
        traj.events.push_back({step, ev, e.what()});
        if (!traj.records.empty() && traj.records.back().event == LoopEvent::none) traj.records.back().event = ev;
    };

    // Advances the plant over interval `interval_index` and returns the new measurement.
    auto advance = [&](std::size_t interval_index, double dN) {
        const double dt = cc.step_duration(interval_index);
        Q_prev = plant.Q();
        elapsed += dt;
        plant.advance(dt, dN, config.ramped_control() && dN != 0.0, t0 + elapsed);
        dt_prev = dt;
        return measure(true);
    };

    std::size_t record_step = 0;
    Measurement now = measure(false);
    push_record(record_step, 0.0, now);

    try {
        if (traj.has_warmup) {
            now = advance(0, 0.0);
            push_record(++record_step, 0.0, now);
        }
    } catch (const Error& e) {
        fail(e, record_step + 1);
        return traj;
    }

    for (std::size_t i = 1; i <= config.steps; ++i) {
        try {
            Measurement next;
            double dN = 0.0;
            if (first_alg) {
                if (s1.parity == Parity::odd) {
                    next = advance(i, 0.0);
                    s1 = alg1_odd_step(s1, now, next);
                } else {
                    const Alg1Control c = alg1_even_step(s1, cc, now);
                    dN = c.dN;
                    s1 = c.state;
                    next = advance(i, dN);
                    s1 = alg1_gain_update(s1, now, next, cc.dn_epsilon());
                }
            } else {
                const Alg2Control c = alg2_step(s2, cc, now);
                dN = c.dN;
                s2 = c.state;
                next = advance(i, dN);
            }
            now = next;
            push_record(++record_step, dN, now);
        } catch (const Error& e) {
            fail(e, record_step + 1);
            break;
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Map equivalence

using MapParamsVariant = std::variant<Map1Params, Map2Params>;

[[nodiscard]] inline Map1Params map1_params_for(const LoopConfig& c) {
    return {c.controller.lambda_tilde, c.controller.Q_setpoint, c.plant.delta_t, c.controller.step_duration(1)};
}

[[nodiscard]] inline Map2Params map2_params_for(const LoopConfig& c) {
    return {c.controller.lambda_tilde, c.controller.Q_setpoint, c.plant.delta_t,
            c.plant.delta_N,           c.controller.delta_N_init, c.controller.step_duration(1)};
}

struct EquivalenceResult {
    double max_residual = 0.0;
    double max_Q_residual = 0.0;
    double max_lambda_residual = 0.0;
    std::size_t compared = 0;
};

/// First algorithm step from which the idealized loop is expected to follow
/// its map: Algorithm 1 needs one drift estimate and one gain update first.
[[nodiscard]] constexpr std::size_t default_first_control_step(Algorithm a) noexcept {
    return is_first_algorithm(a) ? 4 : 1;
}

/// Compares every recorded control-instant transition with one step of the
/// analytic map from the recorded (Q, lambda). Map 1 spans two algorithm
/// steps starting at an even one. Q residuals are relative to |Q|; lambda
/// residuals are relative to max(|lambda|, lambda_tilde).
[[nodiscard]] inline EquivalenceResult map_residual(const Trajectory& traj, const MapParamsVariant& map_params,
                                                    std::size_t first_step) {
    const bool first_alg = is_first_algorithm(traj.algorithm);
    detail::require(first_alg == std::holds_alternative<Map1Params>(map_params),
                    "map kind does not match the loop's algorithm");
    const std::size_t stride = first_alg ? 2 : 1;
    if (first_alg && first_step % 2 != 0) ++first_step;
    first_step = std::max<std::size_t>(first_step, 1);

    EquivalenceResult res;
    for (std::size_t i = first_step;; i += stride) {
        const std::size_t from = traj.record_of_step(i);
        const std::size_t to = from + stride;
        if (to >= traj.records.size()) break;
        const Record& r0 = traj.records[from];
        const Record& r1 = traj.records[to];
        if (is_fatal(r1.event)) break;
        const MapPoint in{r0.Q, r0.lambda};
        MapPoint out;
        double rate_scale = 0.0;
        if (first_alg) {
            const auto& p = std::get<Map1Params>(map_params);
            out = map1_step(in, p);
            rate_scale = p.lambda_tilde;
        } else {
            const auto& p = std::get<Map2Params>(map_params);
            out = map2_step(in, p);
            rate_scale = p.lambda_tilde;
        }
        const double q_scale = std::max(std::abs(out.Q), std::abs(r1.Q));
        const double q_res = q_scale > 0.0 ? std::abs(out.Q - r1.Q) / q_scale : 0.0;
        const double l_res = std::abs(out.lambda - r1.lambda) / std::max(std::abs(out.lambda), rate_scale);
        res.max_Q_residual = std::max(res.max_Q_residual, q_res);
        res.max_lambda_residual = std::max(res.max_lambda_residual, l_res);
        ++res.compared;
    }
    res.max_residual = std::max(res.max_Q_residual, res.max_lambda_residual);
    return res;
}

/// Runs an idealized loop (exact plant, instantaneous measurement) and checks
/// it against its closed-loop map.
[[nodiscard]] inline EquivalenceResult map_equivalence_check(const LoopConfig& config,
                                                             const MapParamsVariant& map_params) {
    if (config.plant_mode != PlantMode::exact || config.measurement_mode != MeasurementMode::instantaneous ||
        is_modified(config.algorithm)) {
        throw Error(ErrorKind::requires_idealized_mode);
    }
    const Trajectory traj = run_loop(config);
    return map_residual(traj, map_params, default_first_control_step(config.algorithm));
}

// ---------------------------------------------------------------------------
// Convergence study

struct SteadyStateOptions {
    std::size_t window = 50;  // consecutive control instants
    double rel_change = 1e-9;
};

/// Q at control instants after the warm-up: every even step for Algorithm 1,
/// every step for Algorithm 2.
[[nodiscard]] inline std::vector<double> control_instant_Q(const Trajectory& traj) {
    std::vector<double> qs;
    const bool first_alg = is_first_algorithm(traj.algorithm);
    for (std::size_t i = first_alg ? 2 : 1;; i += first_alg ? 2 : 1) {
        const std::size_t idx = traj.record_of_step(i);
        if (idx >= traj.records.size()) break;
        qs.push_back(traj.records[idx].Q);
    }
    return qs;
}

/// Steady value if the last `window` control instants changed by less than
/// `rel_change` relative each.
[[nodiscard]] inline std::optional<double> steady_state_Q(const Trajectory& traj, const SteadyStateOptions& opt = {}) {
    if (traj.truncated) return std::nullopt;
    const std::vector<double> qs = control_instant_Q(traj);
    if (qs.size() < opt.window + 1) return std::nullopt;
    for (std::size_t k = qs.size() - opt.window; k < qs.size(); ++k) {
        const double scale = std::max(std::abs(qs[k]), std::abs(qs[k - 1]));
        if (!(scale > 0.0) || !(std::abs(qs[k] - qs[k - 1]) <= opt.rel_change * scale)) return std::nullopt;
    }
    return qs.back();
}

/// Idealized steady value of Q for the configured algorithm at step dt.
[[nodiscard]] inline double idealized_fixed_Q(const LoopConfig& c) {
    if (is_first_algorithm(c.algorithm)) return fixed_point_map1(map1_params_for(c)).Q;
    return fixed_point_map2(map2_params_for(c)).Q;
}

struct ConvergenceRow {
    double dt = 0.0;
    bool settled = false;
    std::optional<double> steady_Q;
    std::optional<double> steady_error;  // |steady Q - idealized fixed-point Q|
    std::optional<double> map_residual;  // over the second half of the run
    std::string note;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool strictly_decreasing = false;  // only claimed for two or more settled rows
};

struct ConvergenceOptions {
    double horizon = 400.0;  // simulated time per run; steps = max(template, horizon / dt)
    SteadyStateOptions steady{};
};

/// Runs the template once per step size, each with a constant schedule.
[[nodiscard]] inline ConvergenceTable convergence_study(const LoopConfig& config_template,
                                                        const std::vector<double>& dt_list,
                                                        const ConvergenceOptions& opt = {}) {
    detail::require(!dt_list.empty(), "dt list is empty");
    for (std::size_t k = 0; k < dt_list.size(); ++k) {
        detail::require(std::isfinite(dt_list[k]) && dt_list[k] > 0.0, "dt list entries must be > 0");
        if (k > 0) detail::require(dt_list[k] < dt_list[k - 1], "dt list must be decreasing");
    }
    ConvergenceTable table;
    for (double dt : dt_list) {
        LoopConfig cfg = config_template;
        cfg.controller.dt_schedule = {dt};
        cfg.steps = std::max(cfg.steps, static_cast<std::size_t>(std::ceil(opt.horizon / dt)));
        ConvergenceRow row;
        row.dt = dt;
        const Trajectory traj = run_loop(cfg);
        row.steady_Q = steady_state_Q(traj, opt.steady);
        row.settled = row.steady_Q.has_value();
        if (!row.settled) {
            row.note = traj.truncated ? "no steady state at this dt (" + std::string(to_string(traj.events.back().event)) + ")"
                                      : "no steady state at this dt";
        } else {
            try {
                row.steady_error = std::abs(*row.steady_Q - idealized_fixed_Q(cfg));
            } catch (const Error& e) {
                row.note = e.what();
            }
            const MapParamsVariant mp = is_first_algorithm(cfg.algorithm) ? MapParamsVariant(map1_params_for(cfg))
                                                                          : MapParamsVariant(map2_params_for(cfg));
            row.map_residual = map_residual(traj, mp, cfg.steps / 2).max_residual;
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.size() >= 2) {
        bool ok = true;
        for (std::size_t k = 0; k < table.rows.size(); ++k) {
            if (!table.rows[k].steady_error) {
                ok = false;
                break;
            }
            if (k > 0 && !(*table.rows[k].steady_error < *table.rows[k - 1].steady_error)) ok = false;
        }
        table.strictly_decreasing = ok;
    }
    return table;
}

}  // namespace levelctl
