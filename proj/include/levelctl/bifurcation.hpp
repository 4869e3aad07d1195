#pragma once

// Orbit iteration, period detection, flip (period-doubling) location, cascade
// scans and Lyapunov exponents for the closed-loop maps.

#include "levelctl/error.hpp"
#include "levelctl/maps.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace levelctl {

enum class MapKind { reduced, map1, map2 };

/// A one-parameter family of maps. The swept parameter is the cascade
/// parameter a for the reduced map and the control step dt for maps 1 and 2;
/// the remaining parameters come from the stored templates.
struct MapFamily {
    MapKind kind = MapKind::reduced;
    Map1Params map1{};
    Map2Params map2{};

    [[nodiscard]] static MapFamily reduced() { return {}; }
    [[nodiscard]] static MapFamily first(const Map1Params& p) { return {MapKind::map1, p, {}}; }
    [[nodiscard]] static MapFamily second(const Map2Params& p) { return {MapKind::map2, {}, p}; }

    [[nodiscard]] Map1Params map1_at(double dt) const {
        Map1Params p = map1;
        p.dt = dt;
        return p;
    }
    [[nodiscard]] Map2Params map2_at(double dt) const {
        Map2Params p = map2;
        p.dt = dt;
        return p;
    }

    /// Reduced map points carry q in `Q`; `lambda` is unused and kept at 0.
    [[nodiscard]] MapPoint step(const MapPoint& p, double param) const {
        switch (kind) {
            case MapKind::reduced: {
                const double q = reduced_map_step(p.Q, param);
                if (!std::isfinite(q)) throw Error(ErrorKind::quantity_overflow, "reduced map");
                return {q, 0.0};
            }
            case MapKind::map1: return map1_step(p, map1_at(param));
            case MapKind::map2: return map2_step(p, map2_at(param));
        }
        return p;
    }

    [[nodiscard]] Jacobian jacobian(const MapPoint& p, double param) const {
        switch (kind) {
            case MapKind::reduced: return Jacobian{{{reduced_map_derivative(p.Q, param), 0.0}, {0.0, 0.0}}};
            case MapKind::map1: return map1_jacobian(p, map1_at(param));
            case MapKind::map2: return map2_jacobian(p, map2_at(param));
        }
        return {};
    }

    [[nodiscard]] bool two_dimensional() const noexcept { return kind != MapKind::reduced; }

    /// Cold start: q = 0.5 for the reduced map, Q = Q_setpoint / 2 for map 1,
    /// and (1.01 Q_bar, 0.99 lambda_bar) next to the positive fixed point for
    /// map 2 (its basin is not known in general).
    [[nodiscard]] MapPoint default_start(double param) const {
        switch (kind) {
            case MapKind::reduced: return {0.5, 0.0};
            case MapKind::map1: return {0.5 * map1.Q_setpoint, 0.0};
            case MapKind::map2: {
                try {
                    const MapPoint fp = fixed_point_map2(map2_at(param));
                    return {1.01 * fp.Q, 0.99 * fp.lambda};
                } catch (const Error&) {
                    return {map2.Q_setpoint, 0.0};
                }
            }
        }
        return {};
    }
};

/// Thrown when an orbit leaves the representable range; keeps the last finite iterate.
class OrbitDiverged : public Error {
public:
    OrbitDiverged(MapPoint last, std::size_t iteration)
        : Error(ErrorKind::orbit_diverged, "after iteration " + std::to_string(iteration)),
          last_(last),
          iteration_(iteration) {}

    [[nodiscard]] const MapPoint& last_finite() const noexcept { return last_; }
    [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }

private:
    MapPoint last_;
    std::size_t iteration_;
};

struct OrbitOptions {
    std::size_t transient = 10'000;
    std::size_t samples = 10'000;
    double rel_tol = 1e-8;
    std::size_t max_period = 64;
};

struct OrbitSummary {
    std::vector<MapPoint> samples;
    std::optional<std::size_t> period;  // empty: aperiodic at the given tolerance
    double lyapunov = 0.0;
    bool lyapunov_reliable = true;
    Interval Q_bounds;
    Interval lambda_bounds;
    std::size_t underflow_events = 0;
};

// ---------------------------------------------------------------------------
// Period detection

namespace detail {

inline double window_scale(std::span<const double> xs) noexcept {
    double scale = 0.0;
    for (double x : xs) scale = std::max(scale, std::abs(x));
    return scale > 0.0 ? scale : 1.0;
}

inline bool repeats_with(std::span<const double> xs, std::size_t p, double tol) noexcept {
    for (std::size_t i = 0; i + p < xs.size(); ++i) {
        if (!(std::abs(xs[i + p] - xs[i]) <= tol)) return false;
    }
    return true;
}

}  // namespace detail

/// Smallest p <= max_period with |x[i+p] - x[i]| <= rel_tol * max|x| over the
/// whole window.
[[nodiscard]] inline std::optional<std::size_t> detect_period(std::span<const double> samples, double rel_tol = 1e-8,
                                                              std::size_t max_period = 64) {
    detail::require(max_period >= 1, "max_period must be >= 1");
    detail::require(samples.size() >= 2 * max_period, "need at least 2 * max_period samples");
    const double tol = rel_tol * detail::window_scale(samples);
    for (std::size_t p = 1; p <= max_period; ++p) {
        if (detail::repeats_with(samples, p, tol)) return p;
    }
    return std::nullopt;
}

/// Two-coordinate variant: both Q and lambda must repeat with the same period.
[[nodiscard]] inline std::optional<std::size_t> detect_period(std::span<const MapPoint> samples, double rel_tol,
                                                              std::size_t max_period) {
    detail::require(max_period >= 1, "max_period must be >= 1");
    detail::require(samples.size() >= 2 * max_period, "need at least 2 * max_period samples");
    std::vector<double> qs(samples.size()), ls(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        qs[i] = samples[i].Q;
        ls[i] = samples[i].lambda;
    }
    const double tq = rel_tol * detail::window_scale(qs);
    const double tl = rel_tol * detail::window_scale(ls);
    for (std::size_t p = 1; p <= max_period; ++p) {
        if (detail::repeats_with(qs, p, tq) && detail::repeats_with(ls, p, tl)) return p;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Lyapunov exponents

inline constexpr double lyapunov_term_clamp = 50.0;

struct LyapunovEstimate {
    double exponent = 0.0;
    std::size_t terms = 0;
    std::size_t skipped = 0;  // reduced map: exactly-zero derivatives
    std::size_t underflow_events = 0;
    bool reliable = true;
    std::string note;
};

namespace detail {

inline double clamp_log(double value) noexcept {
    return std::clamp(value, -lyapunov_term_clamp, lyapunov_term_clamp);
}

/// Warm starts are moved slightly off the carried-over iterate: a fixed point
/// that does not move with the parameter (q = 1, Q = Q_setpoint) would
/// otherwise be kept exactly after it has lost stability.
inline MapPoint nudged(const MapPoint& p) noexcept { return {p.Q * (1.0 + 1e-6), p.lambda}; }

inline bool entered_zero(const MapPoint& before, const MapPoint& after) noexcept {
    return before.Q != 0.0 && after.Q == 0.0;
}

// Tangent-vector accumulator with renormalization after every step.
class TangentTracker {
public:
    void push(const Jacobian& J) noexcept {
        const double x = J[0][0] * v_[0] + J[0][1] * v_[1];
        const double y = J[1][0] * v_[0] + J[1][1] * v_[1];
        const double norm = std::hypot(x, y);
        if (norm == 0.0 || !std::isfinite(norm)) {
            sum_ += norm == 0.0 ? -lyapunov_term_clamp : lyapunov_term_clamp;
            v_ = {1.0, 0.0};
        } else {
            sum_ += clamp_log(std::log(norm));
            v_ = {x / norm, y / norm};
        }
        ++terms_;
    }
    [[nodiscard]] double mean() const noexcept { return terms_ ? sum_ / static_cast<double>(terms_) : 0.0; }
    [[nodiscard]] std::size_t terms() const noexcept { return terms_; }

private:
    std::array<double, 2> v_{std::sqrt(0.5), std::sqrt(0.5)};
    double sum_ = 0.0;
    std::size_t terms_ = 0;
};

}  // namespace detail

/// Mean of ln|f'(q_i)| along the reduced-map orbit after the transient.
/// Exactly-zero derivatives are skipped; if every term is skipped the
/// exponent is reported as -50.
[[nodiscard]] inline LyapunovEstimate lyapunov_reduced(double a, double start, std::size_t transient,
                                                       std::size_t samples) {
    detail::require(samples >= 1, "need at least one sample");
    detail::require(std::isfinite(a) && a > 0.0, "cascade parameter must be > 0");
    double q = start;
    for (std::size_t i = 0; i < transient; ++i) q = reduced_map_step(q, a);
    LyapunovEstimate est;
    double sum = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double d = reduced_map_derivative(q, a);
        if (d == 0.0) {
            ++est.skipped;
        } else {
            sum += detail::clamp_log(std::log(std::abs(d)));
            ++est.terms;
        }
        q = reduced_map_step(q, a);
        if (!std::isfinite(q)) throw OrbitDiverged({q, 0.0}, transient + i);
    }
    est.exponent = est.terms ? sum / static_cast<double>(est.terms) : -lyapunov_term_clamp;
    return est;
}

/// Largest exponent of a two-dimensional map from the iterated Jacobian.
/// Marked unreliable once the orbit has been captured by Q = 0.
[[nodiscard]] inline LyapunovEstimate lyapunov_2d(const MapFamily& family, double param, MapPoint start,
                                                  std::size_t transient, std::size_t samples) {
    detail::require(samples >= 1, "need at least one sample");
    MapPoint p = start;
    LyapunovEstimate est;
    std::size_t it = 0;
    auto advance = [&](const MapPoint& cur) {
        MapPoint next;
        try {
            next = family.step(cur, param);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::quantity_overflow) throw OrbitDiverged(cur, it);
            throw;
        }
        if (detail::entered_zero(cur, next)) ++est.underflow_events;
        ++it;
        return next;
    };
    for (std::size_t i = 0; i < transient; ++i) p = advance(p);
    detail::TangentTracker tracker;
    for (std::size_t i = 0; i < samples; ++i) {
        tracker.push(family.jacobian(p, param));
        p = advance(p);
    }
    est.exponent = tracker.mean();
    est.terms = tracker.terms();
    if (est.underflow_events > 0) {
        est.reliable = false;
        est.note = "unreliable: computer zero";
    }
    return est;
}

// ---------------------------------------------------------------------------
// Orbits

/// Discards `transient` iterates, records `samples`, and summarizes them.
/// Underflow of Q to 0 is counted, never fatal; overflow throws OrbitDiverged.
[[nodiscard]] inline OrbitSummary iterate_orbit(const MapFamily& family, double param, MapPoint start,
                                                const OrbitOptions& opt = {}) {
    OrbitSummary out;
    MapPoint p = start;
    std::size_t it = 0;
    detail::TangentTracker tracker;
    double reduced_sum = 0.0;
    std::size_t reduced_terms = 0;

    auto advance = [&](const MapPoint& cur) {
        MapPoint next;
        try {
            next = family.step(cur, param);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::quantity_overflow) throw OrbitDiverged(cur, it);
            throw;
        }
        if (detail::entered_zero(cur, next)) ++out.underflow_events;
        ++it;
        return next;
    };

    for (std::size_t i = 0; i < opt.transient; ++i) p = advance(p);
    out.samples.reserve(opt.samples);
    for (std::size_t i = 0; i < opt.samples; ++i) {
        out.samples.push_back(p);
        if (family.two_dimensional()) {
            tracker.push(family.jacobian(p, param));
        } else {
            const double d = reduced_map_derivative(p.Q, param);
            if (d != 0.0) {
                reduced_sum += detail::clamp_log(std::log(std::abs(d)));
                ++reduced_terms;
            }
        }
        p = advance(p);
    }

    if (family.two_dimensional()) {
        out.lyapunov = tracker.mean();
    } else {
        out.lyapunov = reduced_terms ? reduced_sum / static_cast<double>(reduced_terms) : -lyapunov_term_clamp;
    }
    out.lyapunov_reliable = out.underflow_events == 0;

    if (!out.samples.empty()) {
        out.Q_bounds = {out.samples.front().Q, out.samples.front().Q};
        out.lambda_bounds = {out.samples.front().lambda, out.samples.front().lambda};
        for (const MapPoint& s : out.samples) {
            out.Q_bounds.lo = std::min(out.Q_bounds.lo, s.Q);
            out.Q_bounds.hi = std::max(out.Q_bounds.hi, s.Q);
            out.lambda_bounds.lo = std::min(out.lambda_bounds.lo, s.lambda);
            out.lambda_bounds.hi = std::max(out.lambda_bounds.hi, s.lambda);
        }
        const std::size_t max_p = std::min(opt.max_period, out.samples.size() / 2);
        if (max_p >= 1) out.period = detect_period(std::span<const MapPoint>(out.samples), opt.rel_tol, max_p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flip location

struct RefineOptions {
    /// Long transients and a looser period tolerance: convergence slows down
    /// near a flip, and a not-yet-settled cycle reads as the doubled period.
    OrbitOptions orbit{100'000, 512, 1e-6, 128};
    bool warm_start = false;  // start each probe from the attractor at the current lower end
};

namespace detail {

struct Probe {
    std::optional<std::size_t> period;
    MapPoint last{};
};

inline Probe probe_period(const MapFamily& family, double param, const MapPoint& start, const OrbitOptions& opt) {
    try {
        const OrbitSummary s = iterate_orbit(family, param, start, opt);
        return {s.period, s.samples.empty() ? start : s.samples.back()};
    } catch (const OrbitDiverged&) {
        return {std::nullopt, start};
    }
}

}  // namespace detail

/// Bisects [param_lo, param_hi] for the point where the attracting cycle
/// doubles its period. The target period p is half the period found at
/// param_hi; points with detected period <= p count as "before the flip".
/// Stops when the bracket is no wider than `tol` and returns its midpoint.
[[nodiscard]] inline double refine_flip(const MapFamily& family, double param_lo, double param_hi, double tol,
                                        const RefineOptions& opt = {}) {
    detail::require(param_lo < param_hi, "bracket must satisfy lo < hi");
    detail::require(tol > 0.0, "tolerance must be > 0");

    const detail::Probe top = detail::probe_period(family, param_hi, family.default_start(param_hi), opt.orbit);
    if (!top.period || *top.period < 2 || *top.period % 2 != 0) {
        throw Error(ErrorKind::no_flip_in_bracket, "no even period at the upper end");
    }
    const std::size_t p = *top.period / 2;

    double lo = param_lo;
    double hi = param_hi;
    bool lo_verified = false;
    MapPoint warm = family.default_start(param_lo);
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const MapPoint start = opt.warm_start && lo_verified ? detail::nudged(warm) : family.default_start(mid);
        const detail::Probe probe = detail::probe_period(family, mid, start, opt.orbit);
        if (probe.period && *probe.period <= p) {
            lo = mid;
            lo_verified = true;
            warm = probe.last;
        } else {
            hi = mid;
        }
    }
    if (!lo_verified) {
        const detail::Probe bottom = detail::probe_period(family, param_lo, family.default_start(param_lo), opt.orbit);
        if (!bottom.period || *bottom.period > p) {
            throw Error(ErrorKind::no_flip_in_bracket, "period does not double across the bracket");
        }
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Cascade scans

struct ScanOptions {
    OrbitOptions orbit{};
    bool warm_start = true;
    std::size_t keep_samples = 64;  // long-run values stored per cell
    bool refine_flips = true;
    double refine_tol = 1e-6;
    RefineOptions refine{};
    double chaos_threshold = 0.005;
    std::size_t chaos_run = 2;  // consecutive cells above the threshold
};

struct ScanCell {
    double param = 0.0;
    std::vector<MapPoint> samples;
    std::optional<std::size_t> period;
    double lyapunov = 0.0;
    bool lyapunov_reliable = true;
    bool diverged = false;
    std::size_t underflow_events = 0;
};

struct ScanResult {
    std::vector<ScanCell> cells;
    std::vector<double> flip_points;  // strictly increasing
    std::optional<double> chaos_onset;

    [[nodiscard]] std::vector<double> parameter_grid() const {
        std::vector<double> g;
        g.reserve(cells.size());
        for (const ScanCell& c : cells) g.push_back(c.param);
        return g;
    }
};

/// Sweeps the family parameter over `range` on `cells` grid points. With warm
/// starts each cell begins at the previous cell's last iterate, unless that
/// orbit diverged or sits on the Q = 0 ray.
[[nodiscard]] inline ScanResult scan_cascade(const MapFamily& family, Interval range, std::size_t cells,
                                             const ScanOptions& opt = {}) {
    detail::require(range.lo <= range.hi, "scan range must satisfy from <= to");
    detail::require(cells >= 1, "need at least one cell");
    ScanResult out;
    const bool single = range.lo == range.hi || cells == 1;
    const std::size_t n = single ? 1 : cells;
    const double width = single ? 0.0 : (range.hi - range.lo) / static_cast<double>(n - 1);

    MapPoint warm{};
    bool have_warm = false;
    for (std::size_t k = 0; k < n; ++k) {
        ScanCell cell;
        cell.param = k + 1 == n && !single ? range.hi : range.lo + static_cast<double>(k) * width;
        const MapPoint start = opt.warm_start && have_warm ? detail::nudged(warm) : family.default_start(cell.param);
        try {
            OrbitSummary s = iterate_orbit(family, cell.param, start, opt.orbit);
            cell.period = s.period;
            cell.lyapunov = s.lyapunov;
            cell.lyapunov_reliable = s.lyapunov_reliable;
            cell.underflow_events = s.underflow_events;
            const std::size_t keep = std::min(opt.keep_samples, s.samples.size());
            cell.samples.assign(s.samples.end() - static_cast<std::ptrdiff_t>(keep), s.samples.end());
            have_warm = !s.samples.empty() && s.samples.back().Q != 0.0;
            if (have_warm) warm = s.samples.back();
        } catch (const OrbitDiverged&) {
            cell.diverged = true;
            cell.lyapunov = std::numeric_limits<double>::quiet_NaN();
            have_warm = false;
        }
        out.cells.push_back(std::move(cell));
    }

    // Flips: detected period p followed (possibly after unresolved cells) by 2p.
    std::optional<std::size_t> last_idx;
    for (std::size_t k = 0; k < out.cells.size(); ++k) {
        const ScanCell& c = out.cells[k];
        if (c.diverged) {
            last_idx.reset();
            continue;
        }
        if (!c.period) continue;
        if (last_idx && *c.period == 2 * *out.cells[*last_idx].period) {
            const double lo = out.cells[*last_idx].param;
            double flip = 0.5 * (lo + c.param);
            if (opt.refine_flips) {
                try {
                    flip = refine_flip(family, lo, c.param, opt.refine_tol, opt.refine);
                } catch (const Error&) {
                    // keep the cell midpoint
                }
            }
            if (out.flip_points.empty() || flip > out.flip_points.back()) out.flip_points.push_back(flip);
        }
        last_idx = k;
    }

    std::size_t run = 0;
    for (const ScanCell& c : out.cells) {
        if (!c.diverged && c.lyapunov > opt.chaos_threshold) {
            if (++run == opt.chaos_run) {
                const std::size_t first = static_cast<std::size_t>(&c - out.cells.data()) + 1 - opt.chaos_run;
                out.chaos_onset = out.cells[first].param;
                break;
            }
        } else {
            run = 0;
        }
    }
    return out;
}

}  // namespace levelctl
