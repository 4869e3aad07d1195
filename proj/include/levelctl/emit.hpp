#pragma once

// CSV and JSON serialization of module results. CSV: header row, comma
// separated, '.' decimal point, LF line endings, doubles with 17 significant
// digits. JSON: same field names; doubles in shortest round-trip form,
// non-finite values as null.

#include "levelctl/bifurcation.hpp"
#include "levelctl/closedloop.hpp"
#include "levelctl/maps.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>

namespace levelctl::emit {

using Json = nlohmann::json;

enum class Format { csv, json };

[[nodiscard]] inline std::string number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <typename T>
[[nodiscard]] std::string optional_number(const std::optional<T>& x) {
    if (!x) return "";
    if constexpr (std::is_floating_point_v<T>) {
        return number(*x);
    } else {
        return std::to_string(*x);
    }
}

[[nodiscard]] inline Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <typename T>
[[nodiscard]] Json json_optional(const std::optional<T>& x) {
    if (!x) return nullptr;
    if constexpr (std::is_floating_point_v<T>) {
        return json_number(*x);
    } else {
        return Json(*x);
    }
}

[[nodiscard]] inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Trajectory

[[nodiscard]] inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "step,t,Q,lambda,N,dN,delta_t_est,delta_n_est,event\n";
    for (const Record& r : traj.records) {
        os << r.step << ',' << number(r.t) << ',' << number(r.Q) << ',' << number(r.lambda) << ',' << number(r.N)
           << ',' << number(r.dN) << ',' << number(r.delta_t_est) << ',' << number(r.delta_N_est) << ','
           << to_string(r.event) << '\n';
    }
    return os.str();
}

[[nodiscard]] inline Json trajectory_json(const Trajectory& traj) {
    Json records = Json::array();
    for (const Record& r : traj.records) {
        records.push_back({{"step", r.step},
                           {"t", json_number(r.t)},
                           {"Q", json_number(r.Q)},
                           {"lambda", json_number(r.lambda)},
                           {"N", json_number(r.N)},
                           {"dN", json_number(r.dN)},
                           {"delta_t_est", json_number(r.delta_t_est)},
                           {"delta_n_est", json_number(r.delta_N_est)},
                           {"event", std::string(to_string(r.event))}});
    }
    Json events = Json::array();
    for (const EventMarker& e : traj.events) {
        events.push_back({{"step", e.step}, {"event", std::string(to_string(e.event))}, {"detail", e.detail}});
    }
    return {{"records", records}, {"events", events}, {"truncated", traj.truncated}};
}

// ---------------------------------------------------------------------------
// Stability

[[nodiscard]] inline std::string stability_csv(const StabilityReport& r, const std::optional<ZeroFixedPoint>& zero) {
    std::ostringstream os;
    os << "Q_bar,lambda_bar,eig1_re,eig1_im,eig2_re,eig2_im,stable,conscious,small_step_stable,critical_dt,"
          "dt_valid_lo,dt_valid_hi,zero_lambda_bar,zero_stable,note\n";
    os << number(r.fixed_point.Q) << ',' << number(r.fixed_point.lambda) << ',' << number(r.eigenvalues[0].real())
       << ',' << number(r.eigenvalues[0].imag()) << ',' << number(r.eigenvalues[1].real()) << ','
       << number(r.eigenvalues[1].imag()) << ',' << (r.stable ? "true" : "false") << ','
       << (r.conscious ? "true" : "false") << ','
       << (r.small_step_stable ? (*r.small_step_stable ? "true" : "false") : "") << ','
       << optional_number(r.critical_dt) << ',' << number(r.dt_validity.lo) << ',' << number(r.dt_validity.hi) << ','
       << (zero ? number(zero->point.lambda) : "") << ',' << (zero ? (zero->stable ? "true" : "false") : "") << ','
       << '"' << r.note << '"' << '\n';
    return os.str();
}

[[nodiscard]] inline Json stability_json(const StabilityReport& r, const std::optional<ZeroFixedPoint>& zero) {
    Json eig = Json::array();
    for (const auto& e : r.eigenvalues) eig.push_back({{"re", json_number(e.real())}, {"im", json_number(e.imag())}});
    Json j = {{"fixed_point", {{"Q", json_number(r.fixed_point.Q)}, {"lambda", json_number(r.fixed_point.lambda)}}},
              {"eigenvalues", eig},
              {"stable", r.stable},
              {"conscious", r.conscious},
              {"small_step_stable", r.small_step_stable ? Json(*r.small_step_stable) : Json(nullptr)},
              {"critical_dt", json_optional(r.critical_dt)},
              {"dt_validity", {json_number(r.dt_validity.lo), json_number(r.dt_validity.hi)}},
              {"note", r.note}};
    if (zero) {
        j["zero_fixed_point"] = {{"Q", 0.0}, {"lambda", json_number(zero->point.lambda)}, {"stable", zero->stable}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Scan

[[nodiscard]] inline std::string scan_csv(const ScanResult& s) {
    std::ostringstream os;
    os << "param,sample_value,period,lyapunov\n";
    for (const ScanCell& c : s.cells) {
        const std::string tail = "," + optional_number(c.period) + "," + number(c.lyapunov) + "\n";
        if (c.diverged || c.samples.empty()) {
            os << number(c.param) << ',' << tail;
            continue;
        }
        for (const MapPoint& p : c.samples) os << number(c.param) << ',' << number(p.Q) << tail;
    }
    return os.str();
}

[[nodiscard]] inline Json scan_json(const ScanResult& s) {
    Json cells = Json::array();
    for (const ScanCell& c : s.cells) {
        Json samples = Json::array();
        for (const MapPoint& p : c.samples) samples.push_back(json_number(p.Q));
        cells.push_back({{"param", json_number(c.param)},
                         {"samples", samples},
                         {"period", json_optional(c.period)},
                         {"lyapunov", json_number(c.lyapunov)},
                         {"lyapunov_reliable", c.lyapunov_reliable},
                         {"underflow_events", c.underflow_events},
                         {"diverged", c.diverged}});
    }
    Json flips = Json::array();
    for (double f : s.flip_points) flips.push_back(json_number(f));
    return {{"cells", cells}, {"flip_points", flips}, {"chaos_onset", json_optional(s.chaos_onset)}};
}

// ---------------------------------------------------------------------------
// Orbit

[[nodiscard]] inline std::string orbit_csv(const OrbitSummary& o) {
    std::ostringstream os;
    os << "iteration,Q,lambda\n";
    for (std::size_t i = 0; i < o.samples.size(); ++i) {
        os << i << ',' << number(o.samples[i].Q) << ',' << number(o.samples[i].lambda) << '\n';
    }
    return os.str();
}

[[nodiscard]] inline Json orbit_json(const OrbitSummary& o, double param) {
    Json samples = Json::array();
    for (const MapPoint& p : o.samples) samples.push_back({{"Q", json_number(p.Q)}, {"lambda", json_number(p.lambda)}});
    return {{"param", json_number(param)},
            {"samples", samples},
            {"period", json_optional(o.period)},
            {"lyapunov", json_number(o.lyapunov)},
            {"lyapunov_reliable", o.lyapunov_reliable},
            {"underflow_events", o.underflow_events},
            {"Q_bounds", {json_number(o.Q_bounds.lo), json_number(o.Q_bounds.hi)}},
            {"lambda_bounds", {json_number(o.lambda_bounds.lo), json_number(o.lambda_bounds.hi)}}};
}

// ---------------------------------------------------------------------------
// Bounds

struct BoundsResult {
    double a = 0.0;
    ReducedBounds reduced;
    std::optional<AttractorRectangle> rectangle;  // present when map-1 parameters were given
};

[[nodiscard]] inline std::string bounds_csv(const BoundsResult& b) {
    std::ostringstream os;
    os << "a,q_min,q_max,Q_min,Q_max,lambda_min,lambda_max\n";
    os << number(b.a) << ',' << number(b.reduced.q_min) << ',' << number(b.reduced.q_max);
    if (b.rectangle) {
        os << ',' << number(b.rectangle->Q.lo) << ',' << number(b.rectangle->Q.hi) << ','
           << number(b.rectangle->lambda.lo) << ',' << number(b.rectangle->lambda.hi) << '\n';
    } else {
        os << ",,,,\n";
    }
    return os.str();
}

[[nodiscard]] inline Json bounds_json(const BoundsResult& b) {
    Json j = {{"a", json_number(b.a)}, {"q_min", json_number(b.reduced.q_min)}, {"q_max", json_number(b.reduced.q_max)}};
    if (b.rectangle) {
        j["Q_min"] = json_number(b.rectangle->Q.lo);
        j["Q_max"] = json_number(b.rectangle->Q.hi);
        j["lambda_min"] = json_number(b.rectangle->lambda.lo);
        j["lambda_max"] = json_number(b.rectangle->lambda.hi);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Convergence

[[nodiscard]] inline std::string convergence_csv(const ConvergenceTable& t) {
    std::ostringstream os;
    os << "dt,settled,steady_Q,steady_error,map_residual,note\n";
    for (const ConvergenceRow& r : t.rows) {
        os << number(r.dt) << ',' << (r.settled ? "true" : "false") << ',' << optional_number(r.steady_Q) << ','
           << optional_number(r.steady_error) << ',' << optional_number(r.map_residual) << ',' << '"' << r.note
           << '"' << '\n';
    }
    return os.str();
}

[[nodiscard]] inline Json convergence_json(const ConvergenceTable& t) {
    Json rows = Json::array();
    for (const ConvergenceRow& r : t.rows) {
        rows.push_back({{"dt", json_number(r.dt)},
                        {"settled", r.settled},
                        {"steady_Q", json_optional(r.steady_Q)},
                        {"steady_error", json_optional(r.steady_error)},
                        {"map_residual", json_optional(r.map_residual)},
                        {"note", r.note}});
    }
    return {{"rows", rows}, {"strictly_decreasing", t.strictly_decreasing}};
}

}  // namespace levelctl::emit
