#pragma once

// Command-line front end: `levelctl <command> [--key value ...]`.
// A flat JSON config file (--config) may supply any key; flags win.

#include "levelctl/bifurcation.hpp"
#include "levelctl/closedloop.hpp"
#include "levelctl/emit.hpp"
#include "levelctl/error.hpp"
#include "levelctl/maps.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace levelctl::cli {

enum class Command { simulate, stability, scan, orbit, bounds, converge };

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_numerical = 3, exit_io = 4 };

struct RunSpec {
    Command command = Command::simulate;
    std::map<std::string, std::string> values;
    std::string output_path;  // empty: standard output
    emit::Format format = emit::Format::csv;

    [[nodiscard]] bool has(const std::string& key) const { return values.count(key) > 0; }

    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback = "") const {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    [[nodiscard]] double number(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) throw Error(ErrorKind::usage, "missing required key '" + key + "'");
        return parse_number(key, it->second);
    }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    [[nodiscard]] std::size_t count(const std::string& key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const double v = number(key);
        if (v < 0.0 || v != std::floor(v) || v > 1e15) {
            throw Error(ErrorKind::usage, "key '" + key + "' must be a non-negative integer");
        }
        return static_cast<std::size_t>(v);
    }

    [[nodiscard]] bool flag(const std::string& key) const {
        const std::string v = text(key, "false");
        return v == "true" || v == "1";
    }

    [[nodiscard]] std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(text(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
        if (out.empty()) throw Error(ErrorKind::usage, "key '" + key + "' needs a comma-separated list");
        return out;
    }

    static double parse_number(const std::string& key, const std::string& raw) {
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (raw.empty() || end == raw.c_str() || *end != '\0') {
            throw Error(ErrorKind::usage, "key '" + key + "' is not a number: '" + raw + "'");
        }
        if (!std::isfinite(v)) throw Error(ErrorKind::usage, "key '" + key + "' must be finite");
        return v;
    }
};

namespace detail {

struct CommandInfo {
    Command command;
    const char* name;
    const char* help;
    std::vector<std::string> keys;
    std::vector<std::string> flags;
};

inline const std::vector<std::string>& plant_keys() {
    static const std::vector<std::string> k{"lambda-tilde", "q-setpoint", "delta-n", "delta-t", "delta-n-tilde",
                                            "q0",           "n0",         "t0",      "plant",   "measurement",
                                            "ode-substeps", "steps",      "algorithm"};
    return k;
}

inline std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline const std::vector<CommandInfo>& commands() {
    static const std::vector<CommandInfo> c{
        {Command::simulate, "simulate", "run a controller against a plant and emit the trajectory",
         join(plant_keys(), {"dt"}), {}},
        {Command::stability, "stability", "fixed point, eigenvalues and critical step of map 1 or map 2",
         {"map", "lambda-tilde", "q-setpoint", "delta-t", "delta-n", "delta-n-tilde", "dt"}, {}},
        {Command::scan, "scan", "sweep a map parameter; attractor samples, flips and chaos onset",
         {"map", "from", "to", "cells", "transient", "samples", "keep", "lambda-tilde", "q-setpoint", "delta-t",
          "delta-n", "delta-n-tilde", "dt"},
         {"cold-start", "no-refine"}},
        {Command::orbit, "orbit", "iterate one map and summarize the long-run orbit",
         {"map", "a", "dt", "q0", "lambda0", "transient", "samples", "lambda-tilde", "q-setpoint", "delta-t",
          "delta-n", "delta-n-tilde"},
         {}},
        {Command::bounds, "bounds", "attractor bounds of map 1 / the reduced map",
         {"a", "lambda-tilde", "q-setpoint", "delta-t", "dt"}, {}},
        {Command::converge, "converge", "real-mode steady state versus step size",
         join(plant_keys(), {"dt-list", "horizon"}), {}},
    };
    return c;
}

inline const CommandInfo& info_for(Command c) {
    for (const auto& i : commands()) {
        if (i.command == c) return i;
    }
    throw Error(ErrorKind::usage, "unknown command");
}

// JSON config values as strings: numbers keep their shortest round-trip text.
inline std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::usage, "config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::usage, "config file must hold a flat JSON object");
    std::map<std::string, std::string> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        if (v.is_string()) {
            out[it.key()] = v.get<std::string>();
        } else if (v.is_boolean()) {
            out[it.key()] = v.get<bool>() ? "true" : "false";
        } else if (v.is_number()) {
            out[it.key()] = v.dump();
        } else {
            throw Error(ErrorKind::usage, "config key '" + it.key() + "' must be a string, number or boolean");
        }
    }
    return out;
}

}  // namespace detail

[[nodiscard]] inline std::string usage_text() {
    std::ostringstream os;
    os << "usage: levelctl <command> [--key value ...] [--config file.json] [--format csv|json] [--output path]\n"
       << "commands:\n";
    for (const auto& c : detail::commands()) {
        const std::string name = c.name;
        os << "  " << name << std::string(name.size() < 11 ? 11 - name.size() : 1, ' ') << c.help << '\n';
    }
    return os.str();
}

/// Parses arguments (without the program name).
[[nodiscard]] inline RunSpec parse_args(const std::vector<std::string>& args) {
    if (args.empty()) throw Error(ErrorKind::usage, "no command given");

    CLI::App app{"levelctl"};
    app.require_subcommand(1);
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::map<std::string, CLI::Option*>> opts;
    std::string format = "csv";
    std::string output;
    std::string config;

    for (const auto& info : detail::commands()) {
        CLI::App* sub = app.add_subcommand(info.name, info.help);
        subs[info.name] = sub;
        for (const auto& key : info.keys) opts[info.name][key] = sub->add_option("--" + key, raw[info.name][key]);
        for (const auto& key : info.flags) opts[info.name][key] = sub->add_flag("--" + key);
        sub->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--output", output);
        sub->add_option("--config", config);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw;
    } catch (const CLI::ParseError& e) {
        throw Error(ErrorKind::usage, e.what());
    }

    RunSpec spec;
    spec.output_path = output;
    spec.format = format == "json" ? emit::Format::json : emit::Format::csv;
    const detail::CommandInfo* chosen = nullptr;
    for (const auto& info : detail::commands()) {
        if (subs[info.name]->parsed()) chosen = &info;
    }
    if (!chosen) throw Error(ErrorKind::usage, "no command given");
    spec.command = chosen->command;

    if (!config.empty()) {
        std::set<std::string> known(chosen->keys.begin(), chosen->keys.end());
        known.insert(chosen->flags.begin(), chosen->flags.end());
        for (auto& [key, value] : detail::read_config(config)) {
            if (key == "format") {
                if (value != "csv" && value != "json") throw Error(ErrorKind::usage, "key 'format' must be csv or json");
                if (!subs[chosen->name]->get_option("--format")->count()) {
                    spec.format = value == "json" ? emit::Format::json : emit::Format::csv;
                }
                continue;
            }
            if (key == "output") {
                if (spec.output_path.empty()) spec.output_path = value;
                continue;
            }
            if (!known.count(key)) throw Error(ErrorKind::usage, "unknown config key '" + key + "'");
            spec.values[key] = value;
        }
    }
    for (const auto& key : chosen->keys) {
        if (opts[chosen->name][key]->count()) spec.values[key] = raw[chosen->name][key];
    }
    for (const auto& key : chosen->flags) {
        if (opts[chosen->name][key]->count()) spec.values[key] = "true";
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Command execution

namespace detail {

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "1") return Algorithm::alg1;
    if (s == "2") return Algorithm::alg2;
    if (s == "m1" || s == "modified-1") return Algorithm::modified1;
    if (s == "m2" || s == "modified-2") return Algorithm::modified2;
    throw Error(ErrorKind::usage, "key 'algorithm' must be 1, 2, m1 or m2");
}

inline PlantMode parse_plant(const std::string& s) {
    if (s == "exact") return PlantMode::exact;
    if (s == "ramped") return PlantMode::ramped;
    if (s == "ode") return PlantMode::ode;
    throw Error(ErrorKind::usage, "key 'plant' must be exact, ramped or ode");
}

inline MapKind parse_map(const std::string& s) {
    if (s == "reduced") return MapKind::reduced;
    if (s == "map1" || s == "1") return MapKind::map1;
    if (s == "map2" || s == "2") return MapKind::map2;
    throw Error(ErrorKind::usage, "key 'map' must be reduced, map1 or map2");
}

inline void require_keys(const RunSpec& spec, std::initializer_list<const char*> keys) {
    std::string missing;
    for (const char* k : keys) {
        if (!spec.has(k)) missing += (missing.empty() ? "'" : ", '") + std::string(k) + "'";
    }
    if (!missing.empty()) throw Error(ErrorKind::usage, "missing required key(s) " + missing);
}

inline void require_key(const RunSpec& spec, const std::string& key) { require_keys(spec, {key.c_str()}); }

/// Loop configuration from the shared plant/controller keys. `dt` may be
/// absent for the convergence study, which supplies its own.
inline LoopConfig loop_config(const RunSpec& spec, bool need_dt) {
    require_keys(spec, {"algorithm", "lambda-tilde", "q-setpoint", "delta-n", "delta-t", "delta-n-tilde", "q0"});
    LoopConfig cfg;
    cfg.algorithm = parse_algorithm(spec.text("algorithm"));
    const bool modified = is_modified(cfg.algorithm);
    cfg.plant_mode = parse_plant(spec.text("plant", modified ? "ramped" : "exact"));
    const std::string meas = spec.text("measurement", modified ? "fd" : "instantaneous");
    if (meas == "fd" || meas == "finite-difference") {
        cfg.measurement_mode = MeasurementMode::finite_difference;
    } else if (meas == "instantaneous") {
        cfg.measurement_mode = MeasurementMode::instantaneous;
    } else {
        throw Error(ErrorKind::usage, "key 'measurement' must be instantaneous or fd");
    }
    cfg.plant = {spec.number("delta-n"), spec.number("delta-t")};
    cfg.controller.lambda_tilde = spec.number("lambda-tilde");
    cfg.controller.Q_setpoint = spec.number("q-setpoint");
    cfg.controller.delta_N_init = spec.number("delta-n-tilde");
    if (need_dt) {
        require_key(spec, "dt");
        cfg.controller.dt_schedule = {spec.number("dt")};
    }
    const double n0 = spec.number("n0", 1.0);
    cfg.controller.n_scale = n0;
    cfg.initial = make_state(cfg.plant, spec.number("t0", 0.0), spec.number("q0"), n0);
    cfg.ode_substeps = spec.count("ode-substeps", 100);
    return cfg;
}

inline Map1Params map1_from(const RunSpec& spec, bool need_dt) {
    Map1Params p;
    p.lambda_tilde = spec.number("lambda-tilde");
    p.Q_setpoint = spec.number("q-setpoint", 1.0);
    p.delta_t = spec.number("delta-t", 0.0);
    p.dt = need_dt ? spec.number("dt") : spec.number("dt", 1.0);
    return p;
}

inline Map2Params map2_from(const RunSpec& spec, bool need_dt) {
    Map2Params p;
    p.lambda_tilde = spec.number("lambda-tilde");
    p.Q_setpoint = spec.number("q-setpoint", 1.0);
    p.delta_t = spec.number("delta-t");
    p.delta_N = spec.number("delta-n");
    p.delta_N_tilde = spec.number("delta-n-tilde");
    p.dt = need_dt ? spec.number("dt") : spec.number("dt", 1.0);
    return p;
}

inline MapFamily family_from(const RunSpec& spec) {
    require_key(spec, "map");
    switch (parse_map(spec.text("map"))) {
        case MapKind::reduced: return MapFamily::reduced();
        case MapKind::map1: return MapFamily::first(map1_from(spec, false));
        case MapKind::map2: return MapFamily::second(map2_from(spec, false));
    }
    return MapFamily::reduced();
}

struct Output {
    std::string text;
    int exit_code = exit_ok;
};

inline std::string render(const RunSpec& spec, const std::string& csv, const nlohmann::json& json) {
    return spec.format == emit::Format::json ? emit::dump(json) : csv;
}

inline Output run_simulate(const RunSpec& spec) {
    LoopConfig cfg = loop_config(spec, true);
    require_key(spec, "steps");
    cfg.steps = spec.count("steps", 0);
    const Trajectory traj = run_loop(cfg);
    return {render(spec, emit::trajectory_csv(traj), emit::trajectory_json(traj)),
            traj.truncated ? exit_numerical : exit_ok};
}

inline Output run_stability(const RunSpec& spec) {
    require_key(spec, "map");
    require_key(spec, "dt");
    const MapKind kind = parse_map(spec.text("map"));
    if (kind == MapKind::reduced) throw Error(ErrorKind::usage, "key 'map' must be map1 or map2 for stability");
    StabilityReport report;
    std::optional<ZeroFixedPoint> zero;
    if (kind == MapKind::map1) {
        report = stability_map1(map1_from(spec, true));
    } else {
        const Map2Params p = map2_from(spec, true);
        report = stability_map2(p);
        zero = fixed_point_map2_zero(p);
    }
    return {render(spec, emit::stability_csv(report, zero), emit::stability_json(report, zero))};
}

inline OrbitOptions orbit_options(const RunSpec& spec) {
    OrbitOptions o;
    o.transient = spec.count("transient", o.transient);
    o.samples = spec.count("samples", o.samples);
    return o;
}

inline Output run_scan(const RunSpec& spec) {
    for (const char* k : {"from", "to", "cells"}) require_key(spec, k);
    const MapFamily family = family_from(spec);
    ScanOptions opt;
    opt.orbit = orbit_options(spec);
    opt.warm_start = !spec.flag("cold-start");
    opt.refine_flips = !spec.flag("no-refine");
    opt.keep_samples = spec.count("keep", opt.keep_samples);
    const ScanResult result = scan_cascade(family, {spec.number("from"), spec.number("to")}, spec.count("cells", 0), opt);
    return {render(spec, emit::scan_csv(result), emit::scan_json(result))};
}

inline Output run_orbit(const RunSpec& spec) {
    const MapFamily family = family_from(spec);
    const std::string param_key = family.kind == MapKind::reduced ? "a" : "dt";
    require_key(spec, param_key);
    const double param = spec.number(param_key);
    MapPoint start = family.default_start(param);
    if (spec.has("q0")) start.Q = spec.number("q0");
    if (spec.has("lambda0")) start.lambda = spec.number("lambda0");
    const OrbitSummary orbit = iterate_orbit(family, param, start, orbit_options(spec));
    return {render(spec, emit::orbit_csv(orbit), emit::orbit_json(orbit, param))};
}

inline Output run_bounds(const RunSpec& spec) {
    emit::BoundsResult b;
    if (spec.has("a")) {
        b.a = spec.number("a");
    } else {
        require_key(spec, "lambda-tilde");
        require_key(spec, "dt");
        const Map1Params p = map1_from(spec, true);
        b.a = p.cascade_parameter();
        b.rectangle = attractor_rectangle(p);
    }
    b.reduced = reduced_bounds(b.a);
    return {render(spec, emit::bounds_csv(b), emit::bounds_json(b))};
}

inline Output run_converge(const RunSpec& spec) {
    require_key(spec, "dt-list");
    LoopConfig cfg = loop_config(spec, false);
    cfg.steps = spec.count("steps", 0);
    ConvergenceOptions opt;
    opt.horizon = spec.number("horizon", opt.horizon);
    const ConvergenceTable table = convergence_study(cfg, spec.list("dt-list"), opt);
    return {render(spec, emit::convergence_csv(table), emit::convergence_json(table))};
}

inline int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage:
        case ErrorKind::invalid_argument:
        case ErrorKind::no_flip_in_bracket:
        case ErrorKind::requires_idealized_mode: return exit_usage;
        case ErrorKind::io: return exit_io;
        default: return exit_numerical;
    }
}

}  // namespace detail

/// Executes a parsed command and returns its serialized output and exit code.
[[nodiscard]] inline detail::Output execute(const RunSpec& spec) {
    switch (spec.command) {
        case Command::simulate: return detail::run_simulate(spec);
        case Command::stability: return detail::run_stability(spec);
        case Command::scan: return detail::run_scan(spec);
        case Command::orbit: return detail::run_orbit(spec);
        case Command::bounds: return detail::run_bounds(spec);
        case Command::converge: return detail::run_converge(spec);
    }
    throw Error(ErrorKind::usage, "unknown command");
}

/// Full front end; `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunSpec spec;
    try {
        spec = parse_args(args);
    } catch (const CLI::CallForHelp&) {
        out << usage_text();
        return exit_ok;
    } catch (const Error& e) {
        err << "levelctl: " << e.what() << '\n' << usage_text();
        return detail::exit_code_for(e.kind());
    }

    detail::Output result;
    try {
        result = execute(spec);
    } catch (const Error& e) {
        err << "levelctl: " << e.what() << '\n';
        return detail::exit_code_for(e.kind());
    }

    if (spec.output_path.empty()) {
        out << result.text;
        out.flush();
        if (!out) {
            err << "levelctl: I/O error writing standard output\n";
            return exit_io;
        }
    } else {
        std::ofstream file(spec.output_path, std::ios::binary);
        if (!file) {
            err << "levelctl: I/O error: cannot open '" << spec.output_path << "'\n";
            return exit_io;
        }
        file << result.text;
        file.close();
        if (!file) {
            err << "levelctl: I/O error writing '" << spec.output_path << "'\n";
            return exit_io;
        }
    }
    return result.exit_code;
}

}  // namespace levelctl::cli
