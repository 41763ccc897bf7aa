#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "maglev/feedback.hpp"
#include "maglev/feedforward.hpp"
#include "maglev/lpv.hpp"
#include "maglev/simulation.hpp"
#include "maglev/trajectory.hpp"

namespace maglev {

using json = nlohmann::ordered_json;

inline const std::array<std::string, 6>& coordinate_names() {
    static const std::array<std::string, 6> n = {"x", "y", "z", "chi", "psi", "zeta"};
    return n;
}

inline int coordinate_index(const std::string& name) {
    const auto& n = coordinate_names();
    for (int i = 0; i < 6; ++i) {
        if (n[static_cast<std::size_t>(i)] == name) return i;
    }
    throw ConfigError("unknown coordinate '" + name + "' (expected x, y, z, chi, psi or zeta)");
}

// A number, a numeric string, or a string with an angle suffix: "5urad", "5 µrad", "1mrad".
inline double parse_quantity(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) throw ConfigError(where + ": expected a number");
    const std::string s = v.get<std::string>();
    static const std::vector<std::pair<std::string, double>> suffixes = {
        {"urad", 1e-6}, {"\xC2\xB5rad", 1e-6}, {"\xCE\xBCrad", 1e-6}, {"mrad", 1e-3}, {"rad", 1.0}};
    for (const auto& [suffix, scale] : suffixes) {
        if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
            std::string num = s.substr(0, s.size() - suffix.size());
            while (!num.empty() && num.back() == ' ') num.pop_back();
            char* end = nullptr;
            const double x = std::strtod(num.c_str(), &end);
            if (num.empty() || end != num.c_str() + num.size()) break;
            return x * scale;
        }
    }
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return x;
    throw ConfigError(where + ": cannot parse quantity '" + s + "'");
}

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline void read(const json& obj, const char* key, double& out, const std::string& where) {
    if (obj.contains(key)) out = parse_quantity(obj.at(key), where + "." + key);
}

inline void read(const json& obj, const char* key, int& out, const std::string& where) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    out = obj.at(key).get<int>();
}

inline void read(const json& obj, const char* key, std::string& out, const std::string& where) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
    out = obj.at(key).get<std::string>();
}

// Six values either as a list or as an object keyed by coordinate name
// (missing coordinates keep their current value).
inline void read_vec6(const json& v, Vec6& out, const std::string& where) {
    if (v.is_array()) {
        if (v.size() != 6) throw ConfigError(where + ": expected 6 values");
        for (int i = 0; i < 6; ++i) out(i) = parse_quantity(v.at(static_cast<std::size_t>(i)), where);
        return;
    }
    if (!v.is_object()) throw ConfigError(where + ": expected a list of 6 values or an object");
    for (const auto& [key, val] : v.items()) out(coordinate_index(key)) = parse_quantity(val, where + "." + key);
}

inline json vec6_json(const Vec6& v) {
    json j = json::object();
    for (int i = 0; i < 6; ++i) j[coordinate_names()[static_cast<std::size_t>(i)]] = v(i);
    return j;
}

}  // namespace detail

struct AxisConfig {
    std::string kind = "scurve";  // hold | scurve | scurve-limits | polynomial
    double stroke = 0.0;
    double t_jerk = 0.05;
    double t_accel = 0.1;
    double t_cruise = 0.1;
    double v_max = 0.0;
    double a_max = 0.0;
    double j_max = 0.0;
    double duration = 0.5;

    AxisProfile build(double start) const {
        if (kind == "hold") return AxisProfile::hold(0.0);
        if (kind == "scurve") return AxisProfile::scurve_timed(0.0, stroke, start, t_jerk, t_accel, t_cruise);
        if (kind == "scurve-limits") return AxisProfile::scurve_limits(0.0, stroke, start, v_max, a_max, j_max);
        if (kind == "polynomial") return AxisProfile::polynomial(0.0, stroke, start, duration);
        throw ConfigError("trajectory: unknown profile kind '" + kind + "'");
    }
};

struct TrajectoryConfig {
    double start_time = 0.1;
    std::array<AxisConfig, 6> axes;

    TrajectoryConfig() {
        const double strokes[6] = {10e-3, 10e-3, 1e-3, 1e-3, 1e-3, 1e-3};
        for (std::size_t i = 0; i < 6; ++i) axes[i].stroke = strokes[i];
    }

    MotionProfile build() const {
        MotionProfile m;
        for (std::size_t i = 0; i < 6; ++i) m.axes[i] = axes[i].build(start_time);
        return m;
    }
};

struct FeedbackConfig {
    double bandwidth_hz = kDefaultBandwidthHz;
    // Per-channel overrides applied on top of the loop-shaped gains.
    std::array<std::optional<PidChannelGains>, 6> overrides{};

    PidGains gains(const PlantParams& params) const {
        PidGains g = PidGains::loop_shaped(params, 2.0 * M_PI * bandwidth_hz);
        for (std::size_t i = 0; i < 6; ++i) {
            if (overrides[i]) g.channel[i] = *overrides[i];
        }
        return g;
    }
};

struct StabilityConfig {
    std::optional<Mat6> Kp;  // defaults to the PID proportional gains
    Vec6 Kv = Vec6::Zero();
    double epsilon_max = 1.0;
    std::string scenario = "cl-mismatch";
};

struct Scenario {
    std::string name;
    bool closed_loop = false;
    bool mismatch = false;
    bool disturbance = false;
};

inline const std::vector<Scenario>& all_scenarios() {
    static const std::vector<Scenario> s = {
        {"ol-match", false, false, false},     {"ol-mismatch", false, true, false},
        {"cl-match", true, false, false},      {"cl-mismatch", true, true, false},
        {"cl-match-dist", true, false, true},  {"cl-mismatch-dist", true, true, true},
    };
    return s;
}

inline const Scenario& scenario_by_name(const std::string& name) {
    for (const auto& s : all_scenarios()) {
        if (s.name == name) return s;
    }
    throw ConfigError("unknown scenario '" + name + "'");
}

struct ExperimentConfig {
    PlantParams plant;
    TrajectoryConfig trajectory;
    DisturbanceProfile disturbance = DisturbanceProfile::default_experiment();
    FeedbackConfig feedback;
    StabilityConfig stability;
    std::vector<Method> methods = comparison_methods();
    std::vector<std::string> scenarios = [] {
        std::vector<std::string> v;
        for (const auto& s : all_scenarios()) v.push_back(s.name);
        return v;
    }();
    SimConfig sim = [] {
        SimConfig c;
        c.mismatch(axis::chi) = 5e-6;
        return c;
    }();
    ScheduleKind schedule = ScheduleKind::trig_products;
    std::string output_dir = "out";
    double zero_threshold = 1e-12;  // table entries below this print as 0

    void validate() const {
        try {
            plant.validate();
            disturbance.validate();
            sim.validate(nullptr);
            const MotionProfile m = trajectory.build();
            if (sim.horizon < m.end_time()) throw ConfigError("sim.horizon ends before the motion profile");
            feedback.gains(plant).validate();
            if (stability.Kp) {
                LyapunovConfig{*stability.Kp, 1.0}.validate();
            }
            if ((stability.Kv.array() < 0.0).any()) throw ConfigError("stability.Kv must be >= 0");
            if (!(stability.epsilon_max > 0.0)) throw ConfigError("stability.epsilon_max must be > 0");
            if (!(zero_threshold >= 0.0)) throw ConfigError("zero_threshold must be >= 0");
            (void)scenario_by_name(stability.scenario);
            for (const auto& s : scenarios) (void)scenario_by_name(s);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }

    Mat6 stability_kp() const { return stability.Kp ? *stability.Kp : feedback.gains(plant).kp_matrix(); }
};

inline std::vector<Method> parse_method_list(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        if (n == "all") {
            for (Method m : comparison_methods()) out.push_back(m);
        } else {
            out.push_back(method_from_string(n));
        }
    }
    return out;
}

inline std::vector<std::string> parse_scenario_list(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& n : names) {
        if (n == "all") {
            for (const auto& s : all_scenarios()) out.push_back(s.name);
        } else {
            out.push_back(scenario_by_name(n).name);
        }
    }
    return out;
}

namespace detail {

inline std::vector<std::string> string_list(const json& v, const std::string& where) {
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw ConfigError(where + ": expected a string or a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError(where + ": expected strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline Mat6 read_gain_matrix(const json& v, const std::string& where) {
    if (v.is_array() && v.size() == 6 && v.at(0).is_array()) {
        Mat6 k;
        for (int i = 0; i < 6; ++i) {
            const json& row = v.at(static_cast<std::size_t>(i));
            if (!row.is_array() || row.size() != 6) throw ConfigError(where + ": expected a 6x6 matrix");
            for (int j = 0; j < 6; ++j) k(i, j) = parse_quantity(row.at(static_cast<std::size_t>(j)), where);
        }
        return k;
    }
    Vec6 d = Vec6::Zero();
    read_vec6(v, d, where);
    return d.asDiagonal();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    using namespace detail;
    ExperimentConfig c;
    check_keys(j, {"plant", "trajectory", "disturbance", "feedback", "stability", "methods", "scenarios", "sim",
                   "schedule", "output_dir", "zero_threshold"},
               "config");

    if (j.contains("plant")) {
        const json& p = j.at("plant");
        check_keys(p, {"m", "I_chi", "I_psi", "I_zeta", "c"}, "plant");
        read(p, "m", c.plant.m, "plant");
        read(p, "I_chi", c.plant.I_chi, "plant");
        read(p, "I_psi", c.plant.I_psi, "plant");
        read(p, "I_zeta", c.plant.I_zeta, "plant");
        if (p.contains("c")) read_vec6(p.at("c"), c.plant.c, "plant.c");
    }

    if (j.contains("trajectory")) {
        const json& t = j.at("trajectory");
        check_keys(t, {"start_time", "axes"}, "trajectory");
        read(t, "start_time", c.trajectory.start_time, "trajectory");
        if (t.contains("axes")) {
            const json& axes = t.at("axes");
            if (!axes.is_object()) throw ConfigError("trajectory.axes: expected an object keyed by coordinate");
            for (const auto& [name, a] : axes.items()) {
                const std::string where = "trajectory.axes." + name;
                AxisConfig& ax = c.trajectory.axes[static_cast<std::size_t>(coordinate_index(name))];
                check_keys(a, {"kind", "stroke", "t_jerk", "t_accel", "t_cruise", "v_max", "a_max", "j_max", "duration"},
                           where);
                read(a, "kind", ax.kind, where);
                read(a, "stroke", ax.stroke, where);
                read(a, "t_jerk", ax.t_jerk, where);
                read(a, "t_accel", ax.t_accel, where);
                read(a, "t_cruise", ax.t_cruise, where);
                read(a, "v_max", ax.v_max, where);
                read(a, "a_max", ax.a_max, where);
                read(a, "j_max", ax.j_max, where);
                read(a, "duration", ax.duration, where);
            }
        }
    }

    if (j.contains("disturbance")) {
        const json& d = j.at("disturbance");
        check_keys(d, {"channel", "shape", "amplitude", "onset", "duration", "ramp"}, "disturbance");
        std::string channel = coordinate_names()[static_cast<std::size_t>(c.disturbance.channel)];
        read(d, "channel", channel, "disturbance");
        c.disturbance.channel = coordinate_index(channel);
        std::string shape = c.disturbance.shape == DisturbanceProfile::Shape::pulse ? "pulse" : "ramped";
        read(d, "shape", shape, "disturbance");
        if (shape == "pulse") {
            c.disturbance.shape = DisturbanceProfile::Shape::pulse;
        } else if (shape == "ramped") {
            c.disturbance.shape = DisturbanceProfile::Shape::ramped;
        } else {
            throw ConfigError("disturbance.shape: expected 'pulse' or 'ramped'");
        }
        read(d, "amplitude", c.disturbance.amplitude, "disturbance");
        read(d, "onset", c.disturbance.onset, "disturbance");
        read(d, "duration", c.disturbance.duration, "disturbance");
        read(d, "ramp", c.disturbance.ramp, "disturbance");
    }

    if (j.contains("feedback")) {
        const json& f = j.at("feedback");
        check_keys(f, {"bandwidth_hz", "channels"}, "feedback");
        read(f, "bandwidth_hz", c.feedback.bandwidth_hz, "feedback");
        if (f.contains("channels")) {
            const json& ch = f.at("channels");
            if (!ch.is_object()) throw ConfigError("feedback.channels: expected an object keyed by coordinate");
            for (const auto& [name, g] : ch.items()) {
                const std::string where = "feedback.channels." + name;
                check_keys(g, {"kp", "ki", "kd", "omega_f"}, where);
                const int i = coordinate_index(name);
                PidChannelGains gains =
                    PidGains::loop_shaped(c.plant, 2.0 * M_PI * c.feedback.bandwidth_hz).channel[static_cast<std::size_t>(i)];
                read(g, "kp", gains.kp, where);
                read(g, "ki", gains.ki, where);
                read(g, "kd", gains.kd, where);
                read(g, "omega_f", gains.omega_f, where);
                c.feedback.overrides[static_cast<std::size_t>(i)] = gains;
            }
        }
    }

    if (j.contains("stability")) {
        const json& s = j.at("stability");
        check_keys(s, {"Kp", "Kv", "epsilon_max", "scenario"}, "stability");
        if (s.contains("Kp") && !s.at("Kp").is_null()) c.stability.Kp = read_gain_matrix(s.at("Kp"), "stability.Kp");
        if (s.contains("Kv")) read_vec6(s.at("Kv"), c.stability.Kv, "stability.Kv");
        read(s, "epsilon_max", c.stability.epsilon_max, "stability");
        read(s, "scenario", c.stability.scenario, "stability");
    }

    if (j.contains("methods")) c.methods = parse_method_list(string_list(j.at("methods"), "methods"));
    if (j.contains("scenarios")) c.scenarios = parse_scenario_list(string_list(j.at("scenarios"), "scenarios"));

    if (j.contains("sim")) {
        const json& s = j.at("sim");
        check_keys(s, {"Ts", "substeps", "horizon", "mismatch"}, "sim");
        read(s, "Ts", c.sim.Ts, "sim");
        read(s, "substeps", c.sim.substeps, "sim");
        read(s, "horizon", c.sim.horizon, "sim");
        if (s.contains("mismatch")) {
            c.sim.mismatch.setZero();
            read_vec6(s.at("mismatch"), c.sim.mismatch, "sim.mismatch");
        }
    }

    if (j.contains("schedule")) {
        if (!j.at("schedule").is_string()) throw ConfigError("schedule: expected a string");
        c.schedule = schedule_kind_from_string(j.at("schedule").get<std::string>());
    }
    read(j, "output_dir", c.output_dir, "config");
    read(j, "zero_threshold", c.zero_threshold, "config");

    c.validate();
    return c;
}

// Every field written out, defaults included.
inline json config_to_json(const ExperimentConfig& c) {
    using detail::vec6_json;
    json j;
    j["plant"] = {{"m", c.plant.m},
                  {"I_chi", c.plant.I_chi},
                  {"I_psi", c.plant.I_psi},
                  {"I_zeta", c.plant.I_zeta},
                  {"c", vec6_json(c.plant.c)}};

    json axes = json::object();
    for (std::size_t i = 0; i < 6; ++i) {
        const AxisConfig& a = c.trajectory.axes[i];
        axes[coordinate_names()[i]] = {{"kind", a.kind},         {"stroke", a.stroke},     {"t_jerk", a.t_jerk},
                                       {"t_accel", a.t_accel},   {"t_cruise", a.t_cruise}, {"v_max", a.v_max},
                                       {"a_max", a.a_max},       {"j_max", a.j_max},       {"duration", a.duration}};
    }
    j["trajectory"] = {{"start_time", c.trajectory.start_time}, {"axes", axes}};

    j["disturbance"] = {{"channel", coordinate_names()[static_cast<std::size_t>(c.disturbance.channel)]},
                        {"shape", c.disturbance.shape == DisturbanceProfile::Shape::pulse ? "pulse" : "ramped"},
                        {"amplitude", c.disturbance.amplitude},
                        {"onset", c.disturbance.onset},
                        {"duration", c.disturbance.duration},
                        {"ramp", c.disturbance.ramp}};

    json channels = json::object();
    for (std::size_t i = 0; i < 6; ++i) {
        if (const auto& g = c.feedback.overrides[i]) {
            channels[coordinate_names()[i]] = {{"kp", g->kp}, {"ki", g->ki}, {"kd", g->kd}, {"omega_f", g->omega_f}};
        }
    }
    j["feedback"] = {{"bandwidth_hz", c.feedback.bandwidth_hz}, {"channels", channels}};

    json kp = json::array();
    const Mat6 K = c.stability_kp();
    for (int r = 0; r < 6; ++r) {
        json row = json::array();
        for (int k = 0; k < 6; ++k) row.push_back(K(r, k));
        kp.push_back(row);
    }
    j["stability"] = {{"Kp", kp},
                      {"Kv", vec6_json(c.stability.Kv)},
                      {"epsilon_max", c.stability.epsilon_max},
                      {"scenario", c.stability.scenario}};

    json methods = json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["scenarios"] = c.scenarios;
    j["sim"] = {{"Ts", c.sim.Ts}, {"substeps", c.sim.substeps}, {"horizon", c.sim.horizon},
                {"mismatch", vec6_json(c.sim.mismatch)}};
    j["schedule"] = to_string(c.schedule);
    j["output_dir"] = c.output_dir;
    j["zero_threshold"] = c.zero_threshold;
    return j;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline std::string serialize_config(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

}  // namespace maglev
