#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "maglev/config.hpp"
#include "maglev/feedback.hpp"
#include "maglev/simulation.hpp"

namespace maglev {

inline constexpr const char* kVersion = "1.0.0";

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(c))));
    return buf;
}

inline SimConfig scenario_sim_config(const ExperimentConfig& c, const Scenario& s) {
    SimConfig sc = c.sim;
    if (!s.mismatch) sc.mismatch.setZero();
    sc.disturbance = s.disturbance;
    return sc;
}

// Runs one (scenario, method) pair. Numerical failures surface as SimulationError.
inline SimulationRecord run_scenario(const ExperimentConfig& c, const Scenario& s, Method m) {
    try {
        const auto ff = make_feedforward(m, c.plant, c.schedule);
        const MotionProfile traj = c.trajectory.build();
        const SimConfig sc = scenario_sim_config(c, s);
        if (s.closed_loop) {
            const FeedbackLaw fb = c.feedback.gains(c.plant);
            return run_closed_loop(sc, c.plant, *ff, fb, traj, c.disturbance, s.name);
        }
        return run_open_loop(sc, c.plant, *ff, traj, s.name);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw SimulationError(s.name + "/" + to_string(m) + ": " + e.what());
    }
}

struct RunSummary {
    std::string scenario;
    Method method;
    ErrorMetrics metrics;
    std::string file;
};

inline std::string run_file_name(const std::string& scenario, Method m) {
    return scenario + "__" + to_string(m) + ".csv";
}

inline std::string metrics_csv_header() {
    std::string h = "scenario,method,index";
    for (const char* kind : {"l2", "linf"}) {
        for (const auto& n : coordinate_names()) h += std::string(",") + kind + "_" + n;
    }
    return h;
}

inline void write_metrics_csv(const std::vector<RunSummary>& runs, std::ostream& out) {
    out << metrics_csv_header() << '\n';
    for (const auto& r : runs) {
        out << r.scenario << ',' << to_string(r.method) << ',' << table_index(r.method);
        for (int i = 0; i < 6; ++i) out << ',' << format_double(r.metrics.l2(i));
        for (int i = 0; i < 6; ++i) out << ',' << format_double(r.metrics.linf(i));
        out << '\n';
    }
}

// Parsed back from metrics.csv: (scenario, method) -> metrics.
using MetricsTable = std::map<std::pair<std::string, std::string>, ErrorMetrics>;

inline MetricsTable read_metrics_csv(std::istream& in) {
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header()) throw ConfigError("metrics.csv: unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 15) throw ConfigError("metrics.csv: expected 15 columns");
        ErrorMetrics m;
        for (int i = 0; i < 6; ++i) {
            m.l2(i) = std::stod(cells[static_cast<std::size_t>(3 + i)]);
            m.linf(i) = std::stod(cells[static_cast<std::size_t>(9 + i)]);
        }
        t[{cells[0], cells[1]}] = m;
    }
    return t;
}

// Text table: one block per scenario, one row per method.
inline void write_metrics_table(const std::vector<RunSummary>& runs, double zero_threshold, std::ostream& out) {
    auto cell = [&](double v) {
        char buf[32];
        if (std::abs(v) < zero_threshold) {
            std::snprintf(buf, sizeof buf, "%12s", "0");
        } else {
            std::snprintf(buf, sizeof buf, "%12.4e", v);
        }
        return std::string(buf);
    };
    std::vector<std::string> order;
    for (const auto& r : runs) {
        if (std::find(order.begin(), order.end(), r.scenario) == order.end()) order.push_back(r.scenario);
    }
    char note[128];
    std::snprintf(note, sizeof note, "# l2 = sqrt(sum_k e(kTs)^2), linf = max_k |e(kTs)|; entries below %g print as 0\n",
                  zero_threshold);
    out << note;
    for (const auto& sc : order) {
        out << "\n[" << sc << "]\n";
        char head[64];
        std::snprintf(head, sizeof head, "%-22s", "method");
        out << head;
        for (const char* kind : {"l2", "linf"}) {
            for (const auto& n : coordinate_names()) {
                char h[32];
                std::snprintf(h, sizeof h, "%12s", (std::string(kind) + ":" + n).c_str());
                out << h;
            }
        }
        out << '\n';
        for (const auto& r : runs) {
            if (r.scenario != sc) continue;
            char name[64];
            std::snprintf(name, sizeof name, "%d) %-19s", table_index(r.method), to_string(r.method).c_str());
            out << name;
            for (int i = 0; i < 6; ++i) out << cell(r.metrics.l2(i));
            for (int i = 0; i < 6; ++i) out << cell(r.metrics.linf(i));
            out << '\n';
        }
    }
}

struct CampaignOptions {
    bool plot_data = false;
    int plot_stride = 10;
    std::string command = "simulate";
};

struct CampaignResult {
    std::vector<RunSummary> runs;
    std::vector<std::string> files;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
}

inline void write_manifest(const ExperimentConfig& c, const std::filesystem::path& dir, const std::string& command,
                           const std::vector<std::string>& files) {
    json m;
    m["tool"] = "maglev";
    m["version"] = kVersion;
    m["command"] = command;
    m["config_hash"] = "fnv1a64:" + config_hash(c);
    m["determinism"] = "no random inputs; an identical config reproduces every file byte for byte";
    m["files"] = files;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace detail

inline CampaignResult run_campaign(const ExperimentConfig& c, const std::string& out_dir,
                                   const CampaignOptions& opt = {}, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    CampaignResult result;
    std::map<std::string, std::vector<std::pair<Method, std::vector<Vec6>>>> traces;
    std::map<std::string, std::vector<double>> trace_t;

    for (const auto& sname : c.scenarios) {
        const Scenario& s = scenario_by_name(sname);
        for (Method m : c.methods) {
            if (log) *log << "run " << s.name << " / " << to_string(m) << '\n';
            const SimulationRecord rec = run_scenario(c, s, m);
            const std::string file = run_file_name(s.name, m);
            write_record_csv(rec, (dir / file).string());
            result.files.push_back(file);
            result.runs.push_back({s.name, m, error_metrics(rec), file});
            if (opt.plot_data) {
                std::vector<Vec6> e;
                std::vector<double> t;
                for (std::size_t k = 0; k < rec.size(); k += static_cast<std::size_t>(opt.plot_stride)) {
                    e.push_back(rec.e[k]);
                    t.push_back(rec.t[k]);
                }
                traces[s.name].emplace_back(m, std::move(e));
                trace_t[s.name] = std::move(t);
            }
        }
    }

    {
        std::ofstream out(dir / "metrics.csv", std::ios::binary);
        if (!out) throw Error("cannot write metrics.csv");
        write_metrics_csv(result.runs, out);
        result.files.push_back("metrics.csv");
    }
    {
        std::ofstream out(dir / "metrics.txt", std::ios::binary);
        write_metrics_table(result.runs, c.zero_threshold, out);
        result.files.push_back("metrics.txt");
    }
    if (opt.plot_data) {
        fs::create_directories(dir / "plots");
        for (const auto& [sname, rows] : traces) {
            const std::string file = "plots/errors_" + sname + ".csv";
            std::ofstream out(dir / file, std::ios::binary);
            out << 't';
            for (const auto& [m, _] : rows) {
                for (int i = 3; i < 6; ++i) out << ',' << to_string(m) << '_' << coordinate_names()[static_cast<std::size_t>(i)];
            }
            out << '\n';
            const auto& t = trace_t[sname];
            for (std::size_t k = 0; k < t.size(); ++k) {
                out << format_double(t[k]);
                for (const auto& [m, e] : rows) {
                    for (int i = 3; i < 6; ++i) out << ',' << format_double(e[k](i));
                }
                out << '\n';
            }
            result.files.push_back(file);
        }
    }
    detail::write_text_file(dir / "config.json", serialize_config(c));
    result.files.push_back("config.json");
    detail::write_manifest(c, dir, opt.command, result.files);
    return result;
}

// Command-line overrides -----------------------------------------------------

// "chi=5e-6,psi=1urad": coordinates not named are zero.
inline Vec6 parse_mismatch_override(const std::string& text) {
    Vec6 m = Vec6::Zero();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--mismatch: expected coord=value, got '" + item + "'");
        m(coordinate_index(item.substr(0, eq))) = parse_quantity(json(item.substr(eq + 1)), "--mismatch");
    }
    return m;
}

// Maps each scenario to its variant with the disturbance switched on or off.
// Open-loop scenarios have no disturbed variant and are dropped when on.
inline std::vector<std::string> with_disturbance(const std::vector<std::string>& scenarios, bool on) {
    std::vector<std::string> out;
    for (const auto& name : scenarios) {
        const Scenario& s = scenario_by_name(name);
        if (on && !s.closed_loop) continue;
        std::string target;
        for (const auto& t : all_scenarios()) {
            if (t.closed_loop == s.closed_loop && t.mismatch == s.mismatch && t.disturbance == on) target = t.name;
        }
        if (std::find(out.begin(), out.end(), target) == out.end()) out.push_back(target);
    }
    if (out.empty()) throw ConfigError("--disturbance on leaves no closed-loop scenario to run");
    return out;
}

// Stability pipeline --------------------------------------------------------

struct StabilityReport {
    double epsilon = 0.0;
    bool feasible = false;
    bool v_positive = true;         // V > 0 wherever (e, e') != 0
    bool rate_nonpositive = true;   // dV/dt <= 0 at every sample
    double max_rate = -std::numeric_limits<double>::infinity();
    std::size_t samples = 0;

    bool stable() const { return feasible && v_positive && rate_nonpositive; }

    std::string verdict() const {
        char buf[160];
        if (stable()) {
            std::snprintf(buf, sizeof buf, "stable: \u03b5* = %.6g, V\u0307 \u2264 0 at all samples", epsilon);
        } else if (!feasible) {
            std::snprintf(buf, sizeof buf, "not verified: no feasible \u03b5 over %zu samples", samples);
        } else {
            std::snprintf(buf, sizeof buf, "not verified: \u03b5* = %.6g but V or V\u0307 has the wrong sign (max V\u0307 = %.3g)",
                          epsilon, max_rate);
        }
        return buf;
    }
};

// Global-IC feedforward with continuous W_fb = -Kp e - Kv e'.
inline SimulationRecord run_stability_simulation(const ExperimentConfig& c) {
    const Scenario& s = scenario_by_name(c.stability.scenario);
    if (!s.closed_loop || s.disturbance) {
        throw ConfigError("stability.scenario must be a closed-loop scenario without disturbance");
    }
    const Mat6 Kp = c.stability_kp();
    LyapunovConfig{Kp, 1.0}.validate();
    try {
        const auto ff = make_feedforward(Method::lpv_global_ic, c.plant, c.schedule);
        const FeedbackLaw fb = ProportionalFeedback{Kp, c.stability.Kv.asDiagonal()};
        return run_closed_loop(scenario_sim_config(c, s), c.plant, *ff, fb, c.trajectory.build(), c.disturbance,
                               s.name);
    } catch (const Error& e) {
        throw SimulationError(std::string("stability run: ") + e.what());
    }
}

inline std::vector<StabilitySample> stability_samples(const SimulationRecord& rec) {
    std::vector<StabilitySample> out;
    out.reserve(rec.size());
    for (std::size_t k = 0; k < rec.size(); ++k) {
        out.push_back({{rec.q[k], rec.qdot[k]}, rec.q[k] - rec.r[k], rec.qdot[k] - rec.rdot[k]});
    }
    return out;
}

// Writes stability.csv (t, V, Vdot, V_pd, Vdot_nd) when out is non-null.
inline StabilityReport assess_stability(const ExperimentConfig& c, const SimulationRecord& rec, std::ostream* out) {
    const Mat6 Kp = c.stability_kp();
    const Mat6 Kv = c.stability.Kv.asDiagonal();
    const auto samples = stability_samples(rec);
    StabilityReport rep;
    rep.samples = samples.size();
    const EpsilonSearch es = find_epsilon_search(samples, Kp, c.plant, Kv, c.stability.epsilon_max);
    rep.feasible = es.feasible;
    rep.epsilon = es.epsilon;
    if (!es.feasible) return rep;

    const LyapunovConfig lc{Kp, es.epsilon};
    const Mat6 D_eff = c.plant.damping() + Kv;
    if (out) *out << "t,V,Vdot,V_pd,Vdot_nd\n";
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        const double V = lyapunov_value(s.e, s.edot, s.state.q, lc, c.plant);
        const double Vdot = lyapunov_rate(s.e, s.edot, s.state, lc, c.plant, Kv);
        const Mat6 M = mass_matrix(s.state.q, c.plant);
        const Mat6 C = coriolis_matrix(s.state.q, s.state.qdot, c.plant);
        const bool v_pd = schur_pd_check(Kp, M, M, Mat6::Zero(), lc.epsilon * lc.epsilon);
        const bool rate_nd = schur_pd_check(Kp, 0.5 * (D_eff - C.transpose()), D_eff, M, lc.epsilon);
        const bool off_eq = s.e.squaredNorm() + s.edot.squaredNorm() > 0.0;
        if (off_eq && !(V > 0.0)) rep.v_positive = false;
        if (Vdot > 0.0) rep.rate_nonpositive = false;
        rep.max_rate = std::max(rep.max_rate, Vdot);
        if (out) {
            *out << format_double(rec.t[k]) << ',' << format_double(V) << ',' << format_double(Vdot) << ','
                 << (v_pd ? 1 : 0) << ',' << (rate_nd ? 1 : 0) << '\n';
        }
    }
    return rep;
}

inline StabilityReport run_stability(const ExperimentConfig& c, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const SimulationRecord rec = run_stability_simulation(c);
    std::ofstream out(dir / "stability.csv", std::ios::binary);
    if (!out) throw Error("cannot write stability.csv");
    const StabilityReport rep = assess_stability(c, rec, &out);
    out.close();
    detail::write_text_file(dir / "config.json", serialize_config(c));
    detail::write_manifest(c, dir, "stability", {"stability.csv", "config.json"});
    return rep;
}

}  // namespace maglev
