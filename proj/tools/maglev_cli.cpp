#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maglev/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitUnstable = 4;

struct Options {
    std::string config;
    std::vector<std::string> methods;
    std::vector<std::string> scenarios;
    std::string mismatch;
    std::string disturbance;
    std::string out;
    bool quiet = false;
};

maglev::ExperimentConfig resolve(const Options& o) {
    std::string path = o.config;
    if (path.empty()) {
        if (const char* env = std::getenv("MAGLEV_CONFIG"); env && *env) path = env;
    }
    maglev::ExperimentConfig c = path.empty() ? maglev::ExperimentConfig{} : maglev::load_config(path);
    if (!o.methods.empty()) c.methods = maglev::parse_method_list(o.methods);
    if (!o.scenarios.empty()) c.scenarios = maglev::parse_scenario_list(o.scenarios);
    if (!o.mismatch.empty()) c.sim.mismatch = maglev::parse_mismatch_override(o.mismatch);
    if (!o.disturbance.empty()) c.scenarios = maglev::with_disturbance(c.scenarios, o.disturbance == "on");
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

int run_grid(const Options& o, const std::string& command) {
    const maglev::ExperimentConfig c = resolve(o);
    maglev::CampaignOptions opt;
    opt.command = command;
    opt.plot_data = command == "compare";
    const auto res = maglev::run_campaign(c, c.output_dir, opt, o.quiet ? nullptr : &std::cerr);
    if (command == "compare") {
        maglev::write_metrics_table(res.runs, c.zero_threshold, std::cout);
    } else {
        std::cout << res.runs.size() << " runs written to " << c.output_dir << '\n';
    }
    return kExitOk;
}

int run_stability(const Options& o) {
    const maglev::ExperimentConfig c = resolve(o);
    const auto rep = maglev::run_stability(c, c.output_dir);
    std::cout << rep.verdict() << '\n';
    return rep.stable() ? kExitOk : kExitUnstable;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maglev: feedforward comparison for a 6-DOF magnetically levitated planar actuator"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&o](CLI::App* sub, bool grid) {
        sub->add_option("--config", o.config, "JSON config (default: $MAGLEV_CONFIG, else built-in defaults)");
        if (grid) {
            sub->add_option("--method", o.methods, "methods, comma separated, or 'all'")->delimiter(',');
            sub->add_option("--scenario", o.scenarios, "scenarios, comma separated, or 'all'")->delimiter(',');
            sub->add_option("--disturbance", o.disturbance, "switch the scenarios' disturbance on or off")
                ->check(CLI::IsMember({"on", "off"}));
        }
        sub->add_option("--mismatch", o.mismatch, "initial offset, e.g. chi=5e-6 or chi=5urad,psi=1urad");
        sub->add_option("--out", o.out, "output directory");
        sub->add_flag("-q,--quiet", o.quiet, "no progress lines on stderr");
    };

    auto* simulate = app.add_subcommand("simulate", "run the scenario x method grid, write records and metrics");
    add_common(simulate, true);
    auto* compare = app.add_subcommand("compare", "as simulate, plus the metrics table and plot data");
    add_common(compare, true);
    auto* stability = app.add_subcommand("stability", "closed-loop Lyapunov check along the stability scenario");
    add_common(stability, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_grid(o, "simulate");
        if (compare->parsed()) return run_grid(o, "compare");
        return run_stability(o);
    } catch (const maglev::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const maglev::PreconditionViolation& e) {
        std::cerr << "precondition: " << e.what() << '\n';
        return kExitConfig;
    } catch (const maglev::NoFeasibleEpsilon& e) {
        std::cerr << "unstable: " << e.what() << '\n';
        return kExitUnstable;
    } catch (const std::exception& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return kExitSimulation;
    }
}
