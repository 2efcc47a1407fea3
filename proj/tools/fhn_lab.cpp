// fhn_lab: experiment driver for the stochastic lattice FitzHugh-Nagumo lab.
//
//   fhn_lab <subcommand> [--config file] [--out dir] [--seeds 1,2,3]
//   fhn_lab --print-defaults
//
// Exit codes: 0 success, 1 experiment assertion failed, 2 bad config/usage,
// 3 numerical diagnostic (blow-up / step-size failure).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fhn/config.hpp"
#include "fhn/errors.hpp"
#include "fhn/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Simulation lab for a stochastic lattice FitzHugh-Nagumo system"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir;
    std::string seeds_csv;
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults,
                 "print the default config to stdout and exit");

    auto describe = [](const std::string& name) -> std::string {
        if (name == "noise-test") return "sanity checks on the stable-noise sampler";
        if (name == "ou-test") return "stationary OU evaluation checks";
        if (name == "simulate") return "integrate the transformed system per seed";
        if (name == "conjugacy") return "direct vs transformed integrator comparison";
        if (name == "absorb") return "pullback absorption experiment";
        if (name == "tempered") return "temperedness of the absorbing radius";
        if (name == "tails") return "asymptotic tail-nullness experiment";
        if (name == "attractor") return "pullback attractor cloud study";
        if (name == "all") return "run every subcommand into one output directory";
        return "";
    };
    std::vector<std::string> names;
    for (const auto& [name, fn] : fhn::subcommand_table()) names.push_back(name);
    names.push_back("all");
    std::string chosen;
    for (const std::string& name : names) {
        CLI::App* sub = app.add_subcommand(name, describe(name));
        sub->add_option("--config", config_path, "config file (INI; defaults when omitted)");
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seeds", seeds_csv, "comma-separated seed list override");
        sub->callback([&chosen, name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        fhn::ExperimentConfig cfg;
        if (print_defaults) {
            std::cout << fhn::serialize_config(cfg);
            return 0;
        }
        if (chosen.empty()) {
            std::cerr << "fhn_lab: expected a subcommand (see --help)\n";
            return 2;
        }
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw fhn::config_error("cannot open config file " + config_path);
            std::ostringstream ss;
            ss << is.rdbuf();
            cfg = fhn::parse_config(ss.str());
        }
        if (!seeds_csv.empty()) {
            cfg.seeds = fhn::detail::parse_list<std::uint64_t>(
                "seeds", seeds_csv, 0, [](const std::string& k, const std::string& v, int l) {
                    return static_cast<std::uint64_t>(fhn::detail::parse_int(k, v, l));
                });
            cfg.validate();
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        const fhn::RunResult res = fhn::run_subcommand(chosen, cfg, cfg.out_dir);
        if (!res.pass) {
            for (const std::string& f : res.failures) std::cerr << "FAIL " << f << "\n";
            return 1;
        }
        std::cout << "ok: " << chosen << " (outputs in " << cfg.out_dir << ")\n";
        return 0;
    } catch (const fhn::diagnostic_error& e) {
        std::cerr << "diagnostic: " << e.what() << "\n";
        return 3;
    } catch (const fhn::config_error& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
