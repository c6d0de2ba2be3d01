#include "vortlab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace vortlab;

int main(int argc, char** argv)
{
    CLI::App app{"Vorticity transport with sources and sinks: runs, sweeps and checks"};
    app.require_subcommand(1);
    CliOptions o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "scenario file (reference scenario when omitted)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--nu", o.nu, "viscosities, overriding the scenario")->delimiter(',');
        sub->add_option("--grid", o.grid, "cells across the bounding box");
        sub->add_option("--tol-scale", o.tol_scale, "multiplier on every tolerance");
        sub->add_option("--threads", o.threads, "worker threads (VORTLAB_THREADS otherwise)");
    };
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const CliOptions&, std::ostream&);
    };
    const Sub subs[] = {{"run", "run the scenario for each viscosity and write the records", cmd_run},
                        {"sweep", "vanishing-viscosity sweep", cmd_sweep},
                        {"check", "budgets, weak-form residuals and duality on one run", cmd_check},
                        {"kernel", "half-plane kernel oracle and boundedness scans", cmd_kernel},
                        {"dlvp", "convex gauge construction and certificates", cmd_dlvp}};
    int (*chosen)(const CliOptions&, std::ostream&) = nullptr;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        common(sub);
        sub->callback([&chosen, fn = s.fn] { chosen = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code::parse;
    }
    return guarded([&] { return chosen(o, std::cout); }, std::cerr);
}
