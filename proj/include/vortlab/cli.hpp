#pragma once

#include "vortlab/scenario.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vortlab {

namespace exit_code {
constexpr int ok = 0;
constexpr int io = 1;
constexpr int parse = 2;
constexpr int validation = 3;
constexpr int solver = 4;
constexpr int assertion = 5;
} // namespace exit_code

struct CliOptions {
    std::optional<std::string> scenario; ///< reference scenario when unset
    std::string out = "vortlab-out";
    std::vector<double> nu;              ///< overrides the scenario's list
    std::optional<int> grid;
    double tol_scale = 1.0;
    int threads = 0;
};

/// One configured assertion.
struct CheckLine {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool pass = false;
};

/// Scenario from the options, with the grid and nu overrides applied.
Scenario resolve_scenario(const CliOptions& o);

int cmd_run(const CliOptions& o, std::ostream& log);
int cmd_sweep(const CliOptions& o, std::ostream& log);
int cmd_check(const CliOptions& o, std::ostream& log);
int cmd_kernel(const CliOptions& o, std::ostream& log);
int cmd_dlvp(const CliOptions& o, std::ostream& log);

/// Run a command, mapping each failure class to its exit code.
int guarded(const std::function<int()>& cmd, std::ostream& err);

} // namespace vortlab
