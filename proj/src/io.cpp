#include "vortlab/io.hpp"
#include "vortlab/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace vortlab {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& path, bool binary = false)
{
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f)
        throw IoError("cannot write " + path);
    f.precision(17);
    return f;
}

std::string level_name(int k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "omega_%05d", k);
    return buf;
}

} // namespace

std::string format_double(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void make_dirs(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create directory " + dir);
}

void write_summary(const Summary& s, const std::string& path)
{
    auto out = open_out(path);
    for (const auto& [k, v] : s)
        out << k << '=' << v << '\n';
}

void write_record(const RunRecord& rec, const std::string& dir)
{
    make_dirs(dir + "/fields");
    make_dirs(dir + "/budgets");
    const Domain& d = *rec.domain();
    const auto snaps = rec.snapshot_indices();

    Summary m{{"scenario", rec.scenario_id},
              {"stepper", rec.stepper},
              {"nu", format_double(rec.nu)},
              {"grid_n", std::to_string(d.grid_n())},
              {"h", format_double(d.h())},
              {"fluid_cells", std::to_string(d.num_fluid())},
              {"holes", std::to_string(d.num_holes())},
              {"levels", std::to_string(rec.steps.size())},
              {"t_end", rec.steps.empty() ? "0" : format_double(rec.steps.back().t)},
              {"snapshots", std::to_string(snaps.size())},
              {"source_crossings", std::to_string(rec.diagnostics.source_crossings)},
              {"sink_crossings", std::to_string(rec.diagnostics.sink_crossings)},
              {"outer_crossings", std::to_string(rec.diagnostics.outer_crossings)},
              {"failed", rec.failed ? "1" : "0"}};
    if (rec.failed)
        m.emplace_back("failure", rec.failure);
    write_summary(m, dir + "/manifest.txt");

    for (int k : snaps) {
        const StepRecord& s = rec.steps[k];
        try {
            write_field_csv(dir + "/fields/" + level_name(k) + ".csv", s.omega);
            write_field_raw(dir + "/fields/" + level_name(k) + ".f64", s.omega);
        } catch (const Error& e) {
            throw IoError(e.what());
        }
    }

    auto circ = open_out(dir + "/circulations.csv");
    circ << "t";
    for (int i = 0; i < d.num_holes(); ++i)
        circ << ",C_" << i + 1;
    circ << ",C_outer,residual\n";
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        const auto& s = rec.steps[k];
        circ << s.t;
        for (double c : s.circ.C)
            circ << ',' << c;
        circ << ',' << s.circ.C_outer << ',' << (k < rec.ledger.size() ? rec.ledger[k].identity_residual : 0.0)
             << '\n';
    }

    auto led = open_out(dir + "/budgets/ledger.csv");
    led << "t,mass,inflow_rate,outflow_rate,identity_residual\n";
    for (const auto& r : rec.ledger)
        led << r.t << ',' << r.mass << ',' << r.inflow_rate << ',' << r.outflow_rate << ',' << r.identity_residual
            << '\n';
}

} // namespace vortlab
