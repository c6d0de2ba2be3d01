#include "vortlab/cli.hpp"
#include "vortlab/analysis.hpp"
#include "vortlab/errors.hpp"
#include "vortlab/io.hpp"
#include "vortlab/parallel.hpp"
#include "vortlab/weakform.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace vortlab {

namespace {

constexpr double pi = std::numbers::pi;

std::string nu_dir(double nu)
{
    std::ostringstream s;
    s << "nu_" << nu;
    return s.str();
}

int report(const std::vector<CheckLine>& lines, const std::string& path, std::ostream& log)
{
    Summary s;
    bool all = true;
    for (const auto& l : lines) {
        log << (l.pass ? "PASS " : "FAIL ") << l.name << " value=" << l.value << " limit=" << l.limit << '\n';
        s.emplace_back(l.name, format_double(l.value));
        s.emplace_back(l.name + ".limit", format_double(l.limit));
        s.emplace_back(l.name + ".pass", l.pass ? "1" : "0");
        all = all && l.pass;
    }
    s.emplace_back("pass", all ? "1" : "0");
    write_summary(s, path);
    return all ? exit_code::ok : exit_code::assertion;
}

CheckLine at_most(std::string name, double value, double limit)
{
    return {std::move(name), value, limit, value <= limit};
}

CheckLine at_least(std::string name, double value, double limit)
{
    return {std::move(name), value, limit, value >= limit};
}

/// Gaussian bump centred in the bounding box, a quarter of its width across.
TestFunction bump_test(const DomainPtr& d, double t_end)
{
    const double L = d->nx() * d->h();
    const Vec2 c{d->origin().x + 0.5 * d->nx() * d->h(), d->origin().y + 0.5 * d->ny() * d->h() + 0.1 * L};
    const double s2 = (0.25 * L) * (0.25 * L);
    auto f = [=](Vec2 p) { return std::exp(-0.5 * dot(p - c, p - c) / s2); };
    auto g = [=](Vec2 p) { return (-1.0 / s2) * f(p) * (p - c); };
    return make_test_function(d, f, g, t_end);
}

std::vector<double> c0_betas(int holes)
{
    std::vector<double> b;
    for (int i = 0; i < holes; ++i)
        b.push_back(1.0 / (i + 1));
    return b;
}

/// f_j = j on a set of measure 1/j.
std::vector<SampledFunction> concentrating_family(int J)
{
    std::vector<SampledFunction> fam;
    for (int j = 1; j <= J; ++j)
        fam.push_back({{double(j), 0.0}, {1.0 / j, 1.0 - 1.0 / j}});
    return fam;
}

/// f_j = min(j, x^{-1/2}) on (0, 1), midpoint samples.
std::vector<SampledFunction> capped_power_family(int J, int cells)
{
    std::vector<SampledFunction> fam;
    for (int j = 1; j <= J; ++j) {
        SampledFunction f;
        for (int k = 0; k < cells; ++k) {
            const double x = (k + 0.5) / cells;
            f.values.push_back(std::min<double>(j, 1.0 / std::sqrt(x)));
            f.measure.push_back(1.0 / cells);
        }
        fam.push_back(std::move(f));
    }
    return fam;
}

} // namespace

Scenario resolve_scenario(const CliOptions& o)
{
    Scenario s = o.scenario ? load_scenario(*o.scenario) : reference_scenario();
    if (o.grid) {
        if (*o.grid < 8)
            throw ValidationError("--grid must be at least 8");
        s.domain.grid_n = *o.grid;
    }
    if (!o.nu.empty())
        s.nu = o.nu;
    for (double nu : s.nu)
        if (!(nu >= 0.0) || !std::isfinite(nu))
            throw ValidationError("viscosities must be finite and nonnegative");
    if (!(o.tol_scale > 0.0))
        throw ValidationError("--tol-scale must be positive");
    validate_scenario(s);
    return s;
}

int cmd_run(const CliOptions& o, std::ostream& log)
{
    const Scenario s = resolve_scenario(o);
    FlowModelPtr model = make_flow_model(s);
    make_dirs(o.out);
    int code = exit_code::ok;
    for (double nu : s.nu) {
        const RunRecord rec = run_scenario(s, nu, s.T, model);
        const std::string dir = s.nu.size() == 1 ? o.out : o.out + "/" + nu_dir(nu);
        write_record(rec, dir);
        make_dirs(dir + "/reports");
        lp_budget(rec, s.p).write_csv(dir + "/budgets/lp.csv");
        log << "run nu=" << nu << " levels=" << rec.steps.size() << " -> " << dir << '\n';
        if (rec.failed) {
            log << "  failed: " << rec.failure << '\n';
            code = exit_code::solver;
        }
    }
    return code;
}

int cmd_sweep(const CliOptions& o, std::ostream& log)
{
    const Scenario s = resolve_scenario(o);
    SweepOptions so;
    so.p = s.p;
    so.threads = o.threads;
    const SweepReport rep = nu_sweep(s, s.nu, s.T, so);
    make_dirs(o.out + "/reports");
    if (!rep.failures.empty()) {
        for (const auto& f : rep.failures)
            log << "failed: " << f << '\n';
        return exit_code::solver;
    }
    rep.write_csv(o.out + "/sweep.csv");
    for (std::size_t k = 0; k < rep.terminal.size(); ++k)
        log << "nu " << rep.nu[k] << " vs " << rep.nu[k + 1] << ": terminal " << rep.terminal[k] << " outflow "
            << rep.outflow[k] << " circulation " << rep.circulation[k] << '\n';
    std::vector<CheckLine> lines{{"terminal_decreasing", double(rep.terminal_decreasing), 1.0, rep.terminal_decreasing},
                                 {"outflow_decreasing", double(rep.outflow_decreasing), 1.0, rep.outflow_decreasing}};
    return report(lines, o.out + "/reports/sweep.txt", log);
}

int cmd_check(const CliOptions& o, std::ostream& log)
{
    const Scenario s = resolve_scenario(o);
    const double k = o.tol_scale;
    const double nu = s.nu.front();
    FlowModelPtr model = make_flow_model(s);
    const RunRecord rec = run_scenario(s, nu, s.T, model);
    if (rec.failed)
        throw SolverError(rec.failure);
    make_dirs(o.out + "/budgets");
    make_dirs(o.out + "/reports");
    write_record(rec, o.out);
    const Domain& d = *model->domain;

    std::vector<CheckLine> lines;
    double id = 0.0;
    for (const auto& r : rec.ledger)
        id = std::max(id, std::abs(r.identity_residual));
    lines.push_back(at_most("identity_residual", id, k * (d.h() + rec.dt_history.front())));

    for (double q : {1.0, 2.0, 4.0}) {
        const BudgetReport b = lp_budget(rec, q);
        b.write_csv(o.out + "/budgets/lp_q" + std::to_string(int(q)) + ".csv");
        lines.push_back(at_least("lp_budget_q" + std::to_string(int(q)), b.min_relative_slack(), -k * s.tol.budget));
    }
    const BudgetReport gb = g_budget(rec, closed_form_gauge());
    gb.write_csv(o.out + "/budgets/gauge.csv");
    lines.push_back(at_least("gauge_budget", gb.min_relative_slack(), -k * s.tol.budget));
    double diss = 0.0;
    for (const auto& r : gb.rows)
        diss = std::min(diss, r.dissipation);
    lines.push_back(at_least("gauge_dissipation", diss, 0.0));
    lines.push_back(at_most("linf_ratio", linf_bound(rec),
                            nu > 0.0 ? 1.0 + k * s.tol.linf_viscous * d.h() : 1.0 + 1e-12));

    const TestFunction tf = bump_test(model->domain, s.T);
    ResidualReport dr = distributional_residual(rec, tf);
    dr.write_csv(o.out + "/reports/distributional.csv");
    lines.push_back(at_most("distributional_residual", dr.relative(), k * s.tol.residual));
    ResidualReport rr = renormalized_residual(rec, tf);
    rr.write_csv(o.out + "/reports/renormalized.csv");
    lines.push_back(at_most("renormalized_residual", rr.relative(), k * s.tol.residual));
    if (d.num_holes() > 0) {
        const TestFunction c0 = make_c0_test(*model->basis, c0_betas(d.num_holes()), s.T);
        ResidualReport sr = symmetrized_residual(rec, c0, o.threads);
        sr.write_csv(o.out + "/reports/symmetrized.csv");
        lines.push_back(at_most("symmetrized_residual", sr.relative(), k * s.tol.residual));
        const auto cmp =
            compare_nonlinear_term(rec.steps[rec.steps.size() / 2].omega, c0, model->basis, o.threads);
        lines.push_back(at_most("kernel_direct_gap", cmp.gap(), k * s.tol.residual));
    }

    const Vec2 c{d.origin().x + 0.5 * d.nx() * d.h(), d.origin().y + 0.5 * d.ny() * d.h()};
    const double L = d.nx() * d.h();
    DualityInputs di;
    di.chi = [=](Vec2 p, double) { return std::exp(-dot(p - c, p - c) / (0.02 * L * L)); };
    di.phi_T = [=](Vec2 p) {
        const Vec2 q = p - c - Vec2{0.0, 0.15 * L};
        return std::exp(-dot(q, q) / (0.02 * L * L));
    };
    const DualityReport du = duality_check(rec, di);
    lines.push_back(at_most("duality", du.relative(), k * s.tol.duality));
    return report(lines, o.out + "/reports/check.txt", log);
}

int cmd_kernel(const CliOptions& o, std::ostream& log)
{
    std::vector<CheckLine> lines;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(1e-3, 2.0);
    double worst = 0.0, tangential = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x{ux(rng), uy(rng)}, y{ux(rng), uy(rng)};
        const Vec2 z = x - y;
        const double r2 = dot(z, z), den = pi * (r2 + 4 * x.y * y.y);
        // Gradient of the Dirichlet Green function in each slot, summed.
        const Vec2 kxy = (1.0 / den) * (Vec2{0.0, y.y} - (2 * x.y * y.y / r2) * z);
        const Vec2 kyx = (1.0 / den) * (Vec2{0.0, x.y} + (2 * x.y * y.y / r2) * z);
        const Vec2 ref = kxy + kyx;
        const Vec2 got = halfplane_symmetrized_kernel(x, y);
        worst = std::max(worst, std::abs(got.y - ref.y) / std::abs(ref.y));
        tangential = std::max(tangential, std::abs(got.x));
    }
    lines.push_back(at_most("halfplane_relative_error", worst, 1e-12));
    lines.push_back(at_most("halfplane_tangential", tangential, 0.0));
    lines.push_back(at_most("halfplane_example_1",
                            std::abs(halfplane_symmetrized_kernel({0, 1}, {1, 1}).y - 2.0 / (5.0 * pi)), 1e-12));
    lines.push_back(at_most("halfplane_example_2",
                            std::abs(halfplane_symmetrized_kernel({0, 1}, {2, 3}).y - 1.0 / (5.0 * pi)), 1e-12));

    const Scenario s = resolve_scenario(o);
    const DomainPtr d = build_domain(s.domain);
    auto basis = std::make_shared<HarmonicBasis>(harmonic_basis(d));
    KernelCache cache(basis);
    const int N = d->num_holes();
    std::vector<std::vector<double>> betas;
    for (int i = 0; i < N; ++i) {
        std::vector<double> e(N, 0.0);
        e[i] = 1.0;
        betas.push_back(e);
    }
    if (N >= 2) {
        std::vector<double> e(N, 0.0);
        e[0] = 1.0;
        e[1] = -1.0;
        betas.push_back(e);
    }
    make_dirs(o.out + "/reports");
    for (const auto& b : betas) {
        std::ostringstream name;
        name << "scan_c0";
        for (double x : b)
            name << '_' << x;
        const ScanReport r = h_phi_bound_scan(make_c0_test(*basis, b, 1.0), cache);
        lines.push_back(at_most(name.str(), r.ratio, 5.0 * o.tol_scale));
    }
    const TestFunction x1 = make_test_function(d, [](Vec2 p) { return p.x; }, [](Vec2) { return Vec2{1, 0}; }, 1.0);
    lines.push_back(at_least("scan_x1_excess", h_phi_bound_scan(x1, cache).ratio, 10.0));
    return report(lines, o.out + "/reports/kernel.txt", log);
}

int cmd_dlvp(const CliOptions& o, std::ostream& log)
{
    std::vector<CheckLine> lines;
    const GaugeCertificate c = dlvp_gauge(capped_power_family(20, 4096));
    log << "breakpoints:";
    for (double n : c.gauge.N)
        log << ' ' << n;
    log << '\n';
    lines.push_back({"gauge_convex", double(c.gauge.convex()), 1.0, c.gauge.convex()});
    lines.push_back({"gauge_even", double(c.gauge.even()), 1.0, c.gauge.even()});
    lines.push_back({"gauge_superlinear", double(c.gauge.superlinear()), 1.0, c.gauge.superlinear()});
    lines.push_back(at_most("direct_sup_vs_certified", c.direct_sup, c.certified_bound));
    bool rejected = false;
    try {
        dlvp_gauge(concentrating_family(20));
    } catch (const NotUniformlyIntegrable& e) {
        rejected = true;
        log << "concentrating family rejected: " << e.what() << '\n';
    }
    lines.push_back({"non_ui_rejected", double(rejected), 1.0, rejected});
    make_dirs(o.out + "/reports");
    return report(lines, o.out + "/reports/dlvp.txt", log);
}

int guarded(const std::function<int()>& cmd, std::ostream& err)
{
    try {
        return cmd();
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_code::parse;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return exit_code::validation;
    } catch (const GeometryError& e) {
        err << "validation error: " << e.what() << '\n';
        return exit_code::validation;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return exit_code::io;
    } catch (const Error& e) {
        err << "solver error: " << e.what() << '\n';
        return exit_code::solver;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << '\n';
        return exit_code::solver;
    }
}

} // namespace vortlab
