#include "vortlab/analysis.hpp"
#include "vortlab/errors.hpp"
#include "vortlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace vortlab {

namespace {

double sum_pow(const ScalarField& f, const std::function<double(double)>& F)
{
    double s = 0.0;
    for (double x : f.v)
        s += F(std::abs(x));
    return s * f.domain->h() * f.domain->h();
}

/// Boundary integral over holes of one kind of |g| F(|omega_b|).
double boundary_rate(const Domain& d, const StepRecord& r, ComponentKind kind,
                     const std::function<double(double)>& F)
{
    double s = 0.0;
    for (int i = 0; i < d.num_holes(); ++i) {
        if (d.component(i).kind != kind)
            continue;
        const auto& q = d.component(i).quad;
        for (std::size_t k = 0; k < q.size(); ++k)
            s += std::abs(r.g[i].values[k]) * F(std::abs(r.omega_b[i].values[k])) * q[k].weight;
    }
    return s;
}

BudgetReport budget(const RunRecord& rec, const std::string& name, const std::function<double(double)>& F,
                    const std::function<double(double)>* G2)
{
    BudgetReport rep;
    rep.gauge = name;
    if (rec.steps.empty())
        return rep;
    const Domain& d = *rec.domain();
    const double initial = sum_pow(rec.steps.front().omega, F);
    double in_acc = 0.0, out_acc = 0.0, in_prev = 0.0, out_prev = 0.0;
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        const StepRecord& r = rec.steps[k];
        const double in_rate = boundary_rate(d, r, ComponentKind::Source, F);
        const double out_rate = boundary_rate(d, r, ComponentKind::Sink, F);
        if (k > 0) {
            const double dt = r.t - rec.steps[k - 1].t;
            in_acc += 0.5 * dt * (in_rate + in_prev);
            out_acc += 0.5 * dt * (out_rate + out_prev);
        }
        in_prev = in_rate;
        out_prev = out_rate;
        BudgetRow row;
        row.t = r.t;
        row.interior = sum_pow(r.omega, F);
        row.outflow = out_acc;
        row.initial = initial;
        row.inflow = in_acc;
        if (G2 && rec.nu > 0.0) {
            double s = 0.0;
            for (int f = 0; f < d.num_fluid(); ++f)
                for (int dir : {East, North}) {
                    const int g = d.neighbor(f, dir);
                    if (g < 0)
                        continue;
                    const double dw = r.omega[g] - r.omega[f];
                    s += (*G2)(0.5 * (r.omega[g] + r.omega[f])) * dw * dw;
                }
            row.dissipation = rec.nu * s;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

double record_max(const RunRecord& rec)
{
    double m = 0.0;
    for (const auto& s : rec.steps) {
        m = std::max(m, max_abs(s.omega));
        for (const auto& b : s.omega_b)
            for (double x : b.values)
                m = std::max(m, std::abs(x));
    }
    return m;
}

double tail_gt(const std::vector<SampledFunction>& fam, double N, std::size_t count)
{
    double sup = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < fam[j].values.size(); ++k) {
            const double a = std::abs(fam[j].values[k]);
            if (a > N)
                s += a * fam[j].measure[k];
        }
        sup = std::max(sup, s);
    }
    return sup;
}

/// Breakpoints N_0..N_levels for the first `count` members.
std::vector<double> breakpoints(const std::vector<SampledFunction>& fam, std::size_t count, int max_levels,
                                bool stop_when_empty)
{
    std::vector<double> N{0.0};
    for (int i = 1; i <= max_levels; ++i) {
        const double target = std::ldexp(1.0, -i);
        const double prev = N.back();
        double lo = prev, hi = prev > 0.0 ? 2.0 * prev : 1.0;
        int guard = 0;
        while (tail_gt(fam, hi, count) >= target) {
            lo = hi;
            hi *= 2.0;
            if (++guard > 200)
                throw NotUniformlyIntegrable("tail does not fall below 2^-" + std::to_string(i));
        }
        for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (tail_gt(fam, mid, count) < target)
                hi = mid;
            else
                lo = mid;
        }
        // The tail only changes at sample values, so the largest sample value
        // in [lo, hi] is admissible as well.
        double snap = -1.0;
        for (std::size_t j = 0; j < count; ++j)
            for (double v : fam[j].values)
                if (std::abs(v) >= lo && std::abs(v) <= hi)
                    snap = std::max(snap, std::abs(v));
        if (snap >= 0.0 && tail_gt(fam, snap, count) < target)
            hi = snap;
        N.push_back(std::max(hi, 2.0 * prev));
        if (stop_when_empty && i >= 3 && tail_gt(fam, N.back(), count) == 0.0)
            break;
    }
    return N;
}

double family_max(const std::vector<SampledFunction>& fam, std::size_t count)
{
    double m = 0.0;
    for (std::size_t j = 0; j < count; ++j)
        for (double v : fam[j].values)
            m = std::max(m, std::abs(v));
    return m;
}

/// Linear interpolation of the record's vorticity in time.
ScalarField field_at(const RunRecord& r, double t)
{
    const auto& st = r.steps;
    if (t <= st.front().t)
        return st.front().omega;
    if (t >= st.back().t)
        return st.back().omega;
    std::size_t k = 1;
    while (st[k].t < t)
        ++k;
    const double a = (t - st[k - 1].t) / (st[k].t - st[k - 1].t);
    ScalarField out = st[k - 1].omega;
    for (int c = 0; c < out.size(); ++c)
        out[c] = (1 - a) * st[k - 1].omega[c] + a * st[k].omega[c];
    return out;
}

/// Interpolated per-hole boundary data at time t: (g, omega_b) on Sinks.
std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>> sink_traces_at(const RunRecord& r,
                                                                                            double t)
{
    const auto& st = r.steps;
    std::size_t k = 1;
    while (k + 1 < st.size() && st[k].t < t)
        ++k;
    double a = (t - st[k - 1].t) / (st[k].t - st[k - 1].t);
    a = std::clamp(a, 0.0, 1.0);
    const Domain& d = *r.domain();
    std::vector<std::vector<double>> g, w;
    for (int i = 0; i < d.num_holes(); ++i) {
        if (d.component(i).kind != ComponentKind::Sink)
            continue;
        const auto& g0 = st[k - 1].g[i].values;
        const auto& g1 = st[k].g[i].values;
        const auto& w0 = st[k - 1].omega_b[i].values;
        const auto& w1 = st[k].omega_b[i].values;
        std::vector<double> gi(g0.size()), wi(g0.size());
        for (std::size_t q = 0; q < g0.size(); ++q) {
            gi[q] = (1 - a) * g0[q] + a * g1[q];
            wi[q] = (1 - a) * w0[q] + a * w1[q];
        }
        g.push_back(std::move(gi));
        w.push_back(std::move(wi));
    }
    return {g, w};
}

double circulation_at(const RunRecord& r, double t, int i)
{
    const auto& st = r.steps;
    if (t <= st.front().t)
        return st.front().circ.C[i];
    if (t >= st.back().t)
        return st.back().circ.C[i];
    std::size_t k = 1;
    while (st[k].t < t)
        ++k;
    const double a = (t - st[k - 1].t) / (st[k].t - st[k - 1].t);
    return (1 - a) * st[k - 1].circ.C[i] + a * st[k].circ.C[i];
}

double lp_distance(const ScalarField& a, const ScalarField& b, double p)
{
    double s = 0.0;
    for (int k = 0; k < a.size(); ++k)
        s += std::pow(std::abs(a[k] - b[k]), p);
    return std::pow(s * a.domain->h() * a.domain->h(), 1.0 / p);
}

} // namespace

double BudgetReport::min_relative_slack(const std::vector<int>& rows_used) const
{
    double m = std::numeric_limits<double>::infinity();
    auto visit = [&](const BudgetRow& r) {
        const double scale = r.rhs();
        if (scale > 0.0)
            m = std::min(m, r.slack() / scale);
        else
            m = std::min(m, r.slack() == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity());
    };
    if (rows_used.empty())
        for (const auto& r : rows)
            visit(r);
    else
        for (int k : rows_used)
            visit(rows.at(k));
    return std::isinf(m) && m > 0 ? 0.0 : m;
}

void BudgetReport::write_csv(const std::string& path) const
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "t,interior,outflow,initial,inflow,slack,dissipation\n";
    for (const auto& r : rows)
        f << r.t << ',' << r.interior << ',' << r.outflow << ',' << r.initial << ',' << r.inflow << ',' << r.slack()
          << ',' << r.dissipation << '\n';
}

BudgetReport lp_budget(const RunRecord& rec, double q)
{
    if (!(q >= 1.0) || !std::isfinite(q))
        throw std::invalid_argument("lp_budget needs 1 <= q < infinity");
    std::ostringstream name;
    name << "q=" << q;
    return budget(rec, name.str(), [q](double a) { return std::pow(a, q); }, nullptr);
}

double linf_bound(const RunRecord& rec)
{
    if (rec.steps.empty())
        return 0.0;
    const Domain& d = *rec.domain();
    double data = max_abs(rec.steps.front().omega), sol = 0.0;
    for (const auto& s : rec.steps) {
        sol = std::max(sol, max_abs(s.omega));
        for (int i = 0; i < d.num_holes(); ++i)
            for (double x : s.omega_b[i].values) {
                if (d.component(i).kind == ComponentKind::Source)
                    data = std::max(data, std::abs(x));
                else
                    sol = std::max(sol, std::abs(x));
            }
    }
    if (data == 0.0)
        return 0.0;
    return sol / data;
}

double ConvexGauge::breakpoint(int i) const
{
    const int n = static_cast<int>(N.size());
    if (i < n)
        return N[i];
    return N.back() * std::ldexp(1.0, i - n + 1);
}

double ConvexGauge::slope(int i) const
{
    const double a = breakpoint(i), b = breakpoint(i + 1);
    return ((i + 1) * b - i * a) / (b - a);
}

double ConvexGauge::operator()(double s) const
{
    s = std::abs(s);
    if (N.size() < 2)
        throw std::logic_error("gauge needs at least one positive breakpoint");
    int i = 0;
    while (s >= breakpoint(i + 1))
        ++i;
    const double a = breakpoint(i), b = breakpoint(i + 1);
    return i * a + (s - a) / (b - a) * ((i + 1) * b - i * a);
}

bool ConvexGauge::convex() const
{
    const int n = static_cast<int>(N.size()) + 4;
    for (int i = 0; i + 1 < n; ++i)
        if (slope(i + 1) < slope(i) * (1 - 1e-12))
            return false;
    return true;
}

bool ConvexGauge::even() const
{
    for (int i = 0; i < static_cast<int>(N.size()) + 4; ++i) {
        const double s = 0.5 * (breakpoint(i) + breakpoint(i + 1));
        if ((*this)(s) != (*this)(-s))
            return false;
    }
    return true;
}

bool ConvexGauge::superlinear() const
{
    for (int i = 0; i < static_cast<int>(N.size()) + 4; ++i)
        if (slope(i) < i)
            return false;
    return true;
}

GaugeFunction closed_form_gauge()
{
    return {"x^2/sqrt(x^2+1)", [](double x) { return x * x / std::sqrt(x * x + 1.0); },
            [](double x) { return (2.0 - x * x) / std::pow(1.0 + x * x, 2.5); }};
}

GaugeFunction power_gauge(double q)
{
    std::ostringstream name;
    name << "|x|^" << q;
    return {name.str(), [q](double x) { return std::pow(std::abs(x), q); },
            [q](double x) { return q == 1.0 ? 0.0 : q * (q - 1) * std::pow(std::abs(x), q - 2); }};
}

GaugeFunction as_function(const ConvexGauge& g)
{
    return {"piecewise-linear", [g](double x) { return g(x); }, [](double) { return 0.0; }};
}

BudgetReport g_budget(const RunRecord& rec, const GaugeFunction& G)
{
    // Probe convexity, evenness and sign on the range the record visits.
    const double M = std::max(record_max(rec), 1e-12);
    const int n = 256;
    for (int k = 0; k <= n; ++k) {
        const double x = M * k / n;
        if (G.G(x) < 0.0 || std::abs(G.G(x) - G.G(-x)) > 1e-12 * (1 + std::abs(G.G(x))))
            throw NonConvexGauge(G.name + " is not even and nonnegative on the data range");
        if (G.G2 && G.G2(x) < -1e-12)
            throw NonConvexGauge(G.name + " has G'' < 0 at " + std::to_string(x));
        if (k > 0 && k < n) {
            const double dx = M / n;
            if (G.G(x + dx) - 2 * G.G(x) + G.G(x - dx) < -1e-12 * (1 + std::abs(G.G(x))))
                throw NonConvexGauge(G.name + " fails the second-difference probe at " + std::to_string(x));
        }
    }
    return budget(rec, G.name, [&](double a) { return G.G(a); }, G.G2 ? &G.G2 : nullptr);
}

GaugeCertificate dlvp_gauge(const std::vector<SampledFunction>& family)
{
    if (family.empty())
        throw std::invalid_argument("dlvp_gauge needs a nonempty family");
    GaugeCertificate c;
    for (const auto& f : family) {
        if (f.values.size() != f.measure.size())
            throw std::invalid_argument("dlvp_gauge: values and measures differ in length");
        double m = 0.0;
        for (double w : f.measure)
            m += w;
        c.domain_measure = std::max(c.domain_measure, m);
    }
    const std::size_t J = family.size();
    c.gauge.N = breakpoints(family, J, 64, true);

    // A finite family is always integrable; a family that is not uniformly
    // integrable shows up as low breakpoints that follow the largest member.
    if (J >= 4) {
        const std::size_t half = J / 2;
        const std::vector<double> Nh = breakpoints(family, half, 3, false);
        const double top = family_max(family, J);
        for (int i = 1; i <= 3 && i < static_cast<int>(c.gauge.N.size()); ++i)
            if (c.gauge.N[i] > 1.5 * Nh[i] && c.gauge.N[i] >= top * (1 - 1e-9))
                throw NotUniformlyIntegrable("breakpoint N_" + std::to_string(i) +
                                             " grows with the family and sits at its largest value");
    }
    c.certified_bound = c.gauge.N[1] * c.domain_measure + 3.0;
    for (const auto& f : family) {
        double s = 0.0;
        for (std::size_t k = 0; k < f.values.size(); ++k)
            s += c.gauge(f.values[k]) * f.measure[k];
        c.direct_sup = std::max(c.direct_sup, s);
    }
    return c;
}

WeightedUIReport weighted_ui_check(const std::vector<SampledFunction>& f, const std::vector<std::vector<double>>& h,
                                   const ConvexGauge& G)
{
    if (f.size() != h.size())
        throw std::invalid_argument("weighted_ui_check: one weight per member");
    WeightedUIReport rep;
    double hmax = 0.0, measure = 0.0, fhmax = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        double m = 0.0;
        for (std::size_t k = 0; k < h[j].size(); ++k) {
            if (!(h[j][k] > 0.0))
                throw HypothesisViolated("weights must be positive");
            hmax = std::max(hmax, h[j][k]);
            fhmax = std::max(fhmax, std::abs(f[j].values[k] * h[j][k]));
            m += f[j].measure[k];
        }
        measure = std::max(measure, m);
    }
    for (double r : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        const double delta = r * hmax;
        double sup = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) {
            double m = 0.0;
            for (std::size_t k = 0; k < h[j].size(); ++k)
                if (h[j][k] <= delta)
                    m += f[j].measure[k];
            sup = std::max(sup, m);
        }
        rep.deltas.push_back(delta);
        rep.small_weight_measure.push_back(sup);
    }
    if (measure > 0.0 && rep.small_weight_measure.back() > 0.01 * measure)
        throw HypothesisViolated("measure of {h_j <= delta} does not shrink: " +
                                 std::to_string(rep.small_weight_measure.back()) + " at delta " +
                                 std::to_string(rep.deltas.back()));
    for (double r : {0.0, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}) {
        const double level = r * fhmax;
        double sup = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < h[j].size(); ++k) {
                const double a = std::abs(f[j].values[k] * h[j][k]);
                if (a > level)
                    s += a * f[j].measure[k];
            }
            sup = std::max(sup, s);
        }
        rep.levels.push_back(level);
        rep.tails.push_back(sup);
    }
    for (std::size_t j = 0; j < f.size(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < h[j].size(); ++k)
            s += G(f[j].values[k]) * h[j][k] * f[j].measure[k];
        rep.sup_gauge = std::max(rep.sup_gauge, s);
    }
    rep.consistent = std::isfinite(rep.sup_gauge) && rep.tails.back() == 0.0;
    return rep;
}

bool decreasing_with_one_inversion(const std::vector<double>& d)
{
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; }))
        return true;
    for (std::size_t k = 1; k < d.size(); ++k)
        if (!(d[k] < d[k - 1]) && k != 1)
            return false;
    return true;
}

FlowModelPtr frozen_velocity_model(const FlowModelPtr& m)
{
    auto f = std::make_shared<FlowModel>(*m);
    f->prescribed = [m](double t) { return m->v_g(t); };
    return f;
}

SweepReport nu_sweep(const Scenario& s, const std::vector<double>& nus, double T, const SweepOptions& opts)
{
    SweepReport rep;
    rep.nu = nus;
    if (nus.empty())
        return rep;
    for (std::size_t k = 1; k < nus.size(); ++k)
        if (!(nus[k] < nus[k - 1]))
            throw std::invalid_argument("nu list must decrease");
    FlowModelPtr model = make_flow_model(s, opts.grid_n);
    if (opts.frozen_velocity)
        model = frozen_velocity_model(model);

    std::vector<double> all = nus;
    if (opts.reference_inviscid)
        all.push_back(0.0);
    std::vector<RunRecord> runs(all.size());
    parallel_for(static_cast<int>(all.size()), thread_count(opts.threads),
                 [&](int k) { runs[k] = run_scenario(s, all[k], T, model); });
    for (std::size_t k = 0; k < runs.size(); ++k)
        if (runs[k].failed)
            rep.failures.push_back("nu=" + std::to_string(all[k]) + ": " + runs[k].failure);
    if (!rep.failures.empty())
        return rep;

    const Domain& d = *model->domain;
    for (int m = 1; m <= opts.report_times; ++m)
        rep.times.push_back(T * m / opts.report_times);
    const int nt = 200;
    for (std::size_t k = 0; k + 1 < nus.size(); ++k) {
        const RunRecord &a = runs[k], &b = runs[k + 1];
        std::vector<double> row;
        for (double t : rep.times)
            row.push_back(lp_distance(field_at(a, t), field_at(b, t), opts.p));
        rep.distances.push_back(row);
        rep.terminal.push_back(lp_distance(a.steps.back().omega, b.steps.back().omega, opts.p));

        double acc = 0.0, csup = 0.0;
        for (int m = 0; m <= nt; ++m) {
            const double t = T * m / nt;
            const auto [ga, wa] = sink_traces_at(a, t);
            const auto [gb, wb] = sink_traces_at(b, t);
            int hole = 0;
            double s = 0.0;
            for (int i = 0; i < d.num_holes(); ++i) {
                if (d.component(i).kind != ComponentKind::Sink)
                    continue;
                const auto& q = d.component(i).quad;
                for (std::size_t j = 0; j < q.size(); ++j)
                    s += ga[hole][j] * std::pow(std::abs(wa[hole][j] - wb[hole][j]), opts.p) * q[j].weight;
                ++hole;
            }
            acc += (m == 0 || m == nt ? 0.5 : 1.0) * (T / nt) * s;
            for (int i = 0; i < d.num_holes(); ++i)
                csup = std::max(csup, std::abs(circulation_at(a, t, i) - circulation_at(b, t, i)));
        }
        rep.outflow.push_back(std::pow(acc, 1.0 / opts.p));
        rep.circulation.push_back(csup);
    }
    if (opts.reference_inviscid)
        rep.inviscid_distance =
            lp_distance(runs[nus.size() - 1].steps.back().omega, runs.back().steps.back().omega, opts.p);
    rep.terminal_decreasing = decreasing_with_one_inversion(rep.terminal);
    rep.outflow_decreasing = decreasing_with_one_inversion(rep.outflow);
    return rep;
}

void SweepReport::write_csv(const std::string& path) const
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "nu_a,nu_b,terminal,outflow,circulation";
    for (double t : times)
        f << ",t=" << t;
    f << '\n';
    for (std::size_t k = 0; k < terminal.size(); ++k) {
        f << nu[k] << ',' << nu[k + 1] << ',' << terminal[k] << ',' << outflow[k] << ',' << circulation[k];
        for (double x : distances[k])
            f << ',' << x;
        f << '\n';
    }
}

} // namespace vortlab
