#include "vortlab/transport.hpp"
#include "vortlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vortlab {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

double mc_slope(double a, double b)
{
    if (a * b <= 0.0)
        return 0.0;
    const double m = std::min({2.0 * std::abs(a), 2.0 * std::abs(b), 0.5 * std::abs(a + b)});
    return a > 0.0 ? m : -m;
}

/// Inflow data per cut link: face normal velocity (negative = entering) and
/// the value carried in. Links with uf = 0 get no boundary contribution.
struct InflowLinks {
    std::vector<double> uf;
    std::vector<double> value;
};

/// Arclength and n.e_d of every cut link, for evaluating boundary data.
struct LinkGeometry {
    std::vector<double> s;
    std::vector<double> ndot;
};

LinkGeometry link_geometry(const Domain& d)
{
    LinkGeometry g;
    for (const CutLink& cl : d.cut_links()) {
        const Curve& c = d.component(cl.component).curve;
        const double s = c.arclength_of(cl.point);
        g.s.push_back(s);
        g.ndot.push_back(dot(c.fluid_normal_at(s), dir_vec[cl.dir]));
    }
    return g;
}

/// rate = -v.grad(w) + nu Lap(w), advective form, MUSCL faces with MC slopes.
/// Boundary links: inflow links carry the combined advective and Robin flux
/// uf (w_P - value) / h; every other link has zero flux.
void transport_rate(const Domain& d, const std::vector<double>& w, const VectorField& v, double nu,
                    const InflowLinks& in, std::vector<double>& rate)
{
    const int n = d.num_fluid();
    const double h = d.h();
    std::vector<double> sx(n), sy(n);
    for (int f = 0; f < n; ++f) {
        const int e = d.neighbor(f, East), wv = d.neighbor(f, West);
        const int no = d.neighbor(f, North), so = d.neighbor(f, South);
        sx[f] = (e >= 0 && wv >= 0) ? mc_slope(w[f] - w[wv], w[e] - w[f]) : 0.0;
        sy[f] = (no >= 0 && so >= 0) ? mc_slope(w[f] - w[so], w[no] - w[f]) : 0.0;
    }
    rate.assign(n, 0.0);
    for (int f = 0; f < n; ++f) {
        double r = 0.0;
        for (int dd = 0; dd < 4; ++dd) {
            const int g = d.neighbor(f, dd);
            if (g >= 0) {
                const bool xaxis = dd == East || dd == West;
                const double sgn = (dd == East || dd == North) ? 1.0 : -1.0;
                const double uf = 0.5 * sgn * (xaxis ? v.x[f] + v.x[g] : v.y[f] + v.y[g]);
                const double* s = xaxis ? sx.data() : sy.data();
                const double wf = uf > 0.0 ? w[f] + 0.5 * sgn * s[f] : w[g] - 0.5 * sgn * s[g];
                r -= uf * (wf - w[f]) / h;
                r += nu * (w[g] - w[f]) / (h * h);
            } else {
                const int ci = d.cut_index(f, dd);
                const double uf = in.uf.empty() ? 0.0 : in.uf[ci];
                if (uf < 0.0)
                    r += uf * (w[f] - in.value[ci]) / h;
            }
        }
        rate[f] = r;
    }
}

InflowLinks forward_inflow(const FlowModel& m, const LinkGeometry& lg, double t)
{
    const Domain& d = *m.domain;
    InflowLinks in;
    in.uf.assign(d.cut_links().size(), 0.0);
    in.value.assign(d.cut_links().size(), 0.0);
    for (std::size_t k = 0; k < d.cut_links().size(); ++k) {
        const CutLink& cl = d.cut_links()[k];
        if (d.component(cl.component).kind != ComponentKind::Source)
            continue;
        in.uf[k] = m.flux(cl.component, lg.s[k], t) * lg.ndot[k];
        in.value[k] = m.inflow(cl.component, lg.s[k], t);
    }
    return in;
}

void check_finite(const ScalarField& f, const char* what)
{
    for (double x : f.v)
        if (!std::isfinite(x))
            throw NonFiniteField(std::string("non-finite values in ") + what);
}

double max_speed(const VectorField& v)
{
    double m = 0.0;
    for (int k = 0; k < v.size(); ++k)
        m = std::max(m, std::hypot(v.x[k], v.y[k]));
    return m;
}

std::vector<BoundaryTrace> boundary_vorticity(const FlowState& s)
{
    const Domain& d = *s.omega.domain;
    std::vector<BoundaryTrace> out = s.omega_plus;
    for (int i = 0; i < d.num_holes(); ++i)
        if (d.component(i).kind == ComponentKind::Sink)
            out[i] = sample_to_boundary(s.omega, i, true);
    return out;
}

// ---- semi-Lagrangian machinery ----

struct Grid {
    const Domain& d;
    const std::vector<double>& g;
    double at(int i, int j) const { return d.in_grid(i, j) ? g[d.flat(i, j)] : nan_v; }
};

std::optional<double> bilinear(const Grid& G, Vec2 p)
{
    const Domain& d = G.d;
    const double gx = (p.x - d.origin().x) / d.h() - 0.5;
    const double gy = (p.y - d.origin().y) / d.h() - 0.5;
    const int i0 = static_cast<int>(std::floor(gx)), j0 = static_cast<int>(std::floor(gy));
    const double fx = gx - i0, fy = gy - j0;
    double s = 0.0, wsum = 0.0;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const double v[4] = {G.at(i0, j0), G.at(i0 + 1, j0), G.at(i0, j0 + 1), G.at(i0 + 1, j0 + 1)};
    for (int k = 0; k < 4; ++k)
        if (!std::isnan(v[k])) {
            s += w[k] * v[k];
            wsum += w[k];
        }
    if (wsum < 1e-12) {
        for (int k = 0; k < 4; ++k)
            if (!std::isnan(v[k]))
                return v[k];
        return std::nullopt;
    }
    return s / wsum;
}

/// Biquadratic Lagrange interpolation on the 3x3 block around the nearest
/// centre, clipped to the block's range.
std::optional<double> biquadratic_limited(const Grid& G, Vec2 p)
{
    const Domain& d = G.d;
    const double gx = (p.x - d.origin().x) / d.h() - 0.5;
    const double gy = (p.y - d.origin().y) / d.h() - 0.5;
    const int i0 = static_cast<int>(std::lround(gx)), j0 = static_cast<int>(std::lround(gy));
    const double a = gx - i0, b = gy - j0;
    const double lx[3] = {0.5 * a * (a - 1), 1 - a * a, 0.5 * a * (a + 1)};
    const double ly[3] = {0.5 * b * (b - 1), 1 - b * b, 0.5 * b * (b + 1)};
    double s = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int jj = 0; jj < 3; ++jj)
        for (int ii = 0; ii < 3; ++ii) {
            const double v = G.at(i0 - 1 + ii, j0 - 1 + jj);
            if (std::isnan(v))
                return bilinear(G, p);
            s += lx[ii] * ly[jj] * v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    return std::clamp(s, lo, hi);
}

struct VelocityGrid {
    std::vector<double> x, y;
};

VelocityGrid extend_velocity(const VectorField& v)
{
    ScalarField a(v.domain), b(v.domain);
    a.v = v.x;
    b.v = v.y;
    return {extend_to_grid(a), extend_to_grid(b)};
}

std::optional<Vec2> velocity_at(const Domain& d, const VelocityGrid& vg, Vec2 p)
{
    auto a = bilinear({d, vg.x}, p);
    auto b = bilinear({d, vg.y}, p);
    if (!a || !b)
        return std::nullopt;
    return Vec2{*a, *b};
}

using BoundaryValue = std::function<std::optional<double>(int comp, double s, double t)>;

/// Backward RK2 characteristics over dt. `time_at(f)` maps the path fraction
/// (0 at the arrival cell, 1 at the foot) to physical time. `chi`, when
/// given, is integrated along the path with the trapezoid rule.
ScalarField sl_advect(const ScalarField& w, const VectorField& vel, double dt,
                      const std::function<double(double)>& time_at, const BoundaryValue& boundary,
                      const std::function<double(Vec2, double)>* chi, StepDiagnostics* diag)
{
    const Domain& d = *w.domain;
    std::vector<double> wext = extend_to_grid(w, true);
    // Ghost values next to inflow boundaries carry the inflow data, so feet
    // landing within a cell of the wall pick it up.
    for (int j = 0; j < d.ny(); ++j)
        for (int i = 0; i < d.nx(); ++i) {
            const int k = d.flat(i, j);
            if (std::isnan(wext[k]) || d.fluid_index(i, j) >= 0)
                continue;
            const Vec2 c = d.cell_center(i, j);
            const int comp = d.nearest_component(c);
            const Curve& cv = d.component(comp).curve;
            if (auto bv = boundary(comp, cv.arclength_of(cv.closest_point(c)), time_at(0.5)))
                wext[k] = *bv;
        }
    const VelocityGrid vg = extend_velocity(vel);
    const Grid G{d, wext};
    ScalarField out(w.domain);
    StepDiagnostics local;

    for (int f = 0; f < d.num_fluid(); ++f) {
        const Vec2 x = d.center(f);
        const Vec2 xm = x - (0.5 * dt) * vel.at(f);
        Vec2 foot = xm;
        bool mid_inside = d.contains(xm);
        if (mid_inside) {
            auto vm = velocity_at(d, vg, xm);
            foot = vm ? x - dt * *vm : xm;
        }
        auto path = [&](double s) { return s <= 0.5 ? x + (2 * s) * (xm - x) : xm + (2 * s - 1) * (foot - xm); };

        double lo = -1.0, hi = -1.0;
        if (!mid_inside)
            lo = 0.0, hi = 0.5;
        else if (!d.contains(foot))
            lo = 0.5, hi = 1.0;

        double value;
        double frac = 1.0;
        Vec2 end = foot;
        if (hi < 0.0) {
            value = biquadratic_limited(G, foot).value_or(w[f]);
        } else {
            while ((hi - lo) * dt > 1e-10 && hi - lo > 1e-15) {
                const double mid = 0.5 * (lo + hi);
                if (d.contains(path(mid)))
                    lo = mid;
                else
                    hi = mid;
            }
            frac = hi;
            end = path(hi);
            const int comp = d.nearest_component(end);
            const Curve& c = d.component(comp).curve;
            const double sB = c.arclength_of(c.closest_point(end));
            if (auto bv = boundary(comp, sB, time_at(hi))) {
                value = *bv;
                ++local.source_crossings;
            } else {
                if (d.component(comp).kind == ComponentKind::Outer)
                    ++local.outer_crossings;
                else
                    ++local.sink_crossings;
                value = biquadratic_limited(G, path(lo)).value_or(w[f]);
            }
        }
        if (chi)
            value += frac * dt * 0.5 * ((*chi)(x, time_at(0.0)) + (*chi)(end, time_at(frac)));
        out[f] = value;
    }
    if (diag) {
        diag->source_crossings += local.source_crossings;
        diag->sink_crossings += local.sink_crossings;
        diag->outer_crossings += local.outer_crossings;
    }
    return out;
}

double trace_value(const Domain& d, const std::vector<BoundaryTrace>& traces, int comp, double s)
{
    return trace_at(d, traces[comp], s);
}

} // namespace

VectorField FlowModel::v_g(double t) const
{
    VectorField v(domain);
    for (std::size_t k = 0; k < lift.size(); ++k) {
        const double a = lift_weight(static_cast<int>(k), t);
        for (int c = 0; c < v.size(); ++c) {
            v.x[c] += a * lift[k].x[c];
            v.y[c] += a * lift[k].y[c];
        }
    }
    return v;
}

VectorField FlowModel::velocity(const ScalarField& omega, const std::vector<double>& C, double t) const
{
    if (prescribed)
        return prescribed(t);
    return reconstruct_velocity(omega, C, v_g(t), *basis);
}

std::vector<BoundaryTrace> FlowModel::flux_traces(double t) const
{
    std::vector<BoundaryTrace> out;
    for (int i = 0; i < domain->num_holes(); ++i)
        out.push_back(make_trace(*domain, i, [&](const QuadPoint& q) { return flux(i, q.s, t); }));
    return out;
}

std::vector<BoundaryTrace> FlowModel::inflow_traces(double t) const
{
    std::vector<BoundaryTrace> out;
    for (int i = 0; i < domain->num_holes(); ++i) {
        const bool src = domain->component(i).kind == ComponentKind::Source;
        out.push_back(make_trace(*domain, i, [&](const QuadPoint& q) { return src ? inflow(i, q.s, t) : 0.0; }));
    }
    return out;
}

FlowModelPtr make_flow_model(const Scenario& s, std::optional<int> grid_n)
{
    DomainSpec spec = s.domain;
    if (grid_n)
        spec.grid_n = *grid_n;
    auto m = std::make_shared<FlowModel>();
    m->domain = build_domain(spec);
    m->basis = std::make_shared<HarmonicBasis>(harmonic_basis(m->domain));
    m->flux = [s](int i, double arc, double t) { return s.g(i, arc, t); };
    m->inflow = [s](int i, double arc, double t) { return s.omega_plus(i, arc, t); };
    m->dt_max = s.dt_max;

    // One lift per hole with unit envelope; each is made compatible by a
    // uniform counter-flux on the outer wall, which cancels in the sum
    // because the envelope-weighted fluxes add up to zero.
    const Domain& d = *m->domain;
    const double outer_len = d.outer().curve.perimeter();
    for (int i = 0; i < d.num_holes(); ++i) {
        std::vector<BoundaryTrace> g;
        g.push_back(make_trace(d, i, [&](const QuadPoint& q) { return s.g(i, q.s, 0.0) / s.flux[i].envelope(0.0); }));
        const double total = boundary_integral(d, g.back());
        g.push_back(make_trace(d, d.outer_id(), [&](const QuadPoint&) { return -total / outer_len; }));
        m->lift.push_back(potential_lift(m->domain, g));
    }
    m->lift_weight = [s](int k, double t) { return s.flux[k].envelope(t); };
    return m;
}

FlowState initial_state(const FlowModel& m, const ScalarField& omega_in, const std::vector<double>& C_in, double t0)
{
    FlowState s;
    s.t = t0;
    s.omega = omega_in;
    s.circ.t = t0;
    s.circ.C = C_in;
    s.circ.C_outer = 0.0;
    s.circ.C_outer = total_vorticity_check(omega_in, s.circ).residual;
    s.g = m.flux_traces(t0);
    s.omega_plus = m.inflow_traces(t0);
    s.v = m.velocity(s.omega, s.circ.C, t0);
    return s;
}

double stable_dt(const FlowState& s, double nu, double dt_max)
{
    const double h = s.omega.domain->h();
    const double vmax = max_speed(s.v);
    if (!std::isfinite(vmax))
        throw NonFiniteField("velocity is not finite");
    double dt = dt_max;
    if (vmax > 0.0)
        dt = std::min(dt, 0.5 * h / vmax);
    if (nu > 0.0)
        dt = std::min(dt, 0.5 * h * h / (4.0 * nu));
    return dt;
}

FlowState viscous_step(const FlowModel& m, const FlowState& s, double nu, double dt)
{
    if (!(nu > 0.0))
        throw std::invalid_argument("viscous_step needs nu > 0");
    const double limit = stable_dt(s, nu, std::numeric_limits<double>::infinity());
    if (dt > limit * (1.0 + 1e-9))
        throw CFLViolation("dt = " + std::to_string(dt) + " exceeds the stable step " + std::to_string(limit));
    const Domain& d = *m.domain;
    const LinkGeometry lg = link_geometry(d);
    const double tm = s.t + 0.5 * dt, t1 = s.t + dt;

    const std::vector<double> rhs0 = circulation_rhs(d, s.g, boundary_vorticity(s));

    std::vector<double> rate;
    transport_rate(d, s.omega.v, s.v, nu, forward_inflow(m, lg, s.t), rate);
    FlowState mid;
    mid.t = tm;
    mid.omega = s.omega;
    for (int f = 0; f < mid.omega.size(); ++f)
        mid.omega[f] += 0.5 * dt * rate[f];
    mid.circ = s.circ;
    for (std::size_t i = 0; i < rhs0.size(); ++i)
        mid.circ.C[i] += 0.5 * dt * rhs0[i];
    mid.circ.t = tm;
    const VectorField vm = m.velocity(mid.omega, mid.circ.C, tm);

    transport_rate(d, mid.omega.v, vm, nu, forward_inflow(m, lg, tm), rate);
    FlowState out;
    out.t = t1;
    out.omega = s.omega;
    for (int f = 0; f < out.omega.size(); ++f)
        out.omega[f] += dt * rate[f];
    check_finite(out.omega, "vorticity");
    out.g = m.flux_traces(t1);
    out.omega_plus = m.inflow_traces(t1);
    out.circ = s.circ;
    const std::vector<double> rhs1 = circulation_rhs(d, out.g, boundary_vorticity(out));
    out.circ = advance_circulations(s.circ, rhs0, rhs1, dt);
    out.v = m.velocity(out.omega, out.circ.C, t1);
    return out;
}

FlowState semi_lagrangian_step(const FlowModel& m, const FlowState& s, double dt, StepDiagnostics* diag)
{
    const double limit = stable_dt(s, 0.0, std::numeric_limits<double>::infinity());
    if (dt > limit * (1.0 + 1e-9))
        throw CFLViolation("dt = " + std::to_string(dt) + " exceeds the advective step " + std::to_string(limit));
    const Domain& d = *m.domain;
    const double t0 = s.t, tm = s.t + 0.5 * dt, t1 = s.t + dt;
    const BoundaryValue inflow = [&](int comp, double arc, double t) -> std::optional<double> {
        if (d.component(comp).kind == ComponentKind::Source)
            return m.inflow(comp, arc, t);
        return std::nullopt;
    };
    const std::vector<double> rhs0 = circulation_rhs(d, s.g, boundary_vorticity(s));

    VectorField vm;
    if (m.prescribed) {
        vm = m.prescribed(tm);
    } else {
        const ScalarField half = sl_advect(s.omega, s.v, 0.5 * dt, [&](double f) { return tm - f * 0.5 * dt; },
                                           inflow, nullptr, nullptr);
        std::vector<double> Cm = s.circ.C;
        for (std::size_t i = 0; i < Cm.size(); ++i)
            Cm[i] += 0.5 * dt * rhs0[i];
        vm = m.velocity(half, Cm, tm);
    }
    FlowState out;
    out.t = t1;
    out.omega = sl_advect(s.omega, vm, dt, [&](double f) { return t1 - f * dt; }, inflow, nullptr, diag);
    (void)t0;
    check_finite(out.omega, "vorticity");
    out.g = m.flux_traces(t1);
    out.omega_plus = m.inflow_traces(t1);
    out.circ = s.circ;
    const std::vector<double> rhs1 = circulation_rhs(d, out.g, boundary_vorticity(out));
    out.circ = advance_circulations(s.circ, rhs0, rhs1, dt);
    out.v = m.velocity(out.omega, out.circ.C, t1);
    return out;
}

std::vector<BoundaryTrace> trace_outflow(const FlowState& s)
{
    const Domain& d = *s.omega.domain;
    std::vector<BoundaryTrace> out;
    for (int i = 0; i < d.num_holes(); ++i)
        if (d.component(i).kind == ComponentKind::Sink)
            out.push_back(sample_to_boundary(s.omega, i, true));
    return out;
}

std::vector<int> RunRecord::snapshot_indices() const
{
    std::vector<int> idx;
    const int n = static_cast<int>(steps.size());
    for (int k = 0; k < n; k += std::max(1, snapshot_stride))
        idx.push_back(k);
    if (n > 0 && idx.back() != n - 1)
        idx.push_back(n - 1);
    return idx;
}

namespace {

StepRecord to_record(const FlowState& s)
{
    StepRecord r;
    r.t = s.t;
    r.omega = s.omega;
    r.v = s.v;
    r.circ = s.circ;
    r.g = s.g;
    r.omega_b = boundary_vorticity(s);
    return r;
}

LedgerRow ledger_row(const Domain& d, const StepRecord& r)
{
    LedgerRow L;
    L.t = r.t;
    L.mass = integral(r.omega);
    for (int i = 0; i < d.num_holes(); ++i) {
        const auto& q = d.component(i).quad;
        double s = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k)
            s += r.g[i].values[k] * r.omega_b[i].values[k] * q[k].weight;
        if (d.component(i).kind == ComponentKind::Source)
            L.inflow_rate += -s;
        else
            L.outflow_rate += s;
    }
    L.identity_residual = total_vorticity_check(r.omega, r.circ).residual;
    return L;
}

} // namespace

RunRecord run_flow(FlowModelPtr m, const ScalarField& omega_in, const std::vector<double>& C_in, double nu, double T,
                   const RunOptions& opts)
{
    RunRecord rec;
    rec.scenario_id = opts.scenario_id;
    rec.nu = nu;
    rec.stepper = nu > 0.0 ? "viscous" : "semi-lagrangian";
    rec.model = m;
    rec.snapshot_stride = opts.snapshot_stride;
    const Domain& d = *m->domain;
    try {
        FlowState s = initial_state(*m, omega_in, C_in, 0.0);
        rec.steps.push_back(to_record(s));
        rec.ledger.push_back(ledger_row(d, rec.steps.back()));
        int fixed_steps = 0;
        if (opts.fixed_dt)
            fixed_steps = std::max(1, static_cast<int>(std::lround(T / *opts.fixed_dt)));
        int k = 0;
        while (true) {
            double dt;
            if (opts.fixed_dt) {
                if (k >= fixed_steps)
                    break;
                dt = T / fixed_steps;
            } else {
                const double left = T - s.t;
                if (left <= 1e-12 * std::max(1.0, T))
                    break;
                dt = stable_dt(s, nu, m->dt_max);
                // Avoid a sliver step at the end.
                if (dt >= left)
                    dt = left;
                else if (dt > 0.5 * left)
                    dt = 0.5 * left;
            }
            s = nu > 0.0 ? viscous_step(*m, s, nu, dt) : semi_lagrangian_step(*m, s, dt, &rec.diagnostics);
            if (opts.fixed_dt && k + 1 == fixed_steps)
                s.t = T;
            ++k;
            rec.dt_history.push_back(dt);
            rec.steps.push_back(to_record(s));
            rec.ledger.push_back(ledger_row(d, rec.steps.back()));
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
    }
    return rec;
}

RunRecord run_scenario(const Scenario& s, double nu, double T, FlowModelPtr model)
{
    if (!model)
        model = make_flow_model(s);
    const ScalarField omega_in = make_field(model->domain, [&](Vec2 p) { return s.initial(p); });
    RunOptions o;
    o.fixed_dt = s.dt;
    o.snapshot_stride = s.snapshot_stride;
    o.scenario_id = s.id;
    return run_flow(model, omega_in, s.circulation, nu, T, o);
}

AdjointHistory adjoint_solve(const RunRecord& fwd, const AdjointData& a)
{
    if (fwd.steps.empty())
        throw IncompleteRecord("empty forward record");
    const Domain& d = *fwd.domain();
    const DomainPtr dp = fwd.domain();
    const int K = static_cast<int>(fwd.steps.size()) - 1;
    const LinkGeometry lg = link_geometry(d);
    const std::function<double(Vec2, double)> chi =
        a.chi ? a.chi : std::function<double(Vec2, double)>([](Vec2, double) { return 0.0; });
    auto psi = [&](int comp, double s, double t) { return a.psi ? a.psi(comp, s, t) : 0.0; };

    AdjointHistory H;
    H.t.resize(K + 1);
    H.phi.resize(K + 1);
    H.phi_plus.resize(K + 1);
    auto traces = [&](const ScalarField& phi) {
        std::vector<BoundaryTrace> out;
        for (int i = 0; i < d.num_holes(); ++i) {
            if (d.component(i).kind == ComponentKind::Source)
                out.push_back(sample_to_boundary(phi, i, true));
            else
                out.push_back(make_trace(d, i, [&](const QuadPoint& q) { return psi(i, q.s, fwd.steps[0].t); }));
        }
        return out;
    };

    ScalarField phi = a.phi_T;
    if (!phi.domain)
        phi = ScalarField(dp);
    H.t[K] = fwd.steps[K].t;
    H.phi[K] = phi;
    H.phi_plus[K] = traces(phi);

    // Inflow data for the reversed flow: Sinks, with normal velocity -g.
    auto reversed_inflow = [&](int n0, double wgt1, double t) {
        InflowLinks in;
        in.uf.assign(d.cut_links().size(), 0.0);
        in.value.assign(d.cut_links().size(), 0.0);
        for (std::size_t k = 0; k < d.cut_links().size(); ++k) {
            const CutLink& cl = d.cut_links()[k];
            if (d.component(cl.component).kind != ComponentKind::Sink)
                continue;
            double g = trace_value(d, fwd.steps[n0].g, cl.component, lg.s[k]);
            if (wgt1 > 0.0)
                g = (1 - wgt1) * g + wgt1 * trace_value(d, fwd.steps[n0 + 1].g, cl.component, lg.s[k]);
            in.uf[k] = -g * lg.ndot[k];
            in.value[k] = psi(cl.component, lg.s[k], t);
        }
        return in;
    };

    for (int n = K - 1; n >= 0; --n) {
        const double t0 = fwd.steps[n].t, t1 = fwd.steps[n + 1].t;
        const double dt = t1 - t0, tm = 0.5 * (t0 + t1);
        VectorField wm(dp), w1(dp);
        for (int f = 0; f < wm.size(); ++f) {
            w1.x[f] = -fwd.steps[n + 1].v.x[f];
            w1.y[f] = -fwd.steps[n + 1].v.y[f];
            wm.x[f] = -0.5 * (fwd.steps[n].v.x[f] + fwd.steps[n + 1].v.x[f]);
            wm.y[f] = -0.5 * (fwd.steps[n].v.y[f] + fwd.steps[n + 1].v.y[f]);
        }
        ScalarField next(dp);
        if (a.nu > 0.0) {
            std::vector<double> rate;
            transport_rate(d, phi.v, w1, a.nu, reversed_inflow(n + 1, 0.0, t1), rate);
            ScalarField mid = phi;
            for (int f = 0; f < mid.size(); ++f)
                mid[f] += 0.5 * dt * (rate[f] + chi(d.center(f), t1));
            transport_rate(d, mid.v, wm, a.nu, reversed_inflow(n, 0.5, tm), rate);
            next = phi;
            for (int f = 0; f < next.size(); ++f)
                next[f] += dt * (rate[f] + chi(d.center(f), tm));
        } else {
            const BoundaryValue inflow = [&](int comp, double s, double t) -> std::optional<double> {
                if (d.component(comp).kind == ComponentKind::Sink)
                    return psi(comp, s, t);
                return std::nullopt;
            };
            next = sl_advect(phi, wm, dt, [&](double f) { return t0 + f * dt; }, inflow, &chi, &H.diagnostics);
        }
        check_finite(next, "adjoint field");
        phi = std::move(next);
        H.t[n] = t0;
        H.phi[n] = phi;
        H.phi_plus[n] = traces(phi);
    }
    return H;
}

} // namespace vortlab
