#include "vortlab/weakform.hpp"
#include "vortlab/errors.hpp"
#include "vortlab/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace vortlab {

namespace {

constexpr double pi = std::numbers::pi;

/// Sum over fluid links of (a_N - a_P)(b_N - b_P): the discrete Dirichlet
/// form used by the viscous stepper.
double link_form(const Domain& d, const std::vector<double>& a, const std::vector<double>& b,
                 const std::function<double(int, int)>* weight = nullptr)
{
    double s = 0.0;
    for (int f = 0; f < d.num_fluid(); ++f)
        for (int dir : {East, North}) {
            const int g = d.neighbor(f, dir);
            if (g < 0)
                continue;
            const double w = weight ? (*weight)(f, g) : 1.0;
            s += w * (a[g] - a[f]) * (b[g] - b[f]);
        }
    return s;
}

double weighted_integral(const ScalarField& a, const std::vector<double>& b)
{
    const double h2 = a.domain->h() * a.domain->h();
    double s = 0.0;
    for (int k = 0; k < a.size(); ++k)
        s += a[k] * b[k];
    return s * h2;
}

/// Sum over holes of the kind given of boundary integral g * w * phi.
double boundary_term(const Domain& d, const StepRecord& r, const TestFunction& phi, ComponentKind kind,
                     const std::function<double(double)>& map)
{
    double s = 0.0;
    for (int i = 0; i < d.num_holes(); ++i) {
        if (d.component(i).kind != kind)
            continue;
        const auto& q = d.component(i).quad;
        for (std::size_t k = 0; k < q.size(); ++k)
            s += r.g[i].values[k] * map(r.omega_b[i].values[k]) * phi.traces[i].values[k] * q[k].weight;
    }
    return s;
}

void check_record(const RunRecord& rec)
{
    if (rec.steps.size() < 2)
        throw IncompleteRecord("record has fewer than two time levels");
    if (rec.failed)
        throw IncompleteRecord("record failed: " + rec.failure);
}

ResidualReport finish(std::string identity, std::vector<ResidualTerm> terms, double tol)
{
    ResidualReport r;
    r.identity = std::move(identity);
    r.terms = std::move(terms);
    r.tolerance = tol;
    for (const auto& t : r.terms) {
        r.total += t.value;
        r.scale = std::max(r.scale, std::abs(t.value));
    }
    return r;
}

/// Shared by the distributional and renormalized residuals: beta applied to
/// every vorticity value, beta'' used for the viscous dissipation term.
ResidualReport transport_residual(const RunRecord& rec, const TestFunction& phi, const std::string& name,
                                  const std::function<double(double)>& beta,
                                  const std::function<double(double)>* dbeta2)
{
    check_record(rec);
    const Domain& d = *rec.domain();
    const std::vector<double> w = time_weights(rec);
    const double h2 = d.h() * d.h();
    double initial = 0.0, time = 0.0, adv = 0.0, bin = 0.0, bout = 0.0, visc = 0.0, diss = 0.0;
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        const StepRecord& r = rec.steps[k];
        ScalarField b(r.omega.domain);
        for (int c = 0; c < b.size(); ++c)
            b[c] = beta(r.omega[c]);
        const double th = phi.time(r.t), dth = phi.time_deriv(r.t);
        if (k == 0)
            initial = th * weighted_integral(b, phi.phi.v);
        if (w[k] == 0.0)
            continue;
        time += w[k] * dth * weighted_integral(b, phi.phi.v);
        if (th == 0.0)
            continue;
        double a = 0.0;
        for (int c = 0; c < b.size(); ++c)
            a += b[c] * (r.v.x[c] * phi.grad.x[c] + r.v.y[c] * phi.grad.y[c]);
        adv += w[k] * th * a * h2;
        bin -= w[k] * th * boundary_term(d, r, phi, ComponentKind::Source, beta);
        bout -= w[k] * th * boundary_term(d, r, phi, ComponentKind::Sink, beta);
        if (rec.nu > 0.0) {
            visc -= w[k] * th * rec.nu * link_form(d, b.v, phi.phi.v);
            if (dbeta2) {
                const std::function<double(int, int)> wt = [&](int f, int g) {
                    return (*dbeta2)(0.5 * (r.omega[f] + r.omega[g])) * 0.5 * (phi.phi[f] + phi.phi[g]);
                };
                diss -= w[k] * th * rec.nu * link_form(d, r.omega.v, r.omega.v, &wt);
            }
        }
    }
    std::vector<ResidualTerm> terms{{"initial", initial},         {"time", time},
                                    {"transport", adv},           {"boundary_in", bin},
                                    {"boundary_out", bout},       {"viscous", visc}};
    if (dbeta2)
        terms.push_back({"dissipation", diss});
    return finish(name, std::move(terms), 0.05);
}

/// Fluid cells whose centre lies within the given boundary-distance band.
std::vector<int> cells_in_band(const Domain& d, double lo, double hi)
{
    std::vector<int> out;
    for (int f = 0; f < d.num_fluid(); ++f) {
        const double s = d.signed_distance(d.center(f));
        if (s > lo && s <= hi)
            out.push_back(f);
    }
    return out;
}

} // namespace

double TestFunction::time(double t) const
{
    if (t >= t_end)
        return 0.0;
    const double c = std::cos(0.5 * pi * std::max(t, 0.0) / t_end);
    return c * c;
}

double TestFunction::time_deriv(double t) const
{
    if (t >= t_end)
        return 0.0;
    const double a = 0.5 * pi * std::max(t, 0.0) / t_end;
    return -std::sin(2.0 * a) * 0.5 * pi / t_end;
}

TestFunction make_test_function(DomainPtr d, const std::function<double(Vec2)>& f,
                                const std::function<Vec2(Vec2)>& grad_f, double t_end)
{
    TestFunction t;
    t.cls = TestFunction::Class::General;
    t.phi = make_field(d, f);
    t.grad = make_vector_field(d, grad_f);
    for (int k = 0; k < d->num_components(); ++k)
        t.traces.push_back(make_trace(*d, k, [&](const QuadPoint& q) { return f(q.x); }));
    t.t_end = t_end;
    return t;
}

TestFunction make_c0_test(const HarmonicBasis& basis, const std::vector<double>& betas, double t_end)
{
    const Domain& d = *basis.domain;
    if (static_cast<int>(betas.size()) != d.num_holes())
        throw std::invalid_argument("make_c0_test: one beta per hole");
    TestFunction t;
    t.cls = TestFunction::Class::C0Class;
    t.betas = betas;
    t.t_end = t_end;
    t.phi = ScalarField(basis.domain);
    for (int i = 0; i < d.num_holes(); ++i)
        for (int c = 0; c < t.phi.size(); ++c)
            t.phi[c] += betas[i] * basis.psi[i][c];
    std::vector<double> consts = betas;
    consts.push_back(0.0);
    t.grad = dirichlet_gradient(t.phi, DirichletData::constants(consts));
    for (int k = 0; k < d.num_components(); ++k) {
        const double b = consts[k];
        t.traces.push_back(make_trace(d, k, [&](const QuadPoint&) { return b; }));
    }
    return t;
}

void require_c0(const TestFunction& phi)
{
    if (phi.cls != TestFunction::Class::C0Class)
        throw NotC0TestFunction("test function is not declared constant on the boundary");
    const Domain& d = *phi.phi.domain;
    for (int k = 0; k < d.num_components(); ++k) {
        const auto& v = phi.traces[k].values;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        if (*hi - *lo > 1e-8)
            throw NotC0TestFunction("test function varies along component " + std::to_string(k));
        if (k == d.outer_id() && std::max(std::abs(*lo), std::abs(*hi)) > 1e-8)
            throw NotC0TestFunction("test function does not vanish on the outer boundary");
    }
}

const VectorField& KernelCache::column(int fluid_cell)
{
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cols_.find(fluid_cell);
        if (it != cols_.end())
            return *it->second;
    }
    auto col = std::make_unique<VectorField>(kernel_column(basis_->domain->center(fluid_cell), *basis_));
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cols_.emplace(fluid_cell, std::move(col));
    return *it->second;
}

double h_phi(const TestFunction& phi, Vec2 x, Vec2 y, KernelCache& cache)
{
    if (norm(x - y) < 1e-12)
        throw CoincidentPoints("h_phi needs distinct points");
    const Domain& d = *phi.phi.domain;
    auto cell = [&](Vec2 p) {
        const auto [i, j] = d.locate(p);
        const int c = d.fluid_index(i, j);
        if (c < 0 || !d.contains(p))
            throw PointOutsideFluid("h_phi point outside the fluid");
        return c;
    };
    const int cx = cell(x), cy = cell(y);
    const VectorField& ky = cache.column(cy);
    const VectorField& kx = cache.column(cx);
    return 0.5 * (dot(phi.grad.at(cx), ky.at(cx)) + dot(phi.grad.at(cy), kx.at(cy)));
}

Vec2 halfplane_symmetrized_kernel(Vec2 x, Vec2 y)
{
    const Vec2 z = x - y;
    const double r2 = dot(z, z);
    if (r2 == 0.0)
        throw CoincidentPoints("half-plane kernel at coincident points");
    if (!(x.y > 0.0 && y.y > 0.0))
        throw std::invalid_argument("half-plane kernel needs x2 > 0 and y2 > 0");
    return {0.0, (x.y + y.y) / (pi * (r2 + 4.0 * x.y * y.y))};
}

ScanReport h_phi_bound_scan(const TestFunction& phi, KernelCache& cache, const ScanOptions& opts)
{
    const Domain& d = *phi.phi.domain;
    const double h = d.h();
    double deepest = 0.0;
    for (int f = 0; f < d.num_fluid(); ++f)
        deepest = std::max(deepest, d.signed_distance(d.center(f)));
    ScanReport rep;
    struct Band {
        std::string label;
        double lo, hi;
        bool interior;
    };
    const std::vector<Band> bands{{"d<=2h", 0.0, 2 * h, false},
                                  {"2h<d<=4h", 2 * h, 4 * h, false},
                                  {"4h<d<=8h", 4 * h, 8 * h, false},
                                  {"8h<d<=16h", 8 * h, 16 * h, false},
                                  {"interior", opts.interior_fraction * deepest, 1e300, true}};
    for (const Band& b : bands) {
        ScanStratum st{b.label, b.lo, b.interior ? std::numeric_limits<double>::infinity() : b.hi, 0, 0.0};
        const std::vector<int> cand = cells_in_band(d, b.lo, b.hi);
        const int n = std::min<int>(opts.samples, static_cast<int>(cand.size()));
        std::vector<std::pair<int, int>> pairs;
        for (int k = 0; k < n; ++k) {
            const int cx = cand[static_cast<std::size_t>(k) * cand.size() / n];
            const Vec2 x = d.center(cx);
            const double sep = (3.0 + (k % 4)) * h;
            std::vector<Vec2> dirs;
            if (b.interior) {
                for (int q = 0; q < 4; ++q)
                    dirs.push_back({std::cos(0.25 * pi * q), std::sin(0.25 * pi * q)});
            } else {
                const Curve& c = d.component(d.nearest_component(x)).curve;
                const Vec2 t = c.tangent_at(c.arclength_of(c.closest_point(x)));
                dirs = {t, -1.0 * t};
            }
            for (const Vec2& dv : dirs) {
                const Vec2 yp = x + sep * dv;
                if (!d.contains(yp))
                    continue;
                const auto [i, j] = d.locate(yp);
                const int cy = d.fluid_index(i, j);
                if (cy < 0 || cy == cx)
                    continue;
                const double sy = d.signed_distance(d.center(cy));
                const bool ok = b.interior ? sy >= b.lo : (sy > 0.5 * b.lo && sy <= 2.0 * b.hi);
                if (!ok)
                    continue;
                pairs.emplace_back(cx, cy);
                if (!b.interior)
                    break;
            }
        }
        std::vector<double> vals(pairs.size());
        parallel_for(static_cast<int>(pairs.size()), thread_count(), [&](int p) {
            vals[p] = std::abs(h_phi(phi, d.center(pairs[p].first), d.center(pairs[p].second), cache));
        });
        st.samples = static_cast<int>(pairs.size());
        for (double v : vals)
            st.max_abs = std::max(st.max_abs, v);
        rep.strata.push_back(st);
    }
    rep.finest_max = rep.strata.front().max_abs;
    rep.interior_max = rep.strata.back().max_abs;
    if (rep.interior_max > 0.0)
        rep.ratio = rep.finest_max / rep.interior_max;
    else if (rep.finest_max > 0.0)
        rep.ratio = std::numeric_limits<double>::infinity();
    return rep;
}

std::string ResidualReport::summary() const
{
    std::ostringstream o;
    o << identity << ": total=" << total << " scale=" << scale << " relative=" << relative()
      << " tolerance=" << tolerance << (pass() ? " PASS" : " FAIL");
    return o.str();
}

void ResidualReport::write_csv(const std::string& path) const
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f.precision(17);
    f << "term,value,scale\n";
    for (const auto& t : terms)
        f << t.name << ',' << t.value << ',' << scale << '\n';
    f << "total," << total << ',' << scale << '\n';
}

std::vector<double> time_weights(const RunRecord& rec)
{
    const std::size_t n = rec.steps.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double dt = rec.steps[k + 1].t - rec.steps[k].t;
        w[k] += 0.5 * dt;
        w[k + 1] += 0.5 * dt;
    }
    return w;
}

ResidualReport distributional_residual(const RunRecord& rec, const TestFunction& phi)
{
    return transport_residual(rec, phi, "distributional", [](double s) { return s; }, nullptr);
}

Renormalization Renormalization::standard()
{
    return {[](double s) { return s / std::sqrt(1.0 + s * s); },
            [](double s) { return -3.0 * s / std::pow(1.0 + s * s, 2.5); }};
}

ResidualReport renormalized_residual(const RunRecord& rec, const TestFunction& phi, const Renormalization& beta)
{
    return transport_residual(rec, phi, "renormalized", beta.beta, &beta.dbeta2);
}

SymmetrizedIntegrator::SymmetrizedIntegrator(std::shared_ptr<const HarmonicBasis> basis, const TestFunction& phi,
                                             int threads)
    : basis_(std::move(basis)), phi_(phi), threads_(thread_count(threads))
{
}

std::vector<double> SymmetrizedIntegrator::evaluate(const std::vector<const ScalarField*>& fields) const
{
    const Domain& d = *basis_->domain;
    const int N = d.num_fluid();
    const int T = static_cast<int>(fields.size());
    const double h2 = d.h() * d.h();
    constexpr int stride = 4;
    const int A = (d.nx() - 1) / stride + 2, B = (d.ny() - 1) / stride + 2;
    const int L = A * B;
    const int ncomp = d.num_components();

    // Lattice nodes: fluid nodes get their own kernel column, solid nodes
    // take the boundary value of the nearest component.
    std::vector<int> node_cell(L, -1), node_comp(L, -1);
    std::vector<int> fluid_nodes;
    for (int b = 0; b < B; ++b)
        for (int a = 0; a < A; ++a) {
            const int m = b * A + a;
            const int i = stride * a, j = stride * b;
            const int c = d.fluid_index(i, j);
            const Vec2 p = d.cell_center(i, j);
            if (c >= 0 && d.contains(p)) {
                node_cell[m] = c;
                fluid_nodes.push_back(m);
            } else {
                node_comp[m] = d.in_grid(i, j) ? d.nearest_component(p) : d.outer_id();
            }
        }

    // Transfer of each field onto the lattice (adjoint of the interpolation in y).
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(T, L);
    Eigen::MatrixXd Om(T, N);
    for (int t = 0; t < T; ++t)
        for (int y = 0; y < N; ++y) {
            const double wv = (*fields[t])[y] * h2;
            Om(t, y) = wv;
            const auto [i, j] = d.cell_ij(y);
            const int a0 = i / stride, b0 = j / stride;
            const double fx = double(i - stride * a0) / stride, fy = double(j - stride * b0) / stride;
            W(t, b0 * A + a0) += (1 - fx) * (1 - fy) * wv;
            W(t, b0 * A + a0 + 1) += fx * (1 - fy) * wv;
            W(t, (b0 + 1) * A + a0) += (1 - fx) * fy * wv;
            W(t, (b0 + 1) * A + a0 + 1) += fx * fy * wv;
        }

    auto tent = [&](int i, int a) {
        const int r = std::abs(i - stride * a);
        return r < stride ? 1.0 - double(r) / stride : 0.0;
    };

    // Pairs closer than 3h: offsets with dx^2 + dy^2 < 9.
    std::vector<std::array<int, 2>> offs;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            if (dx * dx + dy * dy < 9)
                offs.push_back({dx, dy});
    const int O = static_cast<int>(offs.size());
    std::vector<double> near(static_cast<std::size_t>(N) * O, 0.0);

    Eigen::VectorXd S = Eigen::VectorXd::Zero(T);
    auto accumulate_near = [&](int m, const std::function<double(int)>& a_of) {
        const int a = m % A, b = m / A;
        const int ci = stride * a, cj = stride * b;
        for (int j = cj - 7; j <= cj + 7; ++j)
            for (int i = ci - 7; i <= ci + 7; ++i) {
                const int x = d.fluid_index(i, j);
                if (x < 0)
                    continue;
                double ax = 0.0;
                bool have = false;
                for (int o = 0; o < O; ++o) {
                    const int yi = i + offs[o][0], yj = j + offs[o][1];
                    const double wm = tent(yi, a) * tent(yj, b);
                    if (wm == 0.0 || d.fluid_index(yi, yj) < 0)
                        continue;
                    if (!have) {
                        ax = a_of(x);
                        have = true;
                    }
                    near[static_cast<std::size_t>(x) * O + o] += wm * ax;
                }
            }
    };

    // Solid nodes: one shared column per component.
    for (int k = 0; k < ncomp; ++k) {
        const VectorField col = kernel_boundary_value(k, *basis_);
        Eigen::VectorXd ak(N);
        for (int x = 0; x < N; ++x)
            ak[x] = phi_.grad.x[x] * col.x[x] + phi_.grad.y[x] * col.y[x];
        if (ak.cwiseAbs().maxCoeff() == 0.0)
            continue;
        const Eigen::VectorXd P = Om * ak;
        for (int m = 0; m < L; ++m) {
            if (node_comp[m] != k)
                continue;
            S += P.cwiseProduct(W.col(m));
            accumulate_near(m, [&](int x) { return ak[x]; });
        }
    }

    // Fluid nodes, in blocks of columns solved in parallel.
    const int block = 64;
    for (std::size_t b0 = 0; b0 < fluid_nodes.size(); b0 += block) {
        const int nb = static_cast<int>(std::min<std::size_t>(block, fluid_nodes.size() - b0));
        Eigen::MatrixXd Acol(N, nb);
        parallel_for(nb, threads_, [&](int c) {
            const VectorField col = kernel_column(d.center(node_cell[fluid_nodes[b0 + c]]), *basis_);
            for (int x = 0; x < N; ++x)
                Acol(x, c) = phi_.grad.x[x] * col.x[x] + phi_.grad.y[x] * col.y[x];
        });
        const Eigen::MatrixXd P = Om * Acol;
        for (int c = 0; c < nb; ++c) {
            const int m = fluid_nodes[b0 + c];
            S += P.col(c).cwiseProduct(W.col(m));
            accumulate_near(m, [&](int x) { return Acol(x, c); });
        }
    }

    std::vector<double> out(T);
    for (int t = 0; t < T; ++t) {
        double corr = 0.0;
        for (int x = 0; x < N; ++x) {
            const auto [i, j] = d.cell_ij(x);
            double s = 0.0;
            for (int o = 0; o < O; ++o) {
                const int y = d.fluid_index(i + offs[o][0], j + offs[o][1]);
                if (y >= 0)
                    s += near[static_cast<std::size_t>(x) * O + o] * Om(t, y);
            }
            corr += Om(t, x) * s;
        }
        out[t] = S[t] - corr;
    }
    return out;
}

ResidualReport symmetrized_residual(const RunRecord& rec, const TestFunction& phi, int threads)
{
    check_record(rec);
    require_c0(phi);
    const Domain& d = *rec.domain();
    const HarmonicBasis& basis = *rec.model->basis;
    const std::vector<double> w = time_weights(rec);
    const double h2 = d.h() * d.h();

    std::vector<int> active;
    std::vector<const ScalarField*> fields;
    for (std::size_t k = 0; k < rec.steps.size(); ++k)
        if (w[k] > 0.0 && phi.time(rec.steps[k].t) != 0.0) {
            active.push_back(static_cast<int>(k));
            fields.push_back(&rec.steps[k].omega);
        }
    const SymmetrizedIntegrator integ(rec.model->basis, phi, threads);
    const std::vector<double> dbl = fields.empty() ? std::vector<double>{} : integ.evaluate(fields);

    const double initial = phi.time(rec.steps[0].t) * weighted_integral(rec.steps[0].omega, phi.phi.v);
    double time = 0.0, vg = 0.0, circ = 0.0, nonlin = 0.0, bin = 0.0, bout = 0.0, visc = 0.0;
    for (std::size_t k = 0; k < rec.steps.size(); ++k)
        if (w[k] > 0.0)
            time += w[k] * phi.time_deriv(rec.steps[k].t) * weighted_integral(rec.steps[k].omega, phi.phi.v);
    const auto identity = [](double s) { return s; };
    for (std::size_t n = 0; n < active.size(); ++n) {
        const int k = active[n];
        const StepRecord& r = rec.steps[k];
        const double wt = w[k] * phi.time(r.t);
        const VectorField v_g = rec.model->v_g(r.t);
        double a = 0.0;
        for (int c = 0; c < r.omega.size(); ++c)
            a += r.omega[c] * (v_g.x[c] * phi.grad.x[c] + v_g.y[c] * phi.grad.y[c]);
        vg += wt * a * h2;
        for (int i = 0; i < d.num_holes(); ++i) {
            const VectorField& X = basis.fields[i];
            double b = 0.0;
            for (int c = 0; c < r.omega.size(); ++c)
                b += r.omega[c] * (X.x[c] * phi.grad.x[c] + X.y[c] * phi.grad.y[c]);
            circ += wt * r.circ.C[i] * b * h2;
        }
        nonlin += wt * dbl[n];
        bin -= wt * boundary_term(d, r, phi, ComponentKind::Source, identity);
        bout -= wt * boundary_term(d, r, phi, ComponentKind::Sink, identity);
        if (rec.nu > 0.0)
            visc -= wt * rec.nu * link_form(d, r.omega.v, phi.phi.v);
    }
    return finish("symmetrized",
                  {{"initial", initial},
                   {"time", time},
                   {"potential_transport", vg},
                   {"circulation_transport", circ},
                   {"double_integral", nonlin},
                   {"boundary_in", bin},
                   {"boundary_out", bout},
                   {"viscous", visc}},
                  0.1);
}

double NonlinearComparison::gap() const
{
    const double s = std::max(std::abs(kernel_form), std::abs(direct_form));
    return s > 0.0 ? std::abs(kernel_form - direct_form) / s : 0.0;
}

NonlinearComparison compare_nonlinear_term(const ScalarField& omega, const TestFunction& phi,
                                           std::shared_ptr<const HarmonicBasis> basis, int threads)
{
    NonlinearComparison c;
    const VectorField u = biot_savart(omega, *basis);
    double s = 0.0;
    for (int k = 0; k < omega.size(); ++k)
        s += omega[k] * (u.x[k] * phi.grad.x[k] + u.y[k] * phi.grad.y[k]);
    c.direct_form = s * omega.domain->h() * omega.domain->h();
    const SymmetrizedIntegrator integ(std::move(basis), phi, threads);
    c.kernel_form = integ.evaluate({&omega})[0];
    return c;
}

DualityReport duality_check(const RunRecord& rec, const DualityInputs& in)
{
    check_record(rec);
    const Domain& d = *rec.domain();
    AdjointData ad;
    ad.chi = in.chi;
    ad.psi = in.psi;
    ad.nu = rec.nu;
    if (in.phi_T)
        ad.phi_T = make_field(rec.domain(), in.phi_T);
    const AdjointHistory H = adjoint_solve(rec, ad);
    const std::vector<double> w = time_weights(rec);
    const double h2 = d.h() * d.h();

    double chi_term = 0.0, psi_term = 0.0, inflow = 0.0;
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        if (w[k] == 0.0)
            continue;
        const StepRecord& r = rec.steps[k];
        if (in.chi) {
            double s = 0.0;
            for (int c = 0; c < r.omega.size(); ++c)
                s += r.omega[c] * in.chi(d.center(c), r.t);
            chi_term += w[k] * s * h2;
        }
        for (int i = 0; i < d.num_holes(); ++i) {
            const auto& q = d.component(i).quad;
            const bool src = d.component(i).kind == ComponentKind::Source;
            double s = 0.0;
            for (std::size_t j = 0; j < q.size(); ++j) {
                const double other = src ? H.phi_plus[k][i].values[j] : (in.psi ? in.psi(i, q[j].s, r.t) : 0.0);
                s += r.g[i].values[j] * r.omega_b[i].values[j] * other * q[j].weight;
            }
            if (src)
                inflow -= w[k] * s;
            else
                psi_term += w[k] * s;
        }
    }
    DualityReport rep;
    const double initial = weighted_integral(rec.steps.front().omega, H.phi.front().v);
    const double fin = ad.phi_T.domain ? -weighted_integral(rec.steps.back().omega, ad.phi_T.v) : 0.0;
    rep.lhs_terms = {{"chi", chi_term}, {"outflow_psi", psi_term}};
    rep.rhs_terms = {{"initial", initial}, {"final", fin}, {"inflow", inflow}};
    rep.lhs = chi_term + psi_term;
    rep.rhs = initial + fin + inflow;
    rep.residual = rep.lhs - rep.rhs;
    for (const auto& t : rep.lhs_terms)
        rep.scale = std::max(rep.scale, std::abs(t.value));
    for (const auto& t : rep.rhs_terms)
        rep.scale = std::max(rep.scale, std::abs(t.value));
    return rep;
}

} // namespace vortlab
