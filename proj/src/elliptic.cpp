#include "vortlab/elliptic.hpp"
#include "vortlab/errors.hpp"
#include "vortlab/local_fit.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace vortlab {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Per-domain operators, built on first use and shared by every solve.
struct DirichletOp {
    SpMat A; ///< h^2-scaled negative Laplacian, symmetric positive definite
    Eigen::SimplicialLDLT<SpMat> factor;
};

struct NeumannOp {
    std::vector<int> ghost_of; ///< per (fluid, dir), index into ghosts or -1
    std::vector<Stencil> ghost_stencil;
    std::vector<int> ghost_comp;
    std::vector<Vec2> ghost_point; ///< boundary point carrying the constraint
    SpMat L; ///< h^2-scaled Laplacian with ghost elimination (singular)
    Eigen::SparseLU<SpMat> lu; ///< of L + e0 e0^T, which is regular
    Eigen::VectorXd ones_sol;  ///< (L + e0 e0^T)^{-1} 1
    Eigen::VectorXd e0_sol;    ///< (L + e0 e0^T)^{-1} e0
};

template <class Op>
class OpCache {
public:
    template <class Build>
    std::shared_ptr<const Op> get(const DomainPtr& d, Build&& build)
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (auto it = ops_.begin(); it != ops_.end();) {
            if (it->second.first.expired())
                it = ops_.erase(it);
            else
                ++it;
        }
        auto it = ops_.find(d.get());
        if (it != ops_.end())
            if (auto locked = it->second.first.lock(); locked == d)
                return it->second.second;
        auto op = build(*d);
        ops_[d.get()] = {d, op};
        return op;
    }

private:
    std::mutex mu_;
    std::map<const Domain*, std::pair<std::weak_ptr<const Domain>, std::shared_ptr<const Op>>> ops_;
};

std::shared_ptr<const DirichletOp> dirichlet_op(const DomainPtr& d)
{
    static OpCache<DirichletOp> cache;
    return cache.get(d, [](const Domain& dom) {
        auto op = std::make_shared<DirichletOp>();
        const int n = dom.num_fluid();
        std::vector<Triplet> t;
        t.reserve(5 * n);
        for (int f = 0; f < n; ++f) {
            double diag = 0.0;
            for (int dd = 0; dd < 4; ++dd) {
                const int g = dom.neighbor(f, dd);
                if (g >= 0) {
                    diag += 1.0;
                    t.emplace_back(f, g, -1.0);
                } else {
                    diag += 1.0 / dom.cut_links()[dom.cut_index(f, dd)].theta;
                }
            }
            t.emplace_back(f, f, diag);
        }
        op->A.resize(n, n);
        op->A.setFromTriplets(t.begin(), t.end());
        op->A.makeCompressed();
        op->factor.compute(op->A);
        if (op->factor.info() != Eigen::Success)
            throw SolverError("factorisation of the Dirichlet operator failed");
        return op;
    });
}

double neumann_datum(const Domain& d, const std::vector<const BoundaryTrace*>& g, int comp, Vec2 p)
{
    const BoundaryTrace* t = g[comp];
    if (!t)
        return 0.0;
    return trace_at(d, *t, d.component(comp).curve.arclength_of(p));
}

std::shared_ptr<const NeumannOp> neumann_op(const DomainPtr& d)
{
    static OpCache<NeumannOp> cache;
    return cache.get(d, [](const Domain& dom) {
        auto op = std::make_shared<NeumannOp>();
        const int n = dom.num_fluid();
        op->ghost_of.assign(4 * n, -1);
        std::map<int, int> by_cell;
        for (const CutLink& cl : dom.cut_links()) {
            auto [i, j] = dom.cell_ij(cl.cell);
            const int gi = i + dir_di[cl.dir], gj = j + dir_dj[cl.dir];
            const int key = dom.flat(gi, gj);
            auto it = by_cell.find(key);
            if (it == by_cell.end()) {
                const Vec2 x = dom.cell_center(gi, gj);
                const int comp = dom.nearest_component(x);
                const Curve& c = dom.component(comp).curve;
                const Vec2 b = c.closest_point(x);
                FitConstraint con;
                con.kind = FitConstraint::Kind::NormalDerivative;
                con.at = b;
                con.normal = c.fluid_normal_at(c.arclength_of(b));
                op->ghost_stencil.push_back(local_fit(dom, b, x, FitEval::Value, &con));
                op->ghost_comp.push_back(comp);
                op->ghost_point.push_back(b);
                it = by_cell.emplace(key, static_cast<int>(op->ghost_comp.size()) - 1).first;
            }
            op->ghost_of[4 * cl.cell + cl.dir] = it->second;
        }

        std::vector<Triplet> t;
        t.reserve(12 * n);
        for (int f = 0; f < n; ++f) {
            for (int dd = 0; dd < 4; ++dd) {
                t.emplace_back(f, f, -1.0);
                const int g = dom.neighbor(f, dd);
                if (g >= 0) {
                    t.emplace_back(f, g, 1.0);
                } else {
                    const Stencil& st = op->ghost_stencil[op->ghost_of[4 * f + dd]];
                    for (std::size_t k = 0; k < st.cells.size(); ++k)
                        t.emplace_back(f, st.cells[k], st.weights[k]);
                }
            }
        }
        op->L.resize(n, n);
        op->L.setFromTriplets(t.begin(), t.end());
        op->L.makeCompressed();
        // A dense mean-zero border ruins the sparse fill, so factor the
        // rank-one regularised matrix and recover the bordered solution
        // from two extra solves (see neumann_solve).
        SpMat M = op->L;
        M.coeffRef(0, 0) += 1.0;
        M.makeCompressed();
        op->lu.analyzePattern(M);
        op->lu.factorize(M);
        if (op->lu.info() != Eigen::Success)
            throw SolverError("factorisation of the Neumann operator failed: " + op->lu.lastErrorMessage());
        op->ones_sol = op->lu.solve(Eigen::VectorXd::Ones(n));
        op->e0_sol = op->lu.solve(Eigen::VectorXd::Unit(n, 0));
        return op;
    });
}

std::vector<const BoundaryTrace*> traces_by_component(const Domain& d, const std::vector<BoundaryTrace>& g)
{
    std::vector<const BoundaryTrace*> by(d.num_components(), nullptr);
    for (const auto& t : g) {
        if (t.component < 0 || t.component >= d.num_components())
            throw std::invalid_argument("trace refers to an unknown component");
        if (t.values.size() != d.component(t.component).quad.size())
            throw std::invalid_argument("trace length does not match the quadrature");
        by[t.component] = &t;
    }
    return by;
}

std::vector<double> ghost_values(const Domain& d, const NeumannOp& op, const ScalarField& phi,
                                 const std::vector<const BoundaryTrace*>& g)
{
    std::vector<double> gv(op.ghost_stencil.size());
    for (std::size_t k = 0; k < gv.size(); ++k)
        gv[k] = op.ghost_stencil[k].apply(phi.v, neumann_datum(d, g, op.ghost_comp[k], op.ghost_point[k]));
    return gv;
}

double energy(const Domain& d, const ScalarField& u, const DirichletData& bu, const ScalarField& w,
              const DirichletData& bw)
{
    double s = 0.0;
    for (int f = 0; f < d.num_fluid(); ++f)
        for (int dd = 0; dd < 4; ++dd) {
            const int g = d.neighbor(f, dd);
            if (g >= 0) {
                if (dd == East || dd == North)
                    s += (u[g] - u[f]) * (w[g] - w[f]);
            } else {
                const CutLink& cl = d.cut_links()[d.cut_index(f, dd)];
                s += (u[f] - bu.at(d, cl.component, cl.point)) * (w[f] - bw.at(d, cl.component, cl.point)) /
                     cl.theta;
            }
        }
    return s;
}

VectorField perp_field(VectorField g)
{
    for (int k = 0; k < g.size(); ++k) {
        const double gx = g.x[k];
        g.x[k] = -g.y[k];
        g.y[k] = gx;
    }
    return g;
}

} // namespace

DirichletData DirichletData::zero(const Domain& d)
{
    DirichletData b;
    b.per_component.assign(d.num_components(), 0.0);
    return b;
}

DirichletData DirichletData::constants(std::vector<double> c)
{
    DirichletData b;
    for (double x : c)
        b.per_component.emplace_back(x);
    return b;
}

double DirichletData::at(const Domain& d, int component, Vec2 p) const
{
    const auto& v = per_component.at(component);
    if (auto* c = std::get_if<double>(&v))
        return *c;
    const auto& t = std::get<BoundaryTrace>(v);
    return trace_at(d, t, d.component(component).curve.arclength_of(p));
}

ScalarField solve_poisson_dirichlet(const ScalarField& rhs, const DirichletData& b, SolveStats* stats)
{
    const DomainPtr& dp = rhs.domain;
    const Domain& d = *dp;
    if (static_cast<int>(b.per_component.size()) != d.num_components())
        throw std::invalid_argument("Dirichlet data needs one entry per boundary component");
    auto op = dirichlet_op(dp);
    const int n = d.num_fluid();
    const double h2 = d.h() * d.h();

    Eigen::VectorXd r(n);
    for (int f = 0; f < n; ++f)
        r(f) = -h2 * rhs[f];
    for (const CutLink& cl : d.cut_links())
        r(cl.cell) += b.at(d, cl.component, cl.point) / cl.theta;

    ScalarField u(dp);
    Eigen::Map<Eigen::VectorXd> x(u.v.data(), n);
    const double bnorm = r.norm();
    if (!std::isfinite(bnorm))
        throw NonFiniteField("non-finite Poisson data");
    if (bnorm == 0.0) {
        if (stats)
            *stats = {0, 0.0};
        return u;
    }

    // Preconditioned conjugate gradients; the cached sparse factorisation
    // is the preconditioner, so convergence takes one or two sweeps.
    const double tol = 1e-10;
    const int maxit = 50 * d.grid_n();
    x.setZero();
    Eigen::VectorXd res = r;
    Eigen::VectorXd z = op->factor.solve(res);
    Eigen::VectorXd p = z;
    double rz = res.dot(z);
    int it = 0;
    double rel = 1.0;
    while (it < maxit) {
        const Eigen::VectorXd Ap = op->A * p;
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        res -= alpha * Ap;
        ++it;
        rel = res.norm() / bnorm;
        if (rel <= tol)
            break;
        z = op->factor.solve(res);
        const double rz_new = res.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    // Report the true residual, not the recursively updated one.
    rel = (r - op->A * x).norm() / bnorm;
    if (rel > tol)
        throw SolverError("Poisson PCG stalled at relative residual " + std::to_string(rel) + " after " +
                          std::to_string(it) + " iterations");
    if (stats)
        *stats = {it, rel};
    return u;
}

VectorField dirichlet_gradient(const ScalarField& u, const DirichletData& b)
{
    const Domain& d = *u.domain;
    VectorField g(u.domain);
    const double h = d.h();
    for (int f = 0; f < d.num_fluid(); ++f) {
        double comp[2];
        for (int axis = 0; axis < 2; ++axis) {
            const int dp = axis == 0 ? East : North;
            const int dm = axis == 0 ? West : South;
            double a, fa, c, fc;
            if (int n = d.neighbor(f, dp); n >= 0)
                c = h, fc = u[n];
            else {
                const CutLink& cl = d.cut_links()[d.cut_index(f, dp)];
                c = cl.theta * h, fc = b.at(d, cl.component, cl.point);
            }
            if (int n = d.neighbor(f, dm); n >= 0)
                a = h, fa = u[n];
            else {
                const CutLink& cl = d.cut_links()[d.cut_index(f, dm)];
                a = cl.theta * h, fa = b.at(d, cl.component, cl.point);
            }
            comp[axis] = (a * a * (fc - u[f]) + c * c * (u[f] - fa)) / (a * c * (a + c));
            // A boundary value very close to the centre amplifies the solution
            // error; switch to the quadratic through the next two fluid cells.
            const int sides[2][2] = {{dp, dm}, {dm, dp}};
            for (auto [near_dir, far_dir] : sides) {
                const int ci = d.cut_index(f, near_dir);
                if (ci < 0 || d.cut_links()[ci].theta >= 0.5)
                    continue;
                const int n1 = d.neighbor(f, far_dir);
                const int n2 = n1 >= 0 ? d.neighbor(n1, far_dir) : -1;
                if (n2 < 0)
                    continue;
                const CutLink& cl = d.cut_links()[ci];
                const double sgn = (near_dir == dp) ? 1.0 : -1.0;
                // nodes at sgn*t (boundary), -sgn*h, -2*sgn*h
                const double x0 = sgn * cl.theta * h, x1 = -sgn * h, x2 = -2 * sgn * h;
                const double f0 = b.at(d, cl.component, cl.point), f1 = u[n1], f2 = u[n2];
                comp[axis] = f0 * (-x1 - x2) / ((x0 - x1) * (x0 - x2)) + f1 * (-x0 - x2) / ((x1 - x0) * (x1 - x2)) +
                             f2 * (-x0 - x1) / ((x2 - x0) * (x2 - x1));
            }
        }
        g.x[f] = comp[0];
        g.y[f] = comp[1];
    }
    return g;
}

ScalarField solve_laplace_neumann(DomainPtr dp, const std::vector<BoundaryTrace>& g)
{
    const Domain& d = *dp;
    const auto by = traces_by_component(d, g);
    double total = 0.0, total_abs = 0.0;
    for (const auto& t : g) {
        total += boundary_integral(d, t);
        const auto& q = d.component(t.component).quad;
        for (std::size_t k = 0; k < q.size(); ++k)
            total_abs += std::abs(t.values[k]) * q[k].weight;
    }
    if (std::abs(total) > 1e-8 * std::max(1.0, total_abs))
        throw CompatibilityError("Neumann fluxes do not sum to zero (sum = " + std::to_string(total) + ")");

    auto op = neumann_op(dp);
    const int n = d.num_fluid();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for (int f = 0; f < n; ++f)
        for (int dd = 0; dd < 4; ++dd) {
            const int gi = op->ghost_of[4 * f + dd];
            if (gi < 0)
                continue;
            const double datum = neumann_datum(d, by, op->ghost_comp[gi], op->ghost_point[gi]);
            r(f) -= op->ghost_stencil[gi].datum_weight * datum;
        }
    // Bordered system L x + lam 1 = r, sum x = 0. With M = L + e0 e0^T,
    // x = a - lam b + x0 z where a, b, z solve M against r, 1, e0.
    const Eigen::VectorXd a = op->lu.solve(r);
    const Eigen::VectorXd& b = op->ones_sol;
    const Eigen::VectorXd& z = op->e0_sol;
    Eigen::Matrix2d K;
    K << b(0), 1.0 - z(0), b.sum(), -z.sum();
    const Eigen::Vector2d sol = K.fullPivLu().solve(Eigen::Vector2d(a(0), a.sum()));
    const Eigen::VectorXd x = a - sol(0) * b + sol(1) * z;
    if (!x.allFinite())
        throw SolverError("Neumann solve failed");
    const double rel = (op->L * x + sol(0) * Eigen::VectorXd::Ones(n) - r).norm() / std::max(r.norm(), 1e-300);
    if (r.norm() > 0.0 && rel > 1e-8)
        throw SolverError("Neumann solve residual " + std::to_string(rel));

    ScalarField phi(dp);
    double mean = 0.0;
    for (int f = 0; f < n; ++f)
        mean += x(f);
    mean /= n;
    for (int f = 0; f < n; ++f)
        phi[f] = x(f) - mean;
    return phi;
}

VectorField potential_lift(DomainPtr dp, const std::vector<BoundaryTrace>& g)
{
    const ScalarField phi = solve_laplace_neumann(dp, g);
    const Domain& d = *dp;
    auto op = neumann_op(dp);
    const auto by = traces_by_component(d, g);
    const std::vector<double> gv = ghost_values(d, *op, phi, by);
    VectorField v(dp);
    const double h = d.h();
    for (int f = 0; f < d.num_fluid(); ++f) {
        auto val = [&](int dd) {
            const int n = d.neighbor(f, dd);
            return n >= 0 ? phi[n] : gv[op->ghost_of[4 * f + dd]];
        };
        v.x[f] = (val(East) - val(West)) / (2 * h);
        v.y[f] = (val(North) - val(South)) / (2 * h);
    }
    return v;
}

HarmonicBasis harmonic_basis(DomainPtr dp)
{
    const Domain& d = *dp;
    HarmonicBasis B;
    B.domain = dp;
    const int N = d.num_holes();
    std::vector<DirichletData> data;
    for (int j = 0; j < N; ++j) {
        std::vector<double> c(d.num_components(), 0.0);
        c[j] = 1.0;
        data.push_back(DirichletData::constants(c));
        B.psi.push_back(solve_poisson_dirichlet(ScalarField(dp), data.back()));
        B.psi_perp_grad.push_back(perp_field(dirichlet_gradient(B.psi.back(), data.back())));
    }
    B.period.resize(N, N);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k <= j; ++k)
            B.period(j, k) = B.period(k, j) = energy(d, B.psi[j], data[j], B.psi[k], data[k]);
    if (N > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(B.period);
        if (llt.info() != Eigen::Success)
            throw SolverError("period matrix is not positive definite");
        B.coefficients = llt.solve(Eigen::MatrixXd::Identity(N, N));
    }
    B.fields = harmonic_fields(B);
    return B;
}

std::vector<VectorField> harmonic_fields(const HarmonicBasis& B)
{
    const int N = static_cast<int>(B.psi.size());
    std::vector<VectorField> X;
    for (int i = 0; i < N; ++i) {
        VectorField f(B.domain);
        for (int k = 0; k < N; ++k) {
            const double a = B.coefficients(k, i);
            const VectorField& g = B.psi_perp_grad[k];
            for (int c = 0; c < f.size(); ++c) {
                f.x[c] += a * g.x[c];
                f.y[c] += a * g.y[c];
            }
        }
        X.push_back(std::move(f));
    }
    return X;
}

namespace {

/// Coefficients c with psi = psi0 + sum c_j psi_j carrying no flux through any hole.
Eigen::VectorXd flux_correction(const ScalarField& omega, const HarmonicBasis& B)
{
    const int N = static_cast<int>(B.psi.size());
    const double h2 = B.domain->h() * B.domain->h();
    Eigen::VectorXd F(N);
    for (int j = 0; j < N; ++j) {
        double s = 0.0;
        for (int f = 0; f < omega.size(); ++f)
            s += B.psi[j][f] * omega[f];
        F(j) = s * h2;
    }
    if (N == 0)
        return F;
    return B.period.llt().solve(-F);
}

} // namespace

ScalarField biot_savart_stream(const ScalarField& omega, const HarmonicBasis& B)
{
    const Domain& d = *B.domain;
    ScalarField psi = solve_poisson_dirichlet(omega, DirichletData::zero(d));
    const Eigen::VectorXd c = flux_correction(omega, B);
    for (int j = 0; j < c.size(); ++j)
        for (int f = 0; f < psi.size(); ++f)
            psi[f] += c(j) * B.psi[j][f];
    return psi;
}

VectorField biot_savart(const ScalarField& omega, const HarmonicBasis& B)
{
    const Domain& d = *B.domain;
    const ScalarField psi0 = solve_poisson_dirichlet(omega, DirichletData::zero(d));
    VectorField v = perp_field(dirichlet_gradient(psi0, DirichletData::zero(d)));
    const Eigen::VectorXd c = flux_correction(omega, B);
    for (int j = 0; j < c.size(); ++j) {
        const VectorField& g = B.psi_perp_grad[j];
        for (int f = 0; f < v.size(); ++f) {
            v.x[f] += c(j) * g.x[f];
            v.y[f] += c(j) * g.y[f];
        }
    }
    return v;
}

VectorField reconstruct_velocity(const ScalarField& omega, std::span<const double> C, const VectorField& v_g,
                                 const HarmonicBasis& B)
{
    if (C.size() != B.fields.size())
        throw std::invalid_argument("one circulation per hole is required");
    VectorField v = biot_savart(omega, B);
    for (int f = 0; f < v.size(); ++f) {
        v.x[f] += v_g.x[f];
        v.y[f] += v_g.y[f];
    }
    for (std::size_t i = 0; i < C.size(); ++i)
        for (int f = 0; f < v.size(); ++f) {
            v.x[f] += C[i] * B.fields[i].x[f];
            v.y[f] += C[i] * B.fields[i].y[f];
        }
    return v;
}

VectorField kernel_column(Vec2 y, const HarmonicBasis& B)
{
    const Domain& d = *B.domain;
    const auto [i, j] = d.locate(y);
    const int c = d.fluid_index(i, j);
    if (c < 0 || !d.contains(y))
        throw PointOutsideFluid("kernel column requested at a point outside the fluid cells");
    ScalarField delta(B.domain);
    delta[c] = 1.0 / (d.h() * d.h());
    return biot_savart(delta, B);
}

VectorField kernel_boundary_value(int component, const HarmonicBasis& B)
{
    if (component < static_cast<int>(B.fields.size())) {
        // K(., y) tends to -X_k as y approaches hole k.
        VectorField v = B.fields[component];
        for (int c = 0; c < v.size(); ++c) {
            v.x[c] = -v.x[c];
            v.y[c] = -v.y[c];
        }
        return v;
    }
    return VectorField(B.domain);
}

ScalarField divergence(const VectorField& v)
{
    const Domain& d = *v.domain;
    ScalarField out(v.domain, std::numeric_limits<double>::quiet_NaN());
    for (int f = 0; f < d.num_fluid(); ++f) {
        const int e = d.neighbor(f, East), w = d.neighbor(f, West), n = d.neighbor(f, North), s = d.neighbor(f, South);
        if (e < 0 || w < 0 || n < 0 || s < 0)
            continue;
        out[f] = (v.x[e] - v.x[w] + v.y[n] - v.y[s]) / (2 * d.h());
    }
    return out;
}

ScalarField curl(const VectorField& v)
{
    const Domain& d = *v.domain;
    ScalarField out(v.domain, std::numeric_limits<double>::quiet_NaN());
    for (int f = 0; f < d.num_fluid(); ++f) {
        const int e = d.neighbor(f, East), w = d.neighbor(f, West), n = d.neighbor(f, North), s = d.neighbor(f, South);
        if (e < 0 || w < 0 || n < 0 || s < 0)
            continue;
        out[f] = (v.y[e] - v.y[w] - (v.x[n] - v.x[s])) / (2 * d.h());
    }
    return out;
}

} // namespace vortlab
