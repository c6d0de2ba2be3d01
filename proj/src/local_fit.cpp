#include "vortlab/local_fit.hpp"
#include "vortlab/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vortlab {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

Vec6 monomials(Vec2 p, Vec2 c, double h)
{
    const double a = (p.x - c.x) / h, b = (p.y - c.y) / h;
    Vec6 m;
    m << 1.0, a, b, a * a, a * b, b * b;
    return m;
}

Vec6 d_dx(Vec2 p, Vec2 c, double h)
{
    const double a = (p.x - c.x) / h, b = (p.y - c.y) / h;
    Vec6 m;
    m << 0.0, 1.0, 0.0, 2 * a, b, 0.0;
    return m / h;
}

Vec6 d_dy(Vec2 p, Vec2 c, double h)
{
    const double a = (p.x - c.x) / h, b = (p.y - c.y) / h;
    Vec6 m;
    m << 0.0, 0.0, 1.0, 0.0, a, 2 * b;
    return m / h;
}

std::optional<Stencil> try_fit(const Domain& d, Vec2 center, Vec2 eval, FitEval what,
                               const FitConstraint* con, double radius_cells, int min_cells)
{
    const double h = d.h();
    const double R = radius_cells * h;
    const auto [ci, cj] = d.locate(center);
    const int span = static_cast<int>(std::ceil(radius_cells)) + 1;

    std::vector<int> cells;
    std::vector<double> w;
    for (int j = cj - span; j <= cj + span; ++j)
        for (int i = ci - span; i <= ci + span; ++i) {
            const int f = d.fluid_index(i, j);
            if (f < 0)
                continue;
            const double r = norm(d.cell_center(i, j) - center);
            if (r > R)
                continue;
            cells.push_back(f);
            const double s = r / (1.5 * h);
            w.push_back(std::exp(-s * s));
        }
    if (static_cast<int>(cells.size()) < min_cells)
        return std::nullopt;

    const int m = static_cast<int>(cells.size());
    Eigen::MatrixXd V(m, 6);
    for (int k = 0; k < m; ++k)
        V.row(k) = monomials(d.center(cells[k]), center, h).transpose();

    const int nc = con ? 1 : 0;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(6 + nc, 6 + nc);
    K.topLeftCorner(6, 6) = V.transpose() * Eigen::Map<Eigen::VectorXd>(w.data(), m).asDiagonal() * V;
    if (con) {
        Vec6 row = (con->kind == FitConstraint::Kind::Value)
                       ? monomials(con->at, center, h)
                       : Vec6(con->normal.x * d_dx(con->at, center, h) + con->normal.y * d_dy(con->at, center, h));
        if (con->kind == FitConstraint::Kind::NormalDerivative)
            row *= h; // keep the system scaled
        K.block(6, 0, 1, 6) = row.transpose();
        K.block(0, 6, 6, 1) = row;
    }

    Vec6 e = what == FitEval::Value ? monomials(eval, center, h)
             : what == FitEval::DerivX ? d_dx(eval, center, h)
                                       : d_dy(eval, center, h);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6 + nc);
    rhs.head(6) = e;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    lu.setThreshold(1e-10);
    if (lu.rank() < 6 + nc)
        return std::nullopt;
    const Eigen::VectorXd z = lu.solve(rhs);

    Stencil st;
    st.cells = std::move(cells);
    st.weights.resize(m);
    const Eigen::VectorXd vz = V * z.head(6);
    for (int k = 0; k < m; ++k)
        st.weights[k] = w[k] * vz(k);
    if (con)
        st.datum_weight = z(6) * (con->kind == FitConstraint::Kind::NormalDerivative ? h : 1.0);
    return st;
}

} // namespace

Stencil local_fit(const Domain& d, Vec2 center, Vec2 eval, FitEval what, const FitConstraint* constraint)
{
    if (auto s = try_fit(d, center, eval, what, constraint, 2.6, 10))
        return *s;
    if (auto s = try_fit(d, center, eval, what, constraint, 3.6, 6))
        return *s;
    throw ExtrapolationError("fewer than 6 usable fluid cells near (" + std::to_string(center.x) + ", " +
                             std::to_string(center.y) + ")");
}

} // namespace vortlab
