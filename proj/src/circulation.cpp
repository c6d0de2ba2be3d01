#include "vortlab/circulation.hpp"

#include <stdexcept>

namespace vortlab {

double measure_circulation(const VectorField& v, int component)
{
    const Domain& d = *v.domain;
    ScalarField vx(v.domain), vy(v.domain);
    vx.v = v.x;
    vy.v = v.y;
    const BoundaryTrace tx = sample_to_boundary(vx, component);
    const BoundaryTrace ty = sample_to_boundary(vy, component);
    const auto& quad = d.component(component).quad;
    double s = 0.0;
    for (std::size_t q = 0; q < quad.size(); ++q)
        s += (tx.values[q] * quad[q].tangent.x + ty.values[q] * quad[q].tangent.y) * quad[q].weight;
    return s;
}

std::vector<double> circulation_rhs(const Domain& d, const std::vector<BoundaryTrace>& g,
                                    const std::vector<BoundaryTrace>& omega_b)
{
    const int N = d.num_holes();
    if (static_cast<int>(g.size()) != N || static_cast<int>(omega_b.size()) != N)
        throw std::invalid_argument("circulation_rhs needs one flux and one vorticity trace per hole");
    std::vector<double> rhs(N);
    for (int i = 0; i < N; ++i) {
        const auto& quad = d.component(i).quad;
        double s = 0.0;
        for (std::size_t q = 0; q < quad.size(); ++q)
            s += omega_b[i].values[q] * g[i].values[q] * quad[q].weight;
        rhs[i] = -s;
    }
    return rhs;
}

CirculationState advance_circulations(const CirculationState& s, const std::vector<double>& rhs_now,
                                      const std::vector<double>& rhs_next, double dt)
{
    CirculationState out = s;
    out.t = s.t + dt;
    for (std::size_t i = 0; i < s.C.size(); ++i)
        out.C[i] = s.C[i] + 0.5 * dt * (rhs_now[i] + rhs_next[i]);
    return out;
}

VorticityIdentity total_vorticity_check(const ScalarField& omega, const CirculationState& s)
{
    VorticityIdentity r;
    r.total_vorticity = integral(omega);
    r.circulations = s.C_outer;
    for (double c : s.C)
        r.circulations += c;
    r.residual = r.total_vorticity - r.circulations;
    return r;
}

} // namespace vortlab
