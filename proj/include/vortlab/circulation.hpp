#pragma once

#include "vortlab/domain.hpp"

#include <vector>

namespace vortlab {

/// Hole circulations C_i and the outer-boundary circulation at time t.
struct CirculationState {
    double t = 0.0;
    std::vector<double> C;
    double C_outer = 0.0;
};

/// Circulation of v around one component with the fluid on the left (clockwise
/// around holes), from extrapolated traces.
double measure_circulation(const VectorField& v, int component);

/// dC_i/dt = -int_{hole i} omega g ds for every hole; `omega_b[i]` holds the
/// inflow value on sources and the outflow trace on sinks.
std::vector<double> circulation_rhs(const Domain& d, const std::vector<BoundaryTrace>& g,
                                    const std::vector<BoundaryTrace>& omega_b);

/// Trapezoid update; C_outer is carried unchanged.
CirculationState advance_circulations(const CirculationState& s, const std::vector<double>& rhs_now,
                                      const std::vector<double>& rhs_next, double dt);

struct VorticityIdentity {
    double total_vorticity = 0.0; ///< grid quadrature of omega
    double circulations = 0.0;    ///< C_outer + sum C_i
    double residual = 0.0;        ///< difference of the two
};

VorticityIdentity total_vorticity_check(const ScalarField& omega, const CirculationState& s);

} // namespace vortlab
