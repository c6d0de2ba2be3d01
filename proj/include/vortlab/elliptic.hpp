#pragma once

#include "vortlab/domain.hpp"

#include <Eigen/Core>

#include <span>
#include <variant>
#include <vector>

namespace vortlab {

/// Dirichlet data: one constant or trace per boundary component.
struct DirichletData {
    std::vector<std::variant<double, BoundaryTrace>> per_component;

    static DirichletData zero(const Domain& d);
    static DirichletData constants(std::vector<double> c);
    double at(const Domain& d, int component, Vec2 p) const;
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Solve Lap u = rhs in the fluid with u = b on every component.
/// Cut-cell symmetric discretisation, PCG to relative residual 1e-10.
ScalarField solve_poisson_dirichlet(const ScalarField& rhs, const DirichletData& b, SolveStats* stats = nullptr);

/// Second-order gradient of u, using the Dirichlet values across cut links.
VectorField dirichlet_gradient(const ScalarField& u, const DirichletData& b);

/// Solve Lap phi = 0 with d_n phi = g (n leaving the fluid) on the given
/// component traces; components without a trace get zero flux. The result
/// has zero cell mean. Throws CompatibilityError if the fluxes do not cancel.
ScalarField solve_laplace_neumann(DomainPtr d, const std::vector<BoundaryTrace>& g);

/// Potential velocity grad(phi_g) for the same Neumann data.
VectorField potential_lift(DomainPtr d, const std::vector<BoundaryTrace>& g);

struct HarmonicBasis {
    DomainPtr domain;
    std::vector<ScalarField> psi;  ///< psi_j = 1 on hole j, 0 on the other components
    Eigen::MatrixXd period;        ///< M_jk = flux of psi_k through hole j = energy(psi_j, psi_k)
    Eigen::MatrixXd coefficients;  ///< X_i = perp grad(sum_k A_ki psi_k), A = M^{-1}
    std::vector<VectorField> fields;
    std::vector<VectorField> psi_perp_grad; ///< perp grad psi_j
};

/// Harmonic measures of the holes, the period matrix and the unit-circulation fields.
HarmonicBasis harmonic_basis(DomainPtr d);

/// Divergence-free, tangent fields with circulation delta_ij around hole j.
std::vector<VectorField> harmonic_fields(const HarmonicBasis& basis);

/// Stream function of K_H[omega]: Lap psi = omega, psi constant on each
/// component (zero outside) with zero circulation around every hole.
ScalarField biot_savart_stream(const ScalarField& omega, const HarmonicBasis& basis);

/// Velocity K_H[omega] = perp grad of the stream function.
VectorField biot_savart(const ScalarField& omega, const HarmonicBasis& basis);

/// v = v_g + sum_i C_i X_i + K_H[omega].
VectorField reconstruct_velocity(const ScalarField& omega, std::span<const double> C, const VectorField& v_g,
                                 const HarmonicBasis& basis);

/// K_H applied to a unit point mass at y (mass 1/h^2 in the cell containing y).
/// Throws PointOutsideFluid.
VectorField kernel_column(Vec2 y, const HarmonicBasis& basis);

/// Velocity that K(x, y) takes when y sits on hole k (zero for the outer boundary).
VectorField kernel_boundary_value(int component, const HarmonicBasis& basis);

/// Centred-difference divergence and curl at cells whose four neighbours are fluid
/// (NaN elsewhere).
ScalarField divergence(const VectorField& v);
ScalarField curl(const VectorField& v);

} // namespace vortlab
