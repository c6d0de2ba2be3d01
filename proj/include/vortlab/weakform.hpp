#pragma once

#include "vortlab/transport.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace vortlab {

/// phi(t, x) = theta(t) * phi(x) with theta(t) = cos^2(pi t / (2 t_end)) on
/// [0, t_end] and zero afterwards.
struct TestFunction {
    enum class Class { General, C0Class };
    Class cls = Class::General;
    ScalarField phi;
    VectorField grad;
    std::vector<BoundaryTrace> traces; ///< phi on every component
    std::vector<double> betas;         ///< C0Class: value on each hole
    double t_end = 1.0;

    double time(double t) const;
    double time_deriv(double t) const;
};

/// Smooth test function from an analytic value and gradient.
TestFunction make_test_function(DomainPtr d, const std::function<double(Vec2)>& f,
                                const std::function<Vec2(Vec2)>& grad_f, double t_end);

/// sum_i beta_i psi_i: constant beta_i on hole i and zero on the outer boundary.
TestFunction make_c0_test(const HarmonicBasis& basis, const std::vector<double>& betas, double t_end);

/// Throws NotC0TestFunction unless phi is constant on every hole to 1e-8 and
/// below 1e-8 on the outer boundary.
void require_c0(const TestFunction& phi);

/// Kernel columns keyed by fluid cell, shared across evaluations.
class KernelCache {
public:
    explicit KernelCache(std::shared_ptr<const HarmonicBasis> basis) : basis_(std::move(basis)) {}
    const VectorField& column(int fluid_cell);
    const HarmonicBasis& basis() const { return *basis_; }

private:
    std::shared_ptr<const HarmonicBasis> basis_;
    std::mutex mu_;
    std::map<int, std::unique_ptr<VectorField>> cols_;
};

/// 1/2 (grad phi(x).K(x, y) + grad phi(y).K(y, x)) at the cells containing x and y.
/// Throws CoincidentPoints or PointOutsideFluid.
double h_phi(const TestFunction& phi, Vec2 x, Vec2 y, KernelCache& cache);

/// Symmetrized gradient of the half-plane Dirichlet Green function,
/// (0, x2 + y2) / (pi (|x - y|^2 + 4 x2 y2)).
Vec2 halfplane_symmetrized_kernel(Vec2 x, Vec2 y);

struct ScanStratum {
    std::string label;
    double d_lo = 0.0, d_hi = 0.0; ///< boundary distance range
    int samples = 0;
    double max_abs = 0.0;
};

struct ScanReport {
    std::vector<ScanStratum> strata; ///< boundary strata from the wall outwards, then the interior
    double finest_max = 0.0;
    double interior_max = 0.0;
    double ratio = 0.0; ///< finest / interior, 0 when both vanish
};

struct ScanOptions {
    int samples = 128; ///< sampled points per stratum
    /// Interior stratum: both points at least this fraction of the deepest
    /// cell's boundary distance away from the boundary.
    double interior_fraction = 0.9;
};

/// Max |H_phi| over pairs sampled per stratum of boundary distance, at
/// separations 3h to 6h taken along the boundary.
ScanReport h_phi_bound_scan(const TestFunction& phi, KernelCache& cache, const ScanOptions& opts = {});

struct ResidualTerm {
    std::string name;
    double value = 0.0;
};

struct ResidualReport {
    std::string identity;
    std::vector<ResidualTerm> terms;
    double total = 0.0;
    double scale = 0.0; ///< largest term magnitude
    double tolerance = 0.1;

    double relative() const { return scale > 0.0 ? std::abs(total) / scale : 0.0; }
    bool pass() const { return relative() <= tolerance; }
    std::string summary() const;
    void write_csv(const std::string& path) const;
};

ResidualReport distributional_residual(const RunRecord& rec, const TestFunction& phi);

/// Default beta(s) = s / sqrt(1 + s^2).
struct Renormalization {
    std::function<double(double)> beta;
    std::function<double(double)> dbeta2; ///< beta''
    static Renormalization standard();
};

ResidualReport renormalized_residual(const RunRecord& rec, const TestFunction& phi,
                                     const Renormalization& beta = Renormalization::standard());

/// Double integral of H_phi omega(x) omega(y) with kernel columns on a
/// stride-4 lattice, interpolated in y, and the pairs closer than 3h removed.
class SymmetrizedIntegrator {
public:
    SymmetrizedIntegrator(std::shared_ptr<const HarmonicBasis> basis, const TestFunction& phi, int threads = 0);
    /// One value per field.
    std::vector<double> evaluate(const std::vector<const ScalarField*>& fields) const;

private:
    std::shared_ptr<const HarmonicBasis> basis_;
    const TestFunction& phi_;
    int threads_;
};

ResidualReport symmetrized_residual(const RunRecord& rec, const TestFunction& phi, int threads = 0);

struct NonlinearComparison {
    double kernel_form = 0.0; ///< double integral of H_phi omega omega
    double direct_form = 0.0; ///< integral of omega K_H[omega].grad phi
    double gap() const;       ///< relative difference
};

NonlinearComparison compare_nonlinear_term(const ScalarField& omega, const TestFunction& phi,
                                           std::shared_ptr<const HarmonicBasis> basis, int threads = 0);

struct DualityInputs {
    std::function<double(Vec2, double)> chi;
    std::function<double(int, double, double)> psi;
    std::function<double(Vec2)> phi_T;
};

struct DualityReport {
    std::vector<ResidualTerm> lhs_terms; ///< chi and Psi terms
    std::vector<ResidualTerm> rhs_terms; ///< initial, final and inflow terms
    double lhs = 0.0, rhs = 0.0;
    double residual = 0.0;
    double scale = 0.0;

    double relative() const { return scale > 0.0 ? std::abs(residual) / scale : 0.0; }
};

DualityReport duality_check(const RunRecord& rec, const DualityInputs& in);

/// Trapezoid weights on the record's time levels.
std::vector<double> time_weights(const RunRecord& rec);

} // namespace vortlab
