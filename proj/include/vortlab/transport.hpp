#pragma once

#include "vortlab/circulation.hpp"
#include "vortlab/elliptic.hpp"
#include "vortlab/scenario.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vortlab {

/// Boundary data and velocity law shared by every step of a run.
struct FlowModel {
    DomainPtr domain;
    std::shared_ptr<const HarmonicBasis> basis; ///< needed for the coupled velocity
    /// Normal velocity g on hole i at arclength s, time t (n leaves the fluid).
    std::function<double(int, double, double)> flux;
    /// Inflow vorticity on Source hole i at arclength s, time t.
    std::function<double(int, double, double)> inflow;
    /// v_g(t) = sum_k lift_weight(k, t) * lift[k].
    std::vector<VectorField> lift;
    std::function<double(int, double)> lift_weight;
    /// When set, the velocity is prescribed and ignores the vorticity.
    std::function<VectorField(double)> prescribed;
    double dt_max = 0.05;

    VectorField v_g(double t) const;
    VectorField velocity(const ScalarField& omega, const std::vector<double>& C, double t) const;
    std::vector<BoundaryTrace> flux_traces(double t) const;   ///< one per hole
    std::vector<BoundaryTrace> inflow_traces(double t) const; ///< one per hole, zero on Sinks
};

using FlowModelPtr = std::shared_ptr<const FlowModel>;

/// Domain, harmonic basis and potential lift for a scenario.
FlowModelPtr make_flow_model(const Scenario& s, std::optional<int> grid_n = std::nullopt);

struct FlowState {
    double t = 0.0;
    ScalarField omega;
    VectorField v;
    CirculationState circ;
    std::vector<BoundaryTrace> g;          ///< one per hole
    std::vector<BoundaryTrace> omega_plus; ///< one per hole, meaningful on Sources
};

/// C_outer is set so that the total-vorticity identity holds exactly at t0.
FlowState initial_state(const FlowModel& m, const ScalarField& omega_in, const std::vector<double>& C_in,
                        double t0 = 0.0);

/// min(0.5 h / max|v|, 0.5 h^2 / (4 nu), dt_max); nu = 0 drops the diffusive bound.
double stable_dt(const FlowState& s, double nu, double dt_max);

/// One RK2 step of the viscous scheme with the Robin inflow condition.
/// Throws CFLViolation or NonFiniteField.
FlowState viscous_step(const FlowModel& m, const FlowState& s, double nu, double dt);

struct StepDiagnostics {
    int source_crossings = 0;
    int sink_crossings = 0;  ///< trajectory stalls at Sinks
    int outer_crossings = 0; ///< trajectory stalls at the outer wall
};

/// One RK2 semi-Lagrangian step (inviscid). Crossings of Sinks are counted
/// in `diag` and filled by one-sided extrapolation.
FlowState semi_lagrangian_step(const FlowModel& m, const FlowState& s, double dt, StepDiagnostics* diag = nullptr);

/// Limited one-sided extrapolation of omega onto every Sink.
std::vector<BoundaryTrace> trace_outflow(const FlowState& s);

/// Everything kept for one time level of a run.
struct StepRecord {
    double t = 0.0;
    ScalarField omega;
    VectorField v;
    CirculationState circ;
    std::vector<BoundaryTrace> g;       ///< one per hole
    std::vector<BoundaryTrace> omega_b; ///< inflow values on Sources, outflow trace on Sinks
};

struct LedgerRow {
    double t = 0.0;
    double mass = 0.0;         ///< integral of omega
    double inflow_rate = 0.0;  ///< int over sources of (-g) omega_plus
    double outflow_rate = 0.0; ///< int over sinks of g omega_minus
    double identity_residual = 0.0;
};

struct RunRecord {
    std::string scenario_id;
    double nu = 0.0;
    std::string stepper; ///< "viscous" or "semi-lagrangian"
    FlowModelPtr model;
    int snapshot_stride = 1;
    std::vector<StepRecord> steps; ///< every time level, t strictly increasing
    std::vector<double> dt_history;
    std::vector<LedgerRow> ledger;
    StepDiagnostics diagnostics;
    bool failed = false;
    std::string failure;

    DomainPtr domain() const { return model->domain; }
    std::vector<int> snapshot_indices() const; ///< every stride-th level plus the last
};

struct RunOptions {
    std::optional<double> fixed_dt;
    int snapshot_stride = 1;
    std::string scenario_id = "run";
};

/// Advance from (omega_in, C_in) to T; nu > 0 selects the viscous scheme,
/// nu = 0 the semi-Lagrangian one. Failures leave a partial record marked failed.
RunRecord run_flow(FlowModelPtr m, const ScalarField& omega_in, const std::vector<double>& C_in, double nu,
                   double T, const RunOptions& opts = {});

RunRecord run_scenario(const Scenario& s, double nu, double T, FlowModelPtr model = nullptr);

/// Backward problem: -d_t phi - v.grad phi - nu Lap phi = chi, phi = Psi
/// entering through Sinks (Robin form when nu > 0), phi(T) = phi_T.
struct AdjointData {
    std::function<double(Vec2, double)> chi;
    std::function<double(int, double, double)> psi; ///< hole, arclength, time
    ScalarField phi_T;
    double nu = 0.0;
};

struct AdjointHistory {
    std::vector<double> t;         ///< same levels as the forward record, increasing
    std::vector<ScalarField> phi;
    std::vector<std::vector<BoundaryTrace>> phi_plus; ///< per level, one trace per hole (Sources filled)
    StepDiagnostics diagnostics;
};

AdjointHistory adjoint_solve(const RunRecord& forward, const AdjointData& data);

} // namespace vortlab
