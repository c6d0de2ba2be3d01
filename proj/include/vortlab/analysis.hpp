#pragma once

#include "vortlab/transport.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vortlab {

struct BudgetRow {
    double t = 0.0;
    double interior = 0.0; ///< norm or gauge integral of omega(t)
    double outflow = 0.0;  ///< accumulated weighted outflow up to t
    double initial = 0.0;
    double inflow = 0.0;   ///< accumulated weighted inflow up to t
    double dissipation = 0.0; ///< nu * sum G''(omega)|grad omega|^2 at t (gauge budgets)

    double lhs() const { return interior + outflow; }
    double rhs() const { return initial + inflow; }
    double slack() const { return rhs() - lhs(); }
};

struct BudgetReport {
    std::string gauge; ///< "q=2", or the gauge name
    std::vector<BudgetRow> rows; ///< one per time level

    /// Smallest slack / rhs over the given rows (all rows when empty).
    double min_relative_slack(const std::vector<int>& rows_used = {}) const;
    void write_csv(const std::string& path) const;
};

/// Interior L^q norm plus weighted outflow against initial norm plus weighted inflow.
BudgetReport lp_budget(const RunRecord& rec, double q);

/// max_t max(|omega(t)|_inf, |omega^-|_inf) / max(|omega_in|_inf, |omega^+|_inf); 0 for zero data.
double linf_bound(const RunRecord& rec);

/// Even convex gauge: G(s) = s on [0, N_1), then linear on [N_i, N_{i+1}) from
/// i N_i to (i+1) N_{i+1}. Breakpoints past the stored ones keep doubling.
struct ConvexGauge {
    std::vector<double> N; ///< N[0] = 0, increasing

    double operator()(double s) const;
    double slope(int i) const; ///< slope on [N_i, N_{i+1})
    double breakpoint(int i) const;
    /// Direct probes of convexity, evenness and superlinearity (slope_i >= i).
    bool convex() const;
    bool even() const;
    bool superlinear() const;
};

/// A gauge given in closed form, with its second derivative.
struct GaugeFunction {
    std::string name;
    std::function<double(double)> G;
    std::function<double(double)> G2;
};

/// x^2 / sqrt(x^2 + 1).
GaugeFunction closed_form_gauge();
GaugeFunction power_gauge(double q);
GaugeFunction as_function(const ConvexGauge& g);

/// Gauge budget; the convexity of G is probed on the record's value range
/// (NonConvexGauge on failure). Rows carry the dissipation quadrature.
BudgetReport g_budget(const RunRecord& rec, const GaugeFunction& G);

/// Sampled function: values with the measure of each sample.
struct SampledFunction {
    std::vector<double> values;
    std::vector<double> measure;
};

struct GaugeCertificate {
    ConvexGauge gauge;
    double domain_measure = 0.0;
    double certified_bound = 0.0; ///< N_1 |O| + sum (i+1) / 2^i
    double direct_sup = 0.0;      ///< sup_j of integral G(|f_j|), summed directly
};

/// Breakpoints with sup_j of the integral of |f_j| over {|f_j| > N_i} below 2^-i,
/// by doubling and bisection, then N_{i+1} >= 2 N_i. Throws NotUniformlyIntegrable
/// when the tail does not fall below 2^-i, or when the low breakpoints are
/// carried by the largest members of the family.
GaugeCertificate dlvp_gauge(const std::vector<SampledFunction>& family);

struct WeightedUIReport {
    std::vector<double> deltas;
    std::vector<double> small_weight_measure; ///< sup_j mu{h_j <= delta}
    std::vector<double> levels;
    std::vector<double> tails; ///< sup_j of the integral of |f h| over {|f h| > level}
    double sup_gauge = 0.0;    ///< sup_j of the integral of G(f_j) h_j
    bool consistent = false;
};

/// Both sides of the weighted uniform-integrability equivalence. Throws
/// HypothesisViolated when the measure of {h_j <= delta} does not shrink.
WeightedUIReport weighted_ui_check(const std::vector<SampledFunction>& f, const std::vector<std::vector<double>>& h,
                                   const ConvexGauge& G);

struct SweepOptions {
    std::optional<int> grid_n;
    double p = 2.0;
    int threads = 0;
    int report_times = 10;     ///< distances at T k / report_times
    bool frozen_velocity = false; ///< transport by the potential flow only
    bool reference_inviscid = false; ///< also run nu = 0 for comparison
};

struct SweepReport {
    std::vector<double> nu;
    std::vector<double> times;
    /// distances[k][m]: between nu[k] and nu[k+1] at times[m]
    std::vector<std::vector<double>> distances;
    std::vector<double> terminal; ///< distances at T
    std::vector<double> outflow;  ///< g-weighted L^p(ds dt) trace distances
    std::vector<double> circulation; ///< sup-in-time circulation distances
    double inviscid_distance = -1.0; ///< smallest nu against nu = 0 at T, when run
    bool terminal_decreasing = false;
    bool outflow_decreasing = false;
    std::vector<std::string> failures;

    void write_csv(const std::string& path) const;
};

/// True when the sequence strictly decreases, allowing one inversion at the
/// first pair, or is identically zero.
bool decreasing_with_one_inversion(const std::vector<double>& d);

SweepReport nu_sweep(const Scenario& s, const std::vector<double>& nus, double T, const SweepOptions& opts = {});

/// Copy of a model whose velocity is its potential lift v_g(t).
FlowModelPtr frozen_velocity_model(const FlowModelPtr& m);

} // namespace vortlab
