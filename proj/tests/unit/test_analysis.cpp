#include "vortlab/analysis.hpp"
#include "vortlab/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vortlab;

namespace {

Scenario zero_scenario()
{
    Scenario s = reference_scenario();
    for (auto& in : s.inflow)
        in = InflowProfile{};
    for (auto& c : s.circulation)
        c = 0.0;
    s.initial = InitialProfile{};
    return s;
}

Scenario constant_scenario(double c)
{
    Scenario s = reference_scenario();
    for (auto& in : s.inflow)
        in = InflowProfile{InflowProfile::Kind::Constant, c};
    s.initial = InitialProfile{};
    s.initial.kind = InitialProfile::Kind::Constant;
    s.initial.value = c;
    return s;
}

const RunRecord& viscous_run()
{
    static const RunRecord rec = [] {
        const Scenario s = reference_scenario();
        return run_scenario(s, 1e-3, 1.0, make_flow_model(s, 64));
    }();
    return rec;
}

SampledFunction uniform(std::vector<double> values)
{
    SampledFunction f;
    f.measure.assign(values.size(), 1.0 / values.size());
    f.values = std::move(values);
    return f;
}

/// min(j, x^{-1/2}) on (0, 1): bounded in L^1 and uniformly integrable.
std::vector<SampledFunction> capped_family(int J, int cells)
{
    std::vector<SampledFunction> fam;
    for (int j = 1; j <= J; ++j) {
        std::vector<double> v;
        for (int k = 0; k < cells; ++k)
            v.push_back(std::min<double>(j, 1.0 / std::sqrt((k + 0.5) / cells)));
        fam.push_back(uniform(std::move(v)));
    }
    return fam;
}

} // namespace

TEST(LpBudget, ZeroDataIsZero)
{
    const Scenario s = zero_scenario();
    const RunRecord rec = run_scenario(s, 1e-3, 0.5, make_flow_model(s, 64));
    for (double q : {1.0, 2.0, 4.0}) {
        const BudgetReport b = lp_budget(rec, q);
        for (const auto& row : b.rows) {
            EXPECT_EQ(row.interior, 0.0);
            EXPECT_EQ(row.outflow, 0.0);
            EXPECT_EQ(row.initial, 0.0);
            EXPECT_EQ(row.inflow, 0.0);
            EXPECT_EQ(row.slack(), 0.0);
        }
    }
    EXPECT_EQ(linf_bound(rec), 0.0);
}

TEST(LpBudget, ConstantRunSaturates)
{
    const Scenario s = constant_scenario(0.8);
    const RunRecord rec = run_scenario(s, 1e-3, 1.0, make_flow_model(s, 64));
    ASSERT_FALSE(rec.failed) << rec.failure;
    const double h = rec.domain()->h();
    for (double q : {1.0, 2.0}) {
        const BudgetReport b = lp_budget(rec, q);
        for (const auto& row : b.rows)
            EXPECT_LE(std::abs(row.slack()), row.rhs() * (h + rec.dt_history.front())) << "q=" << q << " t=" << row.t;
    }
}

TEST(LpBudget, ReferenceRunWithinTolerance)
{
    const RunRecord& rec = viscous_run();
    ASSERT_FALSE(rec.failed) << rec.failure;
    for (double q : {1.0, 2.0, 4.0})
        EXPECT_GE(lp_budget(rec, q).min_relative_slack(), -0.05) << "q=" << q;
    EXPECT_THROW(lp_budget(rec, 0.5), std::invalid_argument);
}

TEST(LpBudget, FirstPowerMatchesMassLedgerForPositiveData)
{
    const Scenario s = constant_scenario(0.8);
    const RunRecord rec = run_scenario(s, 1e-3, 0.5, make_flow_model(s, 64));
    const BudgetReport b = lp_budget(rec, 1.0);
    ASSERT_EQ(b.rows.size(), rec.ledger.size());
    for (std::size_t k = 0; k < b.rows.size(); ++k)
        EXPECT_NEAR(b.rows[k].interior, rec.ledger[k].mass, 1e-12);
    double in = 0.0, out = 0.0;
    for (std::size_t k = 1; k < rec.ledger.size(); ++k) {
        const double dt = rec.ledger[k].t - rec.ledger[k - 1].t;
        in += 0.5 * dt * (rec.ledger[k].inflow_rate + rec.ledger[k - 1].inflow_rate);
        out += 0.5 * dt * (rec.ledger[k].outflow_rate + rec.ledger[k - 1].outflow_rate);
    }
    EXPECT_NEAR(b.rows.back().inflow, in, 1e-10);
    EXPECT_NEAR(b.rows.back().outflow, out, 1e-10);
}

TEST(LinfBound, SemiLagrangianAndViscous)
{
    const Scenario s = reference_scenario();
    auto m = make_flow_model(s, 64);
    EXPECT_LE(linf_bound(run_scenario(s, 0.0, 1.0, m)), 1.0 + 1e-12);
    EXPECT_LE(linf_bound(viscous_run()), 1.0 + 10.0 * m->domain->h());
}

TEST(GBudget, QuadraticGaugeMatchesL2)
{
    const RunRecord& rec = viscous_run();
    const BudgetReport a = lp_budget(rec, 2.0);
    const BudgetReport b = g_budget(rec, power_gauge(2.0));
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_NEAR(a.rows[k].lhs(), b.rows[k].lhs(), 1e-12 * std::max(1.0, a.rows[k].lhs()));
        EXPECT_NEAR(a.rows[k].rhs(), b.rows[k].rhs(), 1e-12 * std::max(1.0, a.rows[k].rhs()));
    }
}

TEST(GBudget, ClosedFormGaugeOnReferenceRun)
{
    const RunRecord& rec = viscous_run();
    const BudgetReport b = g_budget(rec, closed_form_gauge());
    EXPECT_GE(b.min_relative_slack(), -0.05);
    for (const auto& row : b.rows)
        EXPECT_GE(row.dissipation, 0.0) << "t=" << row.t;
}

TEST(GBudget, ClosedFormGaugeIsRejectedPastItsConvexRange)
{
    // x^2 / sqrt(x^2 + 1) is concave beyond sqrt(2).
    const GaugeFunction G = closed_form_gauge();
    EXPECT_LT(G.G2(2.0), 0.0);
    const Scenario s = constant_scenario(3.0);
    const RunRecord rec = run_scenario(s, 1e-3, 0.2, make_flow_model(s, 64));
    EXPECT_THROW(g_budget(rec, G), NonConvexGauge);
}

TEST(ConvexGauge, ProbesAndFormula)
{
    const ConvexGauge G{{0.0, 1.0, 2.0, 4.0}};
    EXPECT_TRUE(G.convex());
    EXPECT_TRUE(G.even());
    EXPECT_TRUE(G.superlinear());
    EXPECT_DOUBLE_EQ(G(0.5), 0.5);
    EXPECT_DOUBLE_EQ(G(1.0), 1.0);
    EXPECT_DOUBLE_EQ(G(2.0), 4.0);
    EXPECT_DOUBLE_EQ(G(-2.0), 4.0);
    EXPECT_DOUBLE_EQ(G(4.0), 12.0);
    EXPECT_DOUBLE_EQ(G.breakpoint(4), 8.0);
}

TEST(Dlvp, BoundedSingleton)
{
    const double B = 3.0;
    const GaugeCertificate c = dlvp_gauge({uniform({0.5, 1.0, 2.0, B})});
    EXPECT_LE(c.gauge.N[1], B);
    EXPECT_TRUE(c.gauge.convex());
    EXPECT_LE(c.direct_sup, c.certified_bound);
    EXPECT_TRUE(std::isfinite(c.direct_sup));
}

TEST(Dlvp, CappedPowerFamilyIsCertified)
{
    const GaugeCertificate c = dlvp_gauge(capped_family(20, 4096));
    EXPECT_TRUE(c.gauge.convex());
    EXPECT_TRUE(c.gauge.even());
    EXPECT_TRUE(c.gauge.superlinear());
    EXPECT_LE(c.direct_sup, c.certified_bound);
    for (std::size_t i = 2; i < c.gauge.N.size(); ++i)
        EXPECT_GE(c.gauge.N[i], 2.0 * c.gauge.N[i - 1]);
}

TEST(Dlvp, ConcentratingFamilyIsRejected)
{
    std::vector<SampledFunction> fam;
    for (int j = 1; j <= 20; ++j)
        fam.push_back({{double(j), 0.0}, {1.0 / j, 1.0 - 1.0 / j}});
    EXPECT_THROW(dlvp_gauge(fam), NotUniformlyIntegrable);
}

TEST(WeightedUI, ConstantMembersAreConsistent)
{
    const RunRecord& rec = viscous_run();
    const Domain& d = *rec.domain();
    std::vector<SampledFunction> f;
    std::vector<std::vector<double>> h;
    for (int i = 0; i < d.num_holes(); ++i)
        if (d.component(i).kind == ComponentKind::Sink) {
            SampledFunction one;
            for (const auto& q : d.component(i).quad) {
                one.values.push_back(1.0);
                one.measure.push_back(q.weight);
            }
            f.push_back(one);
            h.push_back(rec.steps.front().g[i].values);
        }
    const WeightedUIReport r = weighted_ui_check(f, h, ConvexGauge{{0.0, 1.0, 2.0}});
    EXPECT_TRUE(r.consistent);
    EXPECT_TRUE(std::isfinite(r.sup_gauge));
}

TEST(WeightedUI, OutflowTracesAcrossViscosities)
{
    const Scenario s = reference_scenario();
    auto m = make_flow_model(s, 64);
    std::vector<RunRecord> runs;
    for (double nu : {4e-3, 2e-3, 1e-3})
        runs.push_back(run_scenario(s, nu, 1.0, m));
    const Domain& d = *m->domain;
    int sink = -1;
    for (int i = 0; i < d.num_holes(); ++i)
        if (d.component(i).kind == ComponentKind::Sink)
            sink = i;
    std::vector<SampledFunction> inflow, out;
    std::vector<std::vector<double>> h;
    for (const auto& r : runs) {
        SampledFunction a, b;
        std::vector<double> w;
        for (std::size_t k = 0; k < r.steps.size(); k += 5)
            for (int i = 0; i < d.num_holes(); ++i)
                for (std::size_t j = 0; j < d.component(i).quad.size(); ++j) {
                    const double qw = d.component(i).quad[j].weight;
                    if (i == sink) {
                        b.values.push_back(r.steps[k].omega_b[i].values[j]);
                        b.measure.push_back(qw);
                        w.push_back(r.steps[k].g[i].values[j]);
                    } else {
                        a.values.push_back(r.steps[k].omega_b[i].values[j]);
                        a.measure.push_back(qw);
                    }
                }
        inflow.push_back(a);
        out.push_back(b);
        h.push_back(w);
    }
    const GaugeCertificate c = dlvp_gauge(inflow);
    const WeightedUIReport r = weighted_ui_check(out, h, c.gauge);
    EXPECT_TRUE(std::isfinite(r.sup_gauge));
    EXPECT_TRUE(r.consistent);
}

TEST(WeightedUI, ConcentratingWeightsViolateHypothesis)
{
    std::vector<SampledFunction> f;
    std::vector<std::vector<double>> h;
    for (int j = 1; j <= 6; ++j) {
        f.push_back(uniform({1.0, 1.0, 1.0, 1.0}));
        const double tiny = std::ldexp(1.0, -30 - j);
        h.push_back({1.0, 1.0, tiny, tiny});
    }
    EXPECT_THROW(weighted_ui_check(f, h, ConvexGauge{{0.0, 1.0}}), HypothesisViolated);
}

TEST(Trend, OneInversionAllowedAtTheStart)
{
    EXPECT_TRUE(decreasing_with_one_inversion({3.0, 2.0, 1.0}));
    EXPECT_TRUE(decreasing_with_one_inversion({2.0, 3.0, 1.0}));
    EXPECT_FALSE(decreasing_with_one_inversion({3.0, 1.0, 2.0}));
    EXPECT_TRUE(decreasing_with_one_inversion({0.0, 0.0, 0.0}));
}

TEST(NuSweep, ZeroDataIsExactlyZero)
{
    SweepOptions o;
    o.grid_n = 64;
    const SweepReport r = nu_sweep(zero_scenario(), {4e-3, 2e-3, 1e-3}, 0.5, o);
    EXPECT_TRUE(r.failures.empty());
    for (const auto& row : r.distances)
        for (double v : row)
            EXPECT_EQ(v, 0.0);
    for (double v : r.outflow)
        EXPECT_EQ(v, 0.0);
    for (double v : r.circulation)
        EXPECT_EQ(v, 0.0);
}

TEST(NuSweep, RejectsIncreasingViscosities)
{
    EXPECT_THROW(nu_sweep(reference_scenario(), {1e-3, 2e-3}, 0.5), std::invalid_argument);
}

TEST(NuSweep, ReferenceTrendsDecrease)
{
    SweepOptions o;
    o.grid_n = 128;
    const SweepReport r = nu_sweep(reference_scenario(), {4e-3, 2e-3, 1e-3, 5e-4}, 1.0, o);
    ASSERT_TRUE(r.failures.empty());
    EXPECT_TRUE(r.terminal_decreasing);
    EXPECT_TRUE(r.outflow_decreasing);
}

TEST(NuSweep, FrozenVelocityApproachesInviscidLimit)
{
    // Smooth inflow vanishing at t = 0, so the inflow front carries no jump.
    Scenario s = reference_scenario();
    s.inflow[0].mode = 0;
    s.inflow[0].amplitude = -0.5;
    SweepOptions o;
    o.grid_n = 512;
    o.frozen_velocity = true;
    o.reference_inviscid = true;
    const SweepReport r = nu_sweep(s, {4e-3, 2e-3, 1e-3, 5e-4}, 1.0, o);
    ASSERT_TRUE(r.failures.empty());
    EXPECT_TRUE(r.terminal_decreasing);
    EXPECT_LE(r.inviscid_distance, 2.0 * r.terminal.back());
}
