#include "vortlab/circulation.hpp"
#include "vortlab/elliptic.hpp"
#include "vortlab/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vortlab;

namespace {

Scenario zero_scenario()
{
    Scenario s = reference_scenario();
    s.id = "zero";
    for (auto& in : s.inflow)
        in = InflowProfile{};
    for (auto& c : s.circulation)
        c = 0.0;
    s.initial = InitialProfile{};
    return s;
}

std::vector<BoundaryTrace> constant_traces(const Domain& d, double c)
{
    std::vector<BoundaryTrace> out;
    for (int i = 0; i < d.num_holes(); ++i)
        out.push_back(make_trace(d, i, [&](const QuadPoint&) { return c; }));
    return out;
}

const RunRecord& reference_run_64()
{
    static const RunRecord rec = [] {
        Scenario s = reference_scenario();
        return run_scenario(s, 2e-3, 1.0, make_flow_model(s, 64));
    }();
    return rec;
}

} // namespace

TEST(MeasureCirculation, HarmonicFields)
{
    auto m = make_flow_model(reference_scenario(), 128);
    const auto& X = m->basis->fields;
    for (std::size_t i = 0; i < X.size(); ++i)
        for (int j = 0; j < m->domain->num_holes(); ++j)
            EXPECT_NEAR(measure_circulation(X[i], j), i == static_cast<std::size_t>(j) ? 1.0 : 0.0, 0.02);
}

TEST(MeasureCirculation, GradientFieldHasNone)
{
    auto d = build_domain(reference_scenario().domain);
    auto v = make_vector_field(d, [](Vec2 p) { return Vec2{std::cos(p.x) * p.y, std::sin(p.x) + 2.0 * p.y}; });
    for (int k = 0; k < d->num_components(); ++k)
        EXPECT_NEAR(measure_circulation(v, k), 0.0, 2.0 * d->h());
}

TEST(MeasureCirculation, KernelVelocityHasNoneAroundHoles)
{
    auto m = make_flow_model(reference_scenario(), 128);
    auto omega = make_field(m->domain, [](Vec2 p) { return std::exp(-4.0 * dot(p - Vec2{0.0, 1.0}, p - Vec2{0.0, 1.0})); });
    auto v = biot_savart(omega, *m->basis);
    const double scale = std::abs(integral(omega));
    for (int i = 0; i < m->domain->num_holes(); ++i)
        EXPECT_NEAR(measure_circulation(v, i), 0.0, 0.02 * scale);
}

TEST(CirculationRhs, ZeroTraceGivesZero)
{
    auto m = make_flow_model(reference_scenario(), 64);
    const auto rhs = circulation_rhs(*m->domain, m->flux_traces(0.0), constant_traces(*m->domain, 0.0));
    for (double r : rhs)
        EXPECT_EQ(r, 0.0);
}

TEST(CirculationRhs, ConstantTraceGivesMinusFlux)
{
    auto m = make_flow_model(reference_scenario(), 64);
    const auto g = m->flux_traces(0.0);
    const auto rhs = circulation_rhs(*m->domain, g, constant_traces(*m->domain, 1.0));
    for (int i = 0; i < m->domain->num_holes(); ++i)
        EXPECT_NEAR(rhs[i], -boundary_integral(*m->domain, g[i]), 1e-12);
    EXPECT_NEAR(rhs[0], 1.0, 1e-6);
    EXPECT_NEAR(rhs[1], -1.0, 1e-6);
}

TEST(CirculationRhs, MatchesMeasuredSlope)
{
    const RunRecord& rec = reference_run_64();
    ASSERT_FALSE(rec.failed) << rec.failure;
    const Domain& d = *rec.domain();
    const double h = d.h();
    for (std::size_t k : {rec.steps.size() / 4, rec.steps.size() / 2, 3 * rec.steps.size() / 4}) {
        const auto& a = rec.steps[k - 1];
        const auto& b = rec.steps[k + 1];
        const auto rhs = circulation_rhs(d, rec.steps[k].g, rec.steps[k].omega_b);
        for (int i = 0; i < d.num_holes(); ++i) {
            const double slope =
                (measure_circulation(b.v, i) - measure_circulation(a.v, i)) / (b.t - a.t);
            EXPECT_NEAR(slope, rhs[i], 0.1 * std::abs(rhs[i]) + 10.0 * h) << "hole " << i << " step " << k;
        }
    }
}

TEST(AdvanceCirculations, ZeroRatesLeaveStateUnchanged)
{
    CirculationState s{0.3, {0.5, -0.3}, 0.7};
    const auto out = advance_circulations(s, {0.0, 0.0}, {0.0, 0.0}, 0.1);
    EXPECT_EQ(out.C, s.C);
    EXPECT_EQ(out.C_outer, s.C_outer);
    EXPECT_DOUBLE_EQ(out.t, 0.4);
}

TEST(AdvanceCirculations, ConstantInflowIsExact)
{
    auto m = make_flow_model(reference_scenario(), 64);
    const auto g = m->flux_traces(0.0);
    const double Q = -boundary_integral(*m->domain, g[0]);
    const auto rhs = circulation_rhs(*m->domain, g, constant_traces(*m->domain, 1.0));
    CirculationState s{0.0, {0.5, 0.0}, 0.0};
    for (int k = 0; k < 40; ++k)
        s = advance_circulations(s, rhs, rhs, 0.025);
    EXPECT_NEAR(s.C[0], 0.5 + Q * 1.0, 1e-12);
}

TEST(AdvanceCirculations, AccumulationMatchesMeasurementAtT)
{
    const RunRecord& rec = reference_run_64();
    ASSERT_FALSE(rec.failed) << rec.failure;
    const auto& last = rec.steps.back();
    double scale = 0.0;
    for (double c : last.circ.C)
        scale = std::max(scale, std::abs(c));
    for (int i = 0; i < rec.domain()->num_holes(); ++i)
        EXPECT_NEAR(last.circ.C[i], measure_circulation(last.v, i), 0.02 * scale + 2.0 * rec.domain()->h());
}

TEST(Kelvin, OuterCirculationIsConstant)
{
    const RunRecord& rec = reference_run_64();
    ASSERT_FALSE(rec.failed) << rec.failure;
    const double c0 = rec.steps.front().circ.C_outer;
    for (const auto& st : rec.steps)
        EXPECT_EQ(st.circ.C_outer, c0);
    const double m0 = measure_circulation(rec.steps.front().v, rec.domain()->outer_id());
    const double m1 = measure_circulation(rec.steps.back().v, rec.domain()->outer_id());
    EXPECT_NEAR(m1, m0, 0.02 * std::max(1.0, std::abs(m0)));
}

TEST(Kelvin, SourceSeriesDependOnlyOnBoundaryData)
{
    Scenario a = reference_scenario();
    a.dt = 0.02;
    Scenario b = a;
    b.initial.gaussians[0].amplitude = -0.4;
    const RunRecord ra = run_scenario(a, 2e-3, 0.5, make_flow_model(a, 64));
    const RunRecord rb = run_scenario(b, 2e-3, 0.5, make_flow_model(b, 64));
    ASSERT_EQ(ra.steps.size(), rb.steps.size());
    bool sink_differs = false;
    for (std::size_t k = 0; k < ra.steps.size(); ++k) {
        EXPECT_EQ(ra.steps[k].circ.C[0], rb.steps[k].circ.C[0]);
        sink_differs = sink_differs || ra.steps[k].circ.C[1] != rb.steps[k].circ.C[1];
    }
    EXPECT_TRUE(sink_differs);
}

TEST(TotalVorticity, ZeroDataIsExactlyZero)
{
    Scenario s = zero_scenario();
    const RunRecord rec = run_scenario(s, 2e-3, 0.5, make_flow_model(s, 64));
    ASSERT_FALSE(rec.failed) << rec.failure;
    for (const auto& row : rec.ledger)
        EXPECT_EQ(row.identity_residual, 0.0);
}

TEST(TotalVorticity, InitialResidualIsZero)
{
    const RunRecord& rec = reference_run_64();
    EXPECT_NEAR(rec.ledger.front().identity_residual, 0.0, 1e-14);
}

TEST(TotalVorticity, ResidualShrinksUnderRefinement)
{
    Scenario s = reference_scenario();
    double prev = 0.0;
    for (int n : {64, 128}) {
        s.dt = 0.02 * 64.0 / n;
        const RunRecord rec = run_scenario(s, 2e-3, 1.0, make_flow_model(s, n));
        ASSERT_FALSE(rec.failed) << rec.failure;
        double worst = 0.0;
        for (const auto& row : rec.ledger)
            worst = std::max(worst, std::abs(row.identity_residual));
        EXPECT_LE(worst, rec.domain()->h() + *s.dt);
        if (n > 64)
            EXPECT_LT(worst, prev / 1.7);
        prev = worst;
    }
}
