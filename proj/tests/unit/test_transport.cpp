#include "vortlab/errors.hpp"
#include "vortlab/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vortlab;

namespace {

/// Hole-free box transported by a prescribed uniform velocity.
FlowModelPtr box_model(int n, Vec2 velocity, Rectangle box = {{-2.0, -1.0}, {2.0, 1.0}})
{
    auto m = std::make_shared<FlowModel>();
    DomainSpec spec;
    spec.outer = box;
    spec.grid_n = n;
    BuildOptions opts;
    opts.require_source_and_sink = false;
    m->domain = build_domain(spec, opts);
    m->basis = std::make_shared<HarmonicBasis>(harmonic_basis(m->domain));
    const DomainPtr d = m->domain;
    m->prescribed = [d, velocity](double) { return make_vector_field(d, [&](Vec2) { return velocity; }); };
    m->lift_weight = [](int, double) { return 0.0; };
    return m;
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

Scenario zero_scenario()
{
    Scenario s = constant_scenario(0.0);
    s.initial.kind = InitialProfile::Kind::Zero;
    for (auto& c : s.circulation)
        c = 0.0;
    return s;
}

double bump(Vec2 p, Vec2 c)
{
    const double r2 = dot(p - c, p - c) / 0.16;
    return r2 < 1.0 ? std::pow(1.0 - r2, 4) : 0.0;
}

} // namespace

TEST(StableDt, RestStateUsesCap)
{
    auto m = box_model(40, {0.0, 0.0});
    const FlowState s = initial_state(*m, ScalarField(m->domain), {});
    EXPECT_DOUBLE_EQ(stable_dt(s, 0.0, 0.05), 0.05);
}

TEST(StableDt, AdvectiveBound)
{
    // h = 4 / 80 = 0.05
    auto m = box_model(80, {2.0, 0.0});
    const FlowState s = initial_state(*m, ScalarField(m->domain), {});
    ASSERT_DOUBLE_EQ(m->domain->h(), 0.05);
    EXPECT_DOUBLE_EQ(stable_dt(s, 0.0, 1.0), 0.0125);
}

TEST(StableDt, DiffusiveBound)
{
    auto m = box_model(80, {0.0, 0.0});
    const FlowState s = initial_state(*m, ScalarField(m->domain), {});
    EXPECT_DOUBLE_EQ(stable_dt(s, 0.01, 1.0), 0.03125);
    EXPECT_DOUBLE_EQ(stable_dt(s, 0.01, 0.02), 0.02);
    auto fast = box_model(80, {4.0, 0.0});
    const FlowState f = initial_state(*fast, ScalarField(fast->domain), {});
    EXPECT_DOUBLE_EQ(stable_dt(f, 0.01, 1.0), 0.00625);
}

TEST(ViscousStep, ZeroDataStaysZero)
{
    auto m = make_flow_model(zero_scenario(), 64);
    FlowState s = initial_state(*m, ScalarField(m->domain), {0.0, 0.0});
    for (int k = 0; k < 10; ++k)
        s = viscous_step(*m, s, 1e-3, stable_dt(s, 1e-3, 0.05));
    EXPECT_EQ(max_abs(s.omega), 0.0);
    EXPECT_EQ(s.circ.C[0], 0.0);
    EXPECT_EQ(s.circ.C[1], 0.0);
}

TEST(ViscousStep, ConstantStateIsPreserved)
{
    const double c = 0.7;
    auto m = make_flow_model(constant_scenario(c), 64);
    FlowState s = initial_state(*m, ScalarField(m->domain, c), {0.5, -0.3});
    const double h = m->domain->h();
    for (int k = 0; k < 20; ++k) {
        const double dt = stable_dt(s, 1e-3, 0.05);
        s = viscous_step(*m, s, 1e-3, dt);
        double dev = 0.0;
        for (double w : s.omega.v)
            dev = std::max(dev, std::abs(w - c));
        EXPECT_LE(dev, (k + 1) * dt * h) << "step " << k;
    }
}

TEST(ViscousStep, MassLedgerBalances)
{
    Scenario sc = reference_scenario();
    for (int n : {64, 128}) {
        auto m = make_flow_model(sc, n);
        const RunRecord rec = run_scenario(sc, 2e-3, 0.5, m);
        ASSERT_FALSE(rec.failed) << rec.failure;
        const double h = m->domain->h();
        double worst = 0.0, scale = 0.0;
        for (std::size_t k = 1; k < rec.ledger.size(); ++k) {
            const auto& a = rec.ledger[k - 1];
            const auto& b = rec.ledger[k];
            const double dt = b.t - a.t;
            const double lhs = (b.mass - a.mass) / dt;
            const double rhs = 0.5 * (a.inflow_rate - a.outflow_rate + b.inflow_rate - b.outflow_rate);
            worst = std::max(worst, std::abs(lhs - rhs));
            scale = std::max({scale, std::abs(a.inflow_rate), std::abs(a.outflow_rate)});
        }
        EXPECT_LE(worst, 0.05 * scale + 2.0 * (h + rec.dt_history.front())) << "grid " << n;
    }
}

TEST(ViscousStep, OversizedStepIsRejected)
{
    auto m = make_flow_model(reference_scenario(), 64);
    const Scenario sc = reference_scenario();
    const FlowState s = initial_state(*m, make_field(m->domain, [&](Vec2 p) { return sc.initial(p); }), sc.circulation);
    EXPECT_THROW(viscous_step(*m, s, 1e-3, 10.0 * stable_dt(s, 1e-3, 1.0)), CFLViolation);
    EXPECT_THROW(viscous_step(*m, s, 0.0, 1e-3), std::exception);
}

TEST(SemiLagrangianStep, ConstantStateIsExact)
{
    const double c = 0.7;
    auto m = make_flow_model(constant_scenario(c), 64);
    FlowState s = initial_state(*m, ScalarField(m->domain, c), {0.5, -0.3});
    for (int k = 0; k < 20; ++k)
        s = semi_lagrangian_step(*m, s, stable_dt(s, 0.0, 0.05));
    for (double w : s.omega.v)
        ASSERT_NEAR(w, c, 1e-12);
}

TEST(SemiLagrangianStep, RigidTranslationIsSecondOrder)
{
    std::vector<double> err;
    for (int n : {64, 128}) {
        auto m = box_model(n, {1.0, 0.0});
        const Vec2 c{-0.5, 0.1};
        FlowState s = initial_state(*m, make_field(m->domain, [&](Vec2 p) { return bump(p, c); }), {});
        const double dt = 0.5 * m->domain->h();
        s = semi_lagrangian_step(*m, s, dt);
        const ScalarField exact = make_field(m->domain, [&](Vec2 p) { return bump(p, c + Vec2{dt, 0.0}); });
        double e = 0.0;
        for (int k = 0; k < s.omega.size(); ++k)
            e += std::pow(s.omega[k] - exact[k], 2) * m->domain->h() * m->domain->h();
        err.push_back(std::sqrt(e));
    }
    EXPECT_GE(err[0] / err[1], 3.0);
}

TEST(SemiLagrangianStep, MaximumPrinciple)
{
    const Scenario sc = reference_scenario();
    const RunRecord rec = run_scenario(sc, 0.0, 1.0, make_flow_model(sc, 64));
    ASSERT_FALSE(rec.failed) << rec.failure;
    double bound = max_abs(rec.steps.front().omega);
    for (const auto& st : rec.steps)
        for (std::size_t i = 0; i < st.omega_b.size(); ++i)
            if (rec.domain()->component(static_cast<int>(i)).kind == ComponentKind::Source)
                for (double w : st.omega_b[i].values)
                    bound = std::max(bound, std::abs(w));
    for (const auto& st : rec.steps)
        EXPECT_LE(max_abs(st.omega), bound + 1e-12) << "t = " << st.t;
}

TEST(TraceOutflow, ConstantFieldGivesConstantTraces)
{
    auto m = make_flow_model(constant_scenario(0.4), 64);
    const FlowState s = initial_state(*m, ScalarField(m->domain, 0.4), {0.0, 0.0});
    const auto traces = trace_outflow(s);
    ASSERT_EQ(traces.size(), 1u);
    EXPECT_EQ(m->domain->component(traces[0].component).kind, ComponentKind::Sink);
    for (double w : traces[0].values)
        EXPECT_NEAR(w, 0.4, 1e-12);
}

TEST(RunScenario, ZeroDataGivesZeroLedgers)
{
    const Scenario sc = zero_scenario();
    for (double nu : {2e-3, 0.0}) {
        const RunRecord rec = run_scenario(sc, nu, 0.5, make_flow_model(sc, 64));
        ASSERT_FALSE(rec.failed) << rec.failure;
        for (const auto& row : rec.ledger) {
            EXPECT_EQ(row.mass, 0.0);
            EXPECT_EQ(row.inflow_rate, 0.0);
            EXPECT_EQ(row.outflow_rate, 0.0);
            EXPECT_EQ(row.identity_residual, 0.0);
        }
    }
}

TEST(RunScenario, IsReproducible)
{
    const Scenario sc = reference_scenario();
    auto m = make_flow_model(sc, 64);
    const RunRecord a = run_scenario(sc, 2e-3, 0.3, m);
    const RunRecord b = run_scenario(sc, 2e-3, 0.3, m);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    EXPECT_EQ(a.steps.back().omega.v, b.steps.back().omega.v);
}

TEST(Adjoint, ZeroDataGivesZero)
{
    const Scenario sc = reference_scenario();
    auto m = make_flow_model(sc, 64);
    const RunRecord fwd = run_scenario(sc, 2e-3, 0.3, m);
    for (double nu : {0.0, 2e-3}) {
        AdjointData a;
        a.chi = [](Vec2, double) { return 0.0; };
        a.psi = [](int, double, double) { return 0.0; };
        a.phi_T = ScalarField(m->domain);
        a.nu = nu;
        const AdjointHistory hist = adjoint_solve(fwd, a);
        ASSERT_EQ(hist.t.size(), fwd.steps.size());
        for (const auto& phi : hist.phi)
            EXPECT_EQ(max_abs(phi), 0.0);
        for (const auto& level : hist.phi_plus)
            for (const auto& tr : level)
                for (double w : tr.values)
                    EXPECT_EQ(w, 0.0);
    }
}

TEST(Adjoint, UnitSourceAtRestIntegratesTime)
{
    auto m = box_model(32, {0.0, 0.0});
    RunOptions o;
    o.fixed_dt = 0.1;
    const RunRecord fwd = run_flow(m, ScalarField(m->domain), {}, 0.0, 1.0, o);
    ASSERT_FALSE(fwd.failed) << fwd.failure;
    AdjointData a;
    a.chi = [](Vec2, double) { return 1.0; };
    a.psi = [](int, double, double) { return 0.0; };
    a.phi_T = ScalarField(m->domain);
    const AdjointHistory hist = adjoint_solve(fwd, a);
    for (std::size_t k = 0; k < hist.t.size(); ++k)
        for (double w : hist.phi[k].v)
            ASSERT_NEAR(w, 1.0 - hist.t[k], 1e-12) << "t = " << hist.t[k];
}
