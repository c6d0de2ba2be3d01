#include "vortlab/domain.hpp"
#include "vortlab/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace vortlab;

namespace {

constexpr double pi = std::numbers::pi;

DomainSpec two_holes(int n)
{
    DomainSpec s;
    s.outer = Disk{{0.0, 0.0}, 3.0};
    s.holes = {{{-1.5, 0.0}, 0.5, HoleKind::Source}, {{1.5, 0.0}, 0.5, HoleKind::Sink}};
    s.grid_n = n;
    return s;
}

} // namespace

TEST(Domain, ReferenceGeometryHasThreeComponents)
{
    auto d = build_domain(two_holes(128));
    EXPECT_EQ(d->num_holes(), 2);
    EXPECT_EQ(d->num_components(), 3);
    EXPECT_EQ(d->component(0).kind, ComponentKind::Source);
    EXPECT_EQ(d->component(1).kind, ComponentKind::Sink);
    EXPECT_EQ(d->outer().kind, ComponentKind::Outer);
}

TEST(Domain, OverlappingHolesAreRejected)
{
    DomainSpec s = two_holes(64);
    s.holes[0].center = {-0.4, 0.0};
    s.holes[1].center = {0.4, 0.0};
    EXPECT_THROW(build_domain(s), GeometryError);
}

TEST(Domain, HoleTouchingOuterBoundaryIsRejected)
{
    DomainSpec s = two_holes(64);
    s.holes[0].center = {-2.5, 0.0};
    EXPECT_THROW(build_domain(s), GeometryError);
}

TEST(Domain, FluidCellCountMatchesArea)
{
    auto d = build_domain(two_holes(128));
    const double area = pi * 9.0 - 2.0 * pi * 0.25;
    const double cells = area / (d->h() * d->h());
    EXPECT_NEAR(d->num_fluid() / cells, 1.0, 0.02);
}

TEST(Domain, QuadratureWeightsSumToPerimeter)
{
    auto d = build_domain(two_holes(64));
    for (int k = 0; k < d->num_components(); ++k) {
        const auto& c = d->component(k);
        double w = 0.0;
        for (const auto& q : c.quad)
            w += q.weight;
        EXPECT_NEAR(w, 2.0 * pi * c.curve.radius(), 1e-10);
        EXPECT_GE(c.quad.size(), std::max<std::size_t>(64, std::size_t(c.curve.perimeter() / d->h())));
    }
}

TEST(Domain, RectangleQuadratureWeightsSumToPerimeter)
{
    DomainSpec s;
    s.outer = Rectangle{{0.0, 0.0}, {2.0, 1.0}};
    s.grid_n = 32;
    auto d = build_domain(s, {.require_source_and_sink = false});
    double w = 0.0;
    for (const auto& q : d->outer().quad)
        w += q.weight;
    EXPECT_NEAR(w, 6.0, 1e-10);
}

TEST(Domain, BoundaryIntegralsOnACircle)
{
    auto d = build_domain(two_holes(64));
    const Vec2 c{-1.5, 0.0};
    auto one = make_trace(*d, 0, [](const QuadPoint&) { return 1.0; });
    EXPECT_NEAR(boundary_integral(*d, one) / pi, 1.0, 1e-10);
    auto odd = make_trace(*d, 0, [&](const QuadPoint& q) { return (q.x.x - c.x) / 0.5; });
    EXPECT_NEAR(boundary_integral(*d, odd), 0.0, 1e-10);
    // Flux of the point-source field through the circle around it.
    auto flux = make_trace(*d, 0, [&](const QuadPoint& q) {
        const Vec2 r = q.x - c;
        return std::abs(dot(q.normal, r)) / dot(r, r);
    });
    EXPECT_NEAR(boundary_integral(*d, flux), 2.0 * pi, 1e-10);
}

TEST(Domain, NormalsLeaveTheFluidAndTangentsKeepItOnTheLeft)
{
    auto d = build_domain(two_holes(64));
    for (int k = 0; k < d->num_components(); ++k) {
        const auto& c = d->component(k);
        for (const auto& q : c.quad) {
            EXPECT_LT(d->signed_distance(q.x + 0.01 * q.normal), 0.0);
            const Vec2 r = q.x - c.curve.center();
            const double turn = r.x * q.tangent.y - r.y * q.tangent.x;
            if (c.kind == ComponentKind::Outer)
                EXPECT_GT(turn, 0.0);
            else
                EXPECT_LT(turn, 0.0);
            EXPECT_GT(d->signed_distance(q.x + 0.01 * perp(q.tangent)), 0.0);
        }
    }
}

TEST(Domain, ExtrapolationReproducesConstantsAndLinears)
{
    auto d = build_domain(two_holes(64));
    auto seven = make_field(d, [](Vec2) { return 7.0; });
    auto lin = make_field(d, [](Vec2 p) { return p.x + 2.0 * p.y; });
    for (int k = 0; k < d->num_components(); ++k) {
        auto t7 = sample_to_boundary(seven, k);
        auto tl = sample_to_boundary(lin, k);
        for (std::size_t q = 0; q < t7.values.size(); ++q) {
            EXPECT_NEAR(t7.values[q], 7.0, 1e-12);
            const Vec2 x = d->component(k).quad[q].x;
            EXPECT_NEAR(tl.values[q], x.x + 2.0 * x.y, 1e-9);
        }
    }
}

TEST(Domain, ExtrapolationConvergesForSmoothData)
{
    auto err = [](int n) {
        auto d = build_domain(two_holes(n));
        auto f = make_field(d, [](Vec2 p) { return std::exp(p.x) * std::sin(p.y); });
        double e = 0.0;
        for (int k = 0; k < d->num_components(); ++k) {
            auto t = sample_to_boundary(f, k);
            for (std::size_t q = 0; q < t.values.size(); ++q) {
                const Vec2 x = d->component(k).quad[q].x;
                e = std::max(e, std::abs(t.values[q] - std::exp(x.x) * std::sin(x.y)));
            }
        }
        return e;
    };
    EXPECT_GE(err(64) / err(128), 3.0);
}

TEST(Domain, ClassificationIsDeterministic)
{
    auto a = build_domain(two_holes(64));
    auto b = build_domain(two_holes(64));
    ASSERT_EQ(a->num_fluid(), b->num_fluid());
    for (int k = 0; k < a->num_fluid(); ++k)
        EXPECT_EQ(a->cell_ij(k), b->cell_ij(k));
}

TEST(Domain, RefinementKeepsComponentOrder)
{
    auto a = build_domain(two_holes(64));
    auto b = build_domain(two_holes(128));
    ASSERT_EQ(a->num_components(), b->num_components());
    for (int k = 0; k < a->num_components(); ++k)
        EXPECT_EQ(a->component(k).kind, b->component(k).kind);
}

TEST(Domain, RawFieldRoundTrip)
{
    auto d = build_domain(two_holes(32));
    auto f = make_field(d, [](Vec2 p) { return p.x * p.y; });
    const std::string path = ::testing::TempDir() + "/field.f64";
    write_field_raw(path, f);
    auto g = read_field_raw(path, d);
    for (int k = 0; k < f.size(); ++k)
        EXPECT_EQ(f[k], g[k]);
}
