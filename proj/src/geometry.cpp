#include "vortlab/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace vortlab {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

Curve Curve::circle(Vec2 center, double radius, bool fluid_outside)
{
    Curve c;
    c.is_circle_ = true;
    c.center_ = center;
    c.radius_ = radius;
    c.fluid_outside_ = fluid_outside;
    return c;
}

Curve Curve::rectangle(Vec2 lo, Vec2 hi)
{
    Curve c;
    c.is_circle_ = false;
    c.fluid_outside_ = false;
    c.lo_ = lo;
    c.hi_ = hi;
    return c;
}

double Curve::signed_distance(Vec2 p) const
{
    if (is_circle_) {
        const double d = norm(p - center_) - radius_;
        return fluid_outside_ ? d : -d;
    }
    const double dx = std::max(lo_.x - p.x, p.x - hi_.x);
    const double dy = std::max(lo_.y - p.y, p.y - hi_.y);
    if (dx <= 0.0 && dy <= 0.0)
        return -std::max(dx, dy);
    return -std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
}

Vec2 Curve::closest_point(Vec2 p) const
{
    if (is_circle_) {
        Vec2 d = p - center_;
        double r = norm(d);
        if (r < 1e-300)
            d = {1.0, 0.0}, r = 1.0;
        return center_ + (radius_ / r) * d;
    }
    const bool inside = p.x >= lo_.x && p.x <= hi_.x && p.y >= lo_.y && p.y <= hi_.y;
    if (!inside)
        return {std::clamp(p.x, lo_.x, hi_.x), std::clamp(p.y, lo_.y, hi_.y)};
    const double dl = p.x - lo_.x, dr = hi_.x - p.x, db = p.y - lo_.y, dt = hi_.y - p.y;
    const double m = std::min({dl, dr, db, dt});
    if (m == dl) return {lo_.x, p.y};
    if (m == dr) return {hi_.x, p.y};
    if (m == db) return {p.x, lo_.y};
    return {p.x, hi_.y};
}

double Curve::perimeter() const
{
    if (is_circle_)
        return two_pi * radius_;
    return 2.0 * ((hi_.x - lo_.x) + (hi_.y - lo_.y));
}

// Rectangles are parametrized counterclockwise starting at lo.
Vec2 Curve::point_at(double s) const
{
    const double L = perimeter();
    s = std::fmod(s, L);
    if (s < 0.0) s += L;
    if (is_circle_) {
        const double a = s / radius_;
        return center_ + Vec2{radius_ * std::cos(a), radius_ * std::sin(a)};
    }
    const double w = hi_.x - lo_.x, h = hi_.y - lo_.y;
    if (s < w) return {lo_.x + s, lo_.y};
    if (s < w + h) return {hi_.x, lo_.y + (s - w)};
    if (s < 2 * w + h) return {hi_.x - (s - w - h), hi_.y};
    return {lo_.x, hi_.y - (s - 2 * w - h)};
}

double Curve::arclength_of(Vec2 q) const
{
    if (is_circle_) {
        double a = std::atan2(q.y - center_.y, q.x - center_.x);
        if (a < 0.0) a += two_pi;
        return a * radius_;
    }
    const double w = hi_.x - lo_.x, h = hi_.y - lo_.y;
    const double dl = std::abs(q.x - lo_.x), dr = std::abs(q.x - hi_.x);
    const double db = std::abs(q.y - lo_.y), dt = std::abs(q.y - hi_.y);
    const double m = std::min({dl, dr, db, dt});
    if (m == db) return std::clamp(q.x - lo_.x, 0.0, w);
    if (m == dr) return w + std::clamp(q.y - lo_.y, 0.0, h);
    if (m == dt) return w + h + std::clamp(hi_.x - q.x, 0.0, w);
    return 2 * w + h + std::clamp(hi_.y - q.y, 0.0, h);
}

Vec2 Curve::tangent_at(double s) const
{
    if (is_circle_) {
        const double a = s / radius_;
        return {-std::sin(a), std::cos(a)};
    }
    const double L = perimeter();
    s = std::fmod(s, L);
    if (s < 0.0) s += L;
    const double w = hi_.x - lo_.x, h = hi_.y - lo_.y;
    if (s < w) return {1.0, 0.0};
    if (s < w + h) return {0.0, 1.0};
    if (s < 2 * w + h) return {-1.0, 0.0};
    return {0.0, -1.0};
}

Vec2 Curve::fluid_normal_at(double s) const
{
    // For a counterclockwise tangent the outward normal of the enclosed
    // region is tangent rotated clockwise.
    const Vec2 t = tangent_at(s);
    const Vec2 out_of_region{t.y, -t.x};
    if (is_circle_ && fluid_outside_)
        return -out_of_region;
    return out_of_region;
}

std::optional<double> Curve::exit_parameter(Vec2 a, Vec2 b) const
{
    const Vec2 d = b - a;
    if (is_circle_) {
        const Vec2 f = a - center_;
        const double A = dot(d, d);
        const double B = 2.0 * dot(f, d);
        const double C = dot(f, f) - radius_ * radius_;
        const double disc = B * B - 4 * A * C;
        if (A <= 0.0 || disc < 0.0)
            return std::nullopt;
        const double sq = std::sqrt(disc);
        // Stable roots of the quadratic.
        const double q = -0.5 * (B + std::copysign(sq, B));
        double t1 = q / A, t2 = (q != 0.0) ? C / q : t1;
        if (t1 > t2) std::swap(t1, t2);
        // Fluid outside: leaving means entering the disk at the smaller root.
        // Fluid inside: leaving means crossing out at the larger root.
        const double t = fluid_outside_ ? t1 : t2;
        if (t >= 0.0 && t <= 1.0)
            return t;
        return std::nullopt;
    }
    double best = 2.0;
    auto consider = [&](double t) {
        if (t >= 0.0 && t <= 1.0)
            best = std::min(best, t);
    };
    if (d.x > 0.0 && b.x > hi_.x) consider((hi_.x - a.x) / d.x);
    if (d.x < 0.0 && b.x < lo_.x) consider((lo_.x - a.x) / d.x);
    if (d.y > 0.0 && b.y > hi_.y) consider((hi_.y - a.y) / d.y);
    if (d.y < 0.0 && b.y < lo_.y) consider((lo_.y - a.y) / d.y);
    if (best <= 1.0)
        return best;
    return std::nullopt;
}

} // namespace vortlab
