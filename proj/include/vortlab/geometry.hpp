#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace vortlab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
/// Counterclockwise rotation by a right angle: (a, b) -> (-b, a).
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

enum class HoleKind { Source, Sink };
enum class ComponentKind { Source, Sink, Outer };

struct Disk {
    Vec2 center;
    double radius = 1.0;
};

/// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Rectangle {
    Vec2 lo;
    Vec2 hi;
};

using OuterShape = std::variant<Disk, Rectangle>;

struct HoleSpec {
    Vec2 center;
    double radius = 0.1;
    HoleKind kind = HoleKind::Source;
};

struct DomainSpec {
    OuterShape outer = Disk{};
    std::vector<HoleSpec> holes;
    int grid_n = 64; ///< cells across the longest side of the bounding box
};

struct BuildOptions {
    /// Test domains (annulus, hole-free boxes) may lack one of the two kinds.
    bool require_source_and_sink = true;
};

/// One node of the arclength-uniform trapezoid rule on a boundary component.
struct QuadPoint {
    Vec2 x;
    double s = 0.0;      ///< arclength from the component's start point
    double weight = 0.0; ///< ds
    Vec2 normal;         ///< unit normal leaving the fluid
    Vec2 tangent;        ///< unit tangent with the fluid on its left: clockwise around holes
};

/// Closed boundary curve: a circle (hole or outer disk) or the outer rectangle.
class Curve {
public:
    static Curve circle(Vec2 center, double radius, bool fluid_outside);
    static Curve rectangle(Vec2 lo, Vec2 hi);

    /// Distance to the curve, positive on the fluid side.
    double signed_distance(Vec2 p) const;
    Vec2 closest_point(Vec2 p) const;
    double perimeter() const;
    Vec2 point_at(double s) const;
    double arclength_of(Vec2 on_curve) const;
    Vec2 fluid_normal_at(double s) const; ///< leaves the fluid
    Vec2 tangent_at(double s) const;      ///< counterclockwise
    /// Smallest t in [0,1] at which a + t(b - a) leaves the fluid side.
    std::optional<double> exit_parameter(Vec2 a, Vec2 b) const;
    bool is_circle() const { return is_circle_; }
    Vec2 center() const { return center_; }
    double radius() const { return radius_; }
    Vec2 lo() const { return lo_; }
    Vec2 hi() const { return hi_; }

private:
    bool is_circle_ = true;
    bool fluid_outside_ = true;
    Vec2 center_;
    double radius_ = 0.0;
    Vec2 lo_, hi_;
};

struct BoundaryComponent {
    int id = 0;
    ComponentKind kind = ComponentKind::Outer;
    Curve curve = Curve::circle({}, 1.0, false);
    std::vector<QuadPoint> quad;
};

} // namespace vortlab
