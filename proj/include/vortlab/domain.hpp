#pragma once

#include "vortlab/geometry.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vortlab {

enum class CellClass { Fluid, Solid, NearBoundary };

/// Axis directions of the four face neighbours: +x, -x, +y, -y.
enum Dir : int { East = 0, West = 1, North = 2, South = 3 };
inline constexpr std::array<int, 4> dir_di{1, -1, 0, 0};
inline constexpr std::array<int, 4> dir_dj{0, 0, 1, -1};
inline constexpr std::array<Vec2, 4> dir_vec{Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1}, Vec2{0, -1}};

/// Link from a fluid cell centre to a solid neighbour, cut by the boundary.
struct CutLink {
    int cell = -1;      ///< fluid index
    int dir = East;
    double theta = 1.0; ///< crossing distance in units of h
    int component = 0;
    Vec2 point;         ///< crossing point
};

/// Linear functional on fluid-cell values, plus an optional constraint datum.
struct Stencil {
    std::vector<int> cells; ///< fluid indices
    std::vector<double> weights;
    double datum_weight = 0.0;

    bool empty() const { return cells.empty(); }
    double apply(std::span<const double> v, double datum = 0.0) const;
    /// Min and max of the data the stencil reads.
    std::pair<double, double> range(std::span<const double> v) const;
};

class Domain {
public:
    const DomainSpec& spec() const { return spec_; }
    double h() const { return h_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    Vec2 origin() const { return origin_; } ///< lower-left corner of cell (0, 0)
    int grid_n() const { return spec_.grid_n; }

    int flat(int i, int j) const { return j * nx_ + i; }
    bool in_grid(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
    Vec2 cell_center(int i, int j) const { return {origin_.x + (i + 0.5) * h_, origin_.y + (j + 0.5) * h_}; }
    CellClass cell_class(int i, int j) const { return cls_[flat(i, j)]; }
    /// Fluid index of cell (i, j), or -1.
    int fluid_index(int i, int j) const { return in_grid(i, j) ? fid_[flat(i, j)] : -1; }
    int num_fluid() const { return static_cast<int>(cells_.size()); }
    std::array<int, 2> cell_ij(int fluid) const { return ij_[fluid]; }
    Vec2 center(int fluid) const { auto [i, j] = ij_[fluid]; return cell_center(i, j); }
    /// Fluid index of the neighbour in direction d, or -1 when the link is cut.
    int neighbor(int fluid, int d) const { return nbr_[4 * fluid + d]; }
    /// Cut link index of (fluid, d), or -1 when the neighbour is fluid.
    int cut_index(int fluid, int d) const { return cut_of_[4 * fluid + d]; }
    const std::vector<CutLink>& cut_links() const { return cuts_; }
    /// Cell containing p, as (i, j); may lie outside the grid.
    std::array<int, 2> locate(Vec2 p) const;

    int num_holes() const { return static_cast<int>(spec_.holes.size()); }
    int num_components() const { return static_cast<int>(components_.size()); }
    /// Holes come first in DomainSpec order, the outer boundary is last.
    const BoundaryComponent& component(int k) const { return components_[k]; }
    const BoundaryComponent& outer() const { return components_.back(); }
    int outer_id() const { return num_components() - 1; }

    /// Distance to the nearest boundary, positive inside the fluid.
    double signed_distance(Vec2 p) const;
    int nearest_component(Vec2 p) const;
    bool contains(Vec2 p) const { return signed_distance(p) > 0.0; }
    double area() const; ///< fluid-cell area h^2 * count

    /// Extrapolation stencil for quadrature node q of component k.
    const Stencil& boundary_stencil(int k, int q) const { return bstencil_[k][q]; }
    /// Extension stencil of a non-fluid cell in the band around the fluid, or nullptr.
    const Stencil* extension_stencil(int i, int j) const;

private:
    friend std::shared_ptr<const Domain> build_domain(const DomainSpec&, const BuildOptions&);

    DomainSpec spec_;
    double h_ = 0.0;
    int nx_ = 0, ny_ = 0;
    Vec2 origin_;
    std::vector<CellClass> cls_;
    std::vector<int> fid_;
    std::vector<int> cells_;
    std::vector<std::array<int, 2>> ij_;
    std::vector<int> nbr_;
    std::vector<int> cut_of_;
    std::vector<CutLink> cuts_;
    std::vector<BoundaryComponent> components_;
    std::vector<std::vector<Stencil>> bstencil_;
    std::vector<int> ext_of_;
    std::vector<Stencil> ext_;
};

using DomainPtr = std::shared_ptr<const Domain>;

/// Classify cells, set up quadrature and extrapolation stencils.
/// Throws GeometryError for overlapping or unresolved geometry.
DomainPtr build_domain(const DomainSpec& spec, const BuildOptions& opts = {});

/// Cell-centred scalar on the fluid cells.
struct ScalarField {
    DomainPtr domain;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(DomainPtr d, double fill = 0.0);
    double& operator[](int k) { return v[k]; }
    double operator[](int k) const { return v[k]; }
    int size() const { return static_cast<int>(v.size()); }
};

struct VectorField {
    DomainPtr domain;
    std::vector<double> x, y;

    VectorField() = default;
    explicit VectorField(DomainPtr d);
    Vec2 at(int k) const { return {x[k], y[k]}; }
    void set(int k, Vec2 a) { x[k] = a.x; y[k] = a.y; }
    int size() const { return static_cast<int>(x.size()); }
};

/// Values at the quadrature nodes of one boundary component.
struct BoundaryTrace {
    int component = 0;
    std::vector<double> values;
};

ScalarField make_field(DomainPtr d, const std::function<double(Vec2)>& f);
VectorField make_vector_field(DomainPtr d, const std::function<Vec2(Vec2)>& f);
BoundaryTrace make_trace(const Domain& d, int component, const std::function<double(const QuadPoint&)>& f);

double integral(const ScalarField& f);
double lp_norm_pow(const ScalarField& f, double q); ///< sum |f|^q h^2
double max_abs(const ScalarField& f);

/// Sum of value * weight over the component's quadrature.
double boundary_integral(const Domain& d, const BoundaryTrace& t);

/// One-sided biquadratic least-squares extrapolation onto the quadrature
/// nodes. With `limit`, values are clipped to the range of the data read.
BoundaryTrace sample_to_boundary(const ScalarField& f, int component, bool limit = false);

/// Same extrapolation at an arbitrary point in or near the fluid.
double sample_at(const ScalarField& f, Vec2 p, bool limit = false);

/// Fill the extension band around the fluid; returns a grid-sized array
/// (nx * ny) with NaN outside fluid and band.
std::vector<double> extend_to_grid(const ScalarField& f, bool limit = false);

/// Periodic cubic interpolation of a trace at arclength s.
double trace_at(const Domain& d, const BoundaryTrace& t, double s);

void write_field_csv(const std::string& path, const ScalarField& f);
void write_vector_csv(const std::string& path, const VectorField& f);
/// Text header line followed by nx*ny little-endian doubles (NaN off the fluid).
void write_field_raw(const std::string& path, const ScalarField& f);
ScalarField read_field_raw(const std::string& path, DomainPtr d);

} // namespace vortlab
