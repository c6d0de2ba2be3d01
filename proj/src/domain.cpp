#include "vortlab/domain.hpp"
#include "vortlab/errors.hpp"
#include "vortlab/local_fit.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace vortlab {

namespace {

constexpr int pad = 3;

std::string fmt_pt(Vec2 p)
{
    std::ostringstream os;
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

void validate(const DomainSpec& spec, double h, const BuildOptions& opts)
{
    if (spec.grid_n < 8)
        throw GeometryError("grid_n must be at least 8");
    const double min_gap = 4.0 * h;
    int sources = 0, sinks = 0;
    for (std::size_t a = 0; a < spec.holes.size(); ++a) {
        const HoleSpec& ha = spec.holes[a];
        if (!(ha.radius > 0.0))
            throw GeometryError("hole " + std::to_string(a) + " has non-positive radius");
        (ha.kind == HoleKind::Source ? sources : sinks)++;
        double gap_outer;
        if (auto* disk = std::get_if<Disk>(&spec.outer))
            gap_outer = disk->radius - norm(ha.center - disk->center) - ha.radius;
        else {
            const auto& r = std::get<Rectangle>(spec.outer);
            gap_outer = std::min({ha.center.x - r.lo.x, r.hi.x - ha.center.x, ha.center.y - r.lo.y,
                                  r.hi.y - ha.center.y}) - ha.radius;
        }
        if (gap_outer <= 0.0)
            throw GeometryError("hole " + std::to_string(a) + " at " + fmt_pt(ha.center) +
                                " is not strictly inside the outer boundary");
        if (gap_outer < min_gap)
            throw GeometryError("hole " + std::to_string(a) + " is closer than 4h to the outer boundary");
        for (std::size_t b = 0; b < a; ++b) {
            const HoleSpec& hb = spec.holes[b];
            const double gap = norm(ha.center - hb.center) - ha.radius - hb.radius;
            if (gap <= 0.0)
                throw GeometryError("holes " + std::to_string(b) + " and " + std::to_string(a) + " overlap");
            if (gap < min_gap)
                throw GeometryError("holes " + std::to_string(b) + " and " + std::to_string(a) +
                                    " are closer than 4h");
        }
    }
    if (opts.require_source_and_sink && (sources == 0 || sinks == 0))
        throw GeometryError("at least one source and one sink are required");
}

std::vector<QuadPoint> make_quadrature(const Curve& c, double h)
{
    std::vector<QuadPoint> q;
    const double L = c.perimeter();
    if (c.is_circle()) {
        const int n = std::max(64, static_cast<int>(std::ceil(L / h)));
        for (int m = 0; m < n; ++m) {
            const double s = L * m / n;
            q.push_back({c.point_at(s), s, L / n, c.fluid_normal_at(s), perp(c.fluid_normal_at(s))});
        }
        return q;
    }
    const double w = c.hi().x - c.lo().x, ht = c.hi().y - c.lo().y;
    const double sides[4] = {w, ht, w, ht};
    double start = 0.0;
    for (double side : sides) {
        const int n = std::max(16, static_cast<int>(std::ceil(side / h)));
        for (int m = 0; m < n; ++m) {
            const double s = start + side * (m + 0.5) / n;
            q.push_back({c.point_at(s), s, side / n, c.fluid_normal_at(s), perp(c.fluid_normal_at(s))});
        }
        start += side;
    }
    return q;
}

} // namespace

double Stencil::apply(std::span<const double> v, double datum) const
{
    double s = datum_weight * datum;
    for (std::size_t k = 0; k < cells.size(); ++k)
        s += weights[k] * v[cells[k]];
    return s;
}

std::pair<double, double> Stencil::range(std::span<const double> v) const
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int c : cells) {
        lo = std::min(lo, v[c]);
        hi = std::max(hi, v[c]);
    }
    return {lo, hi};
}

std::array<int, 2> Domain::locate(Vec2 p) const
{
    return {static_cast<int>(std::floor((p.x - origin_.x) / h_)),
            static_cast<int>(std::floor((p.y - origin_.y) / h_))};
}

double Domain::signed_distance(Vec2 p) const
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& c : components_)
        d = std::min(d, c.curve.signed_distance(p));
    return d;
}

int Domain::nearest_component(Vec2 p) const
{
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& c : components_) {
        const double d = std::abs(c.curve.signed_distance(p));
        if (d < bd)
            bd = d, best = c.id;
    }
    return best;
}

double Domain::area() const
{
    return h_ * h_ * num_fluid();
}

const Stencil* Domain::extension_stencil(int i, int j) const
{
    if (!in_grid(i, j))
        return nullptr;
    const int e = ext_of_[flat(i, j)];
    return e < 0 ? nullptr : &ext_[e];
}

DomainPtr build_domain(const DomainSpec& spec, const BuildOptions& opts)
{
    auto dom = std::shared_ptr<Domain>(new Domain());
    Domain& d = *dom;
    d.spec_ = spec;

    Vec2 lo, hi;
    if (auto* disk = std::get_if<Disk>(&spec.outer)) {
        if (!(disk->radius > 0.0))
            throw GeometryError("outer radius must be positive");
        lo = disk->center - Vec2{disk->radius, disk->radius};
        hi = disk->center + Vec2{disk->radius, disk->radius};
    } else {
        const auto& r = std::get<Rectangle>(spec.outer);
        if (!(r.hi.x > r.lo.x && r.hi.y > r.lo.y))
            throw GeometryError("outer rectangle is empty");
        lo = r.lo;
        hi = r.hi;
    }
    const double ext = std::max(hi.x - lo.x, hi.y - lo.y);
    d.h_ = ext / std::max(spec.grid_n, 1);
    validate(spec, d.h_, opts);

    const int inner_x = static_cast<int>(std::ceil((hi.x - lo.x) / d.h_ - 1e-9));
    const int inner_y = static_cast<int>(std::ceil((hi.y - lo.y) / d.h_ - 1e-9));
    d.nx_ = inner_x + 2 * pad;
    d.ny_ = inner_y + 2 * pad;
    d.origin_ = lo - Vec2{pad * d.h_, pad * d.h_};

    for (std::size_t k = 0; k < spec.holes.size(); ++k) {
        const HoleSpec& hs = spec.holes[k];
        BoundaryComponent c;
        c.id = static_cast<int>(k);
        c.kind = hs.kind == HoleKind::Source ? ComponentKind::Source : ComponentKind::Sink;
        c.curve = Curve::circle(hs.center, hs.radius, true);
        d.components_.push_back(std::move(c));
    }
    {
        BoundaryComponent c;
        c.id = static_cast<int>(spec.holes.size());
        c.kind = ComponentKind::Outer;
        if (auto* disk = std::get_if<Disk>(&spec.outer))
            c.curve = Curve::circle(disk->center, disk->radius, false);
        else
            c.curve = Curve::rectangle(lo, hi);
        d.components_.push_back(std::move(c));
    }
    for (auto& c : d.components_)
        c.quad = make_quadrature(c.curve, d.h_);

    const int N = d.nx_ * d.ny_;
    d.cls_.assign(N, CellClass::Solid);
    d.fid_.assign(N, -1);
    for (int j = 0; j < d.ny_; ++j)
        for (int i = 0; i < d.nx_; ++i)
            if (d.signed_distance(d.cell_center(i, j)) > 0.0) {
                d.fid_[d.flat(i, j)] = static_cast<int>(d.cells_.size());
                d.cells_.push_back(d.flat(i, j));
                d.ij_.push_back({i, j});
                d.cls_[d.flat(i, j)] = CellClass::Fluid;
            }
    if (d.cells_.empty())
        throw GeometryError("no fluid cells at this resolution");

    // Face neighbours and cut links.
    const int nf = d.num_fluid();
    d.nbr_.assign(4 * nf, -1);
    d.cut_of_.assign(4 * nf, -1);
    for (int f = 0; f < nf; ++f) {
        const auto [i, j] = d.ij_[f];
        bool near = false;
        for (int dd = 0; dd < 4; ++dd) {
            const int g = d.fluid_index(i + dir_di[dd], j + dir_dj[dd]);
            if (g >= 0) {
                d.nbr_[4 * f + dd] = g;
                continue;
            }
            near = true;
            const Vec2 a = d.cell_center(i, j);
            const Vec2 b = d.cell_center(i + dir_di[dd], j + dir_dj[dd]);
            double t = 2.0;
            int comp = d.nearest_component(b);
            for (const auto& c : d.components_)
                if (auto tc = c.curve.exit_parameter(a, b); tc && *tc < t)
                    t = *tc, comp = c.id;
            if (t > 1.0)
                t = 1.0;
            CutLink cl;
            cl.cell = f;
            cl.dir = dd;
            cl.theta = std::max(t, 1e-6);
            cl.component = comp;
            cl.point = a + t * (b - a);
            d.cut_of_[4 * f + dd] = static_cast<int>(d.cuts_.size());
            d.cuts_.push_back(cl);
        }
        for (int dj = -1; dj <= 1 && !near; ++dj)
            for (int di = -1; di <= 1; ++di)
                if (d.fluid_index(i + di, j + dj) < 0)
                    near = true;
        if (near)
            d.cls_[d.flat(i, j)] = CellClass::NearBoundary;
    }

    // The fluid must be one connected region at this resolution.
    {
        std::vector<char> seen(nf, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 1;
        while (!q.empty()) {
            const int f = q.front();
            q.pop();
            for (int dd = 0; dd < 4; ++dd) {
                const int g = d.nbr_[4 * f + dd];
                if (g >= 0 && !seen[g]) {
                    seen[g] = 1;
                    ++count;
                    q.push(g);
                }
            }
        }
        if (count != nf)
            throw GeometryError("fluid region is disconnected at grid_n=" + std::to_string(spec.grid_n));
    }

    d.bstencil_.resize(d.components_.size());
    for (const auto& c : d.components_) {
        auto& list = d.bstencil_[c.id];
        list.reserve(c.quad.size());
        for (const auto& qp : c.quad) {
            try {
                list.push_back(local_fit(d, qp.x, qp.x));
            } catch (const ExtrapolationError&) {
                list.emplace_back();
            }
        }
    }

    // Extension band: non-fluid cells within two cells of the fluid.
    d.ext_of_.assign(N, -1);
    for (int j = 0; j < d.ny_; ++j)
        for (int i = 0; i < d.nx_; ++i) {
            if (d.fid_[d.flat(i, j)] >= 0)
                continue;
            bool close = false;
            for (int dj = -2; dj <= 2 && !close; ++dj)
                for (int di = -2; di <= 2; ++di)
                    if (d.fluid_index(i + di, j + dj) >= 0) {
                        close = true;
                        break;
                    }
            if (!close)
                continue;
            const Vec2 x = d.cell_center(i, j);
            const int comp = d.nearest_component(x);
            const Vec2 b = d.components_[comp].curve.closest_point(x);
            try {
                d.ext_.push_back(local_fit(d, b, x));
                d.ext_of_[d.flat(i, j)] = static_cast<int>(d.ext_.size()) - 1;
            } catch (const ExtrapolationError&) {
            }
        }
    return dom;
}

ScalarField::ScalarField(DomainPtr d, double fill) : domain(std::move(d)), v(domain->num_fluid(), fill) {}

VectorField::VectorField(DomainPtr d)
    : domain(std::move(d)), x(domain->num_fluid(), 0.0), y(domain->num_fluid(), 0.0) {}

ScalarField make_field(DomainPtr d, const std::function<double(Vec2)>& fn)
{
    ScalarField f(d);
    for (int k = 0; k < f.size(); ++k)
        f[k] = fn(d->center(k));
    return f;
}

VectorField make_vector_field(DomainPtr d, const std::function<Vec2(Vec2)>& fn)
{
    VectorField f(d);
    for (int k = 0; k < f.size(); ++k)
        f.set(k, fn(d->center(k)));
    return f;
}

BoundaryTrace make_trace(const Domain& d, int component, const std::function<double(const QuadPoint&)>& fn)
{
    BoundaryTrace t;
    t.component = component;
    for (const auto& q : d.component(component).quad)
        t.values.push_back(fn(q));
    return t;
}

double integral(const ScalarField& f)
{
    double s = 0.0;
    for (double x : f.v)
        s += x;
    const double h = f.domain->h();
    return s * h * h;
}

double lp_norm_pow(const ScalarField& f, double q)
{
    double s = 0.0;
    for (double x : f.v)
        s += std::pow(std::abs(x), q);
    const double h = f.domain->h();
    return s * h * h;
}

double max_abs(const ScalarField& f)
{
    double m = 0.0;
    for (double x : f.v)
        m = std::max(m, std::abs(x));
    return m;
}

double boundary_integral(const Domain& d, const BoundaryTrace& t)
{
    const auto& q = d.component(t.component).quad;
    double s = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k)
        s += t.values[k] * q[k].weight;
    return s;
}

BoundaryTrace sample_to_boundary(const ScalarField& f, int component, bool limit)
{
    const Domain& d = *f.domain;
    BoundaryTrace t;
    t.component = component;
    const auto& quad = d.component(component).quad;
    t.values.resize(quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const Stencil& st = d.boundary_stencil(component, static_cast<int>(q));
        if (st.empty())
            throw ExtrapolationError("fewer than 6 fluid cells near boundary component " + std::to_string(component));
        double val = st.apply(f.v);
        if (limit) {
            auto [lo, hi] = st.range(f.v);
            val = std::clamp(val, lo, hi);
        }
        t.values[q] = val;
    }
    return t;
}

double sample_at(const ScalarField& f, Vec2 p, bool limit)
{
    const Stencil st = local_fit(*f.domain, p, p);
    double val = st.apply(f.v);
    if (limit) {
        auto [lo, hi] = st.range(f.v);
        val = std::clamp(val, lo, hi);
    }
    return val;
}

std::vector<double> extend_to_grid(const ScalarField& f, bool limit)
{
    const Domain& d = *f.domain;
    std::vector<double> g(static_cast<std::size_t>(d.nx()) * d.ny(), std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < d.num_fluid(); ++k) {
        auto [i, j] = d.cell_ij(k);
        g[d.flat(i, j)] = f[k];
    }
    for (int j = 0; j < d.ny(); ++j)
        for (int i = 0; i < d.nx(); ++i)
            if (const Stencil* st = d.extension_stencil(i, j)) {
                double val = st->apply(f.v);
                if (limit) {
                    auto [lo, hi] = st->range(f.v);
                    val = std::clamp(val, lo, hi);
                }
                g[d.flat(i, j)] = val;
            }
    return g;
}

double trace_at(const Domain& d, const BoundaryTrace& t, double s)
{
    const auto& quad = d.component(t.component).quad;
    const int n = static_cast<int>(quad.size());
    const double L = d.component(t.component).curve.perimeter();
    s = std::fmod(s, L);
    if (s < 0.0)
        s += L;
    // Nodes are not exactly uniform on rectangles (per-side spacing), so
    // locate the bracketing interval and use local 4-point Lagrange.
    int k = static_cast<int>(std::upper_bound(quad.begin(), quad.end(), s,
                                              [](double v, const QuadPoint& q) { return v < q.s; }) -
                             quad.begin()) - 1;
    auto node = [&](int m, double& sm) {
        const int w = ((m % n) + n) % n;
        const int wraps = (m - w) / n;
        sm = quad[w].s + wraps * L;
        return t.values[w];
    };
    double xs[4], ys[4];
    for (int a = 0; a < 4; ++a)
        ys[a] = node(k - 1 + a, xs[a]);
    double val = 0.0;
    for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a)
                l *= (s - xs[b]) / (xs[a] - xs[b]);
        val += l * ys[a];
    }
    return val;
}

void write_field_csv(const std::string& path, const ScalarField& f)
{
    std::ofstream os(path);
    if (!os)
        throw Error("cannot open " + path);
    os.precision(17);
    os << "x,y,value\n";
    for (int k = 0; k < f.size(); ++k) {
        const Vec2 c = f.domain->center(k);
        os << c.x << ',' << c.y << ',' << f[k] << '\n';
    }
}

void write_vector_csv(const std::string& path, const VectorField& f)
{
    std::ofstream os(path);
    if (!os)
        throw Error("cannot open " + path);
    os.precision(17);
    os << "x,y,vx,vy\n";
    for (int k = 0; k < f.size(); ++k) {
        const Vec2 c = f.domain->center(k);
        os << c.x << ',' << c.y << ',' << f.x[k] << ',' << f.y[k] << '\n';
    }
}

void write_field_raw(const std::string& path, const ScalarField& f)
{
    const Domain& d = *f.domain;
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw Error("cannot open " + path);
    std::ostringstream hdr;
    hdr.precision(17);
    hdr << "vortlab-f64 nx=" << d.nx() << " ny=" << d.ny() << " h=" << d.h() << " origin=" << d.origin().x << ','
        << d.origin().y << '\n';
    os << hdr.str();
    std::vector<double> g(static_cast<std::size_t>(d.nx()) * d.ny(), std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < f.size(); ++k) {
        auto [i, j] = d.cell_ij(k);
        g[d.flat(i, j)] = f[k];
    }
    static_assert(std::endian::native == std::endian::little, "raw export assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(g.data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
}

ScalarField read_field_raw(const std::string& path, DomainPtr d)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error("cannot open " + path);
    std::string header;
    std::getline(is, header);
    int nx = 0, ny = 0;
    if (std::sscanf(header.c_str(), "vortlab-f64 nx=%d ny=%d", &nx, &ny) != 2 || nx != d->nx() || ny != d->ny())
        throw Error("raw field header does not match the domain: " + header);
    std::vector<double> g(static_cast<std::size_t>(nx) * ny);
    is.read(reinterpret_cast<char*>(g.data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
    if (!is)
        throw Error("truncated raw field " + path);
    ScalarField f(d);
    for (int k = 0; k < f.size(); ++k) {
        auto [i, j] = d->cell_ij(k);
        f[k] = g[d->flat(i, j)];
    }
    return f;
}

} // namespace vortlab
