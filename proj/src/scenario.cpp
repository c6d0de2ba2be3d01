#include "vortlab/scenario.hpp"
#include "vortlab/errors.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <variant>

namespace vortlab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// ---- minimal TOML subset: tables, arrays of tables, key = value with
// numbers, strings, booleans and flat arrays ----

struct Value;
struct Table {
    std::map<std::string, Value> entries;
    std::map<std::string, int> lines;
    int line = 0;
};
using Array = std::vector<Value>;
using TableList = std::vector<std::shared_ptr<Table>>;

struct Value {
    std::variant<double, std::string, bool, Array, std::shared_ptr<Table>, TableList> v;
};

std::string trim(const std::string& s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& s)
{
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"')
            in_str = !in_str;
        else if (s[i] == '#' && !in_str)
            return s.substr(0, i);
    }
    return s;
}

std::vector<std::string> split_dotted(const std::string& s, int line)
{
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string p;
    while (std::getline(ss, p, '.')) {
        p = trim(p);
        if (p.empty())
            throw ParseError(line, s, "empty name segment");
        parts.push_back(p);
    }
    return parts;
}

Value parse_scalar(const std::string& raw, int line, const std::string& key)
{
    const std::string t = trim(raw);
    if (t.empty())
        throw ParseError(line, key, "missing value");
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw ParseError(line, key, "unterminated string");
        return Value{t.substr(1, t.size() - 2)};
    }
    if (t == "true")
        return Value{true};
    if (t == "false")
        return Value{false};
    try {
        std::size_t pos = 0;
        const double d = std::stod(t, &pos);
        if (pos != t.size())
            throw ParseError(line, key, "malformed number '" + t + "'");
        return Value{d};
    } catch (const std::invalid_argument&) {
        throw ParseError(line, key, "malformed value '" + t + "'");
    } catch (const std::out_of_range&) {
        throw ParseError(line, key, "number out of range '" + t + "'");
    }
}

Value parse_value(const std::string& raw, int line, const std::string& key)
{
    const std::string t = trim(raw);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw ParseError(line, key, "unterminated array");
        Array a;
        const std::string body = trim(t.substr(1, t.size() - 2));
        if (!body.empty()) {
            std::stringstream ss(body);
            std::string item;
            while (std::getline(ss, item, ','))
                a.push_back(parse_scalar(item, line, key));
        }
        return Value{a};
    }
    return parse_scalar(t, line, key);
}

std::shared_ptr<Table> parse_document(const std::string& text)
{
    auto root = std::make_shared<Table>();
    std::shared_ptr<Table> cur = root;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty())
            continue;
        if (s.front() == '[') {
            const bool list = s.rfind("[[", 0) == 0;
            const std::size_t open = list ? 2 : 1;
            if (s.size() < 2 * open + 1 || s.substr(s.size() - open) != std::string(open, ']'))
                throw ParseError(line, s, "malformed table header");
            const auto path = split_dotted(s.substr(open, s.size() - 2 * open), line);
            std::shared_ptr<Table> t = root;
            for (std::size_t k = 0; k + 1 < path.size(); ++k) {
                auto it = t->entries.find(path[k]);
                if (it == t->entries.end()) {
                    auto sub = std::make_shared<Table>();
                    sub->line = line;
                    t->entries[path[k]] = Value{sub};
                    t = sub;
                } else if (auto* tp = std::get_if<std::shared_ptr<Table>>(&it->second.v)) {
                    t = *tp;
                } else if (auto* tl = std::get_if<TableList>(&it->second.v); tl && !tl->empty()) {
                    t = tl->back();
                } else {
                    throw ParseError(line, path[k], "not a table");
                }
            }
            const std::string& leaf = path.back();
            auto sub = std::make_shared<Table>();
            sub->line = line;
            auto it = t->entries.find(leaf);
            if (list) {
                if (it == t->entries.end())
                    t->entries[leaf] = Value{TableList{sub}};
                else if (auto* tl = std::get_if<TableList>(&it->second.v))
                    tl->push_back(sub);
                else
                    throw ParseError(line, leaf, "redefined as an array of tables");
            } else {
                if (it != t->entries.end())
                    throw ParseError(line, leaf, "table defined twice");
                t->entries[leaf] = Value{sub};
            }
            t->lines[leaf] = line;
            cur = sub;
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError(line, s, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty())
            throw ParseError(line, key, "empty key");
        if (cur->entries.count(key))
            throw ParseError(line, key, "duplicate key");
        cur->entries[key] = parse_value(s.substr(eq + 1), line, key);
        cur->lines[key] = line;
    }
    return root;
}

/// Typed accessors that report the offending line and field.
class Reader {
public:
    Reader(const Table& t, std::string prefix) : t_(t), prefix_(std::move(prefix)) {}

    bool has(const std::string& k) const { return t_.entries.count(k) > 0; }
    int line_of(const std::string& k) const
    {
        auto it = t_.lines.find(k);
        return it == t_.lines.end() ? t_.line : it->second;
    }
    std::string name(const std::string& k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

    double num(const std::string& k, std::optional<double> def = std::nullopt) const
    {
        auto it = t_.entries.find(k);
        if (it == t_.entries.end()) {
            if (def)
                return *def;
            throw ParseError(t_.line, name(k), "missing required number");
        }
        if (auto* d = std::get_if<double>(&it->second.v))
            return *d;
        throw ParseError(line_of(k), name(k), "expected a number");
    }
    int integer(const std::string& k, std::optional<int> def = std::nullopt) const
    {
        if (!has(k) && def)
            return *def;
        const double d = num(k);
        if (d != std::floor(d) || std::abs(d) > 1e9)
            throw ParseError(line_of(k), name(k), "expected an integer");
        return static_cast<int>(d);
    }
    std::string str(const std::string& k, std::optional<std::string> def = std::nullopt) const
    {
        auto it = t_.entries.find(k);
        if (it == t_.entries.end()) {
            if (def)
                return *def;
            throw ParseError(t_.line, name(k), "missing required string");
        }
        if (auto* s = std::get_if<std::string>(&it->second.v))
            return *s;
        throw ParseError(line_of(k), name(k), "expected a string");
    }
    std::vector<double> nums(const std::string& k, std::optional<std::vector<double>> def = std::nullopt) const
    {
        auto it = t_.entries.find(k);
        if (it == t_.entries.end()) {
            if (def)
                return *def;
            throw ParseError(t_.line, name(k), "missing required array");
        }
        auto* a = std::get_if<Array>(&it->second.v);
        if (!a)
            throw ParseError(line_of(k), name(k), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *a) {
            auto* d = std::get_if<double>(&e.v);
            if (!d)
                throw ParseError(line_of(k), name(k), "expected an array of numbers");
            out.push_back(*d);
        }
        return out;
    }
    Vec2 point(const std::string& k, std::optional<Vec2> def = std::nullopt) const
    {
        if (!has(k) && def)
            return *def;
        auto v = nums(k);
        if (v.size() != 2)
            throw ParseError(line_of(k), name(k), "expected [x, y]");
        return {v[0], v[1]};
    }
    const Table* table(const std::string& k) const
    {
        auto it = t_.entries.find(k);
        if (it == t_.entries.end())
            return nullptr;
        if (auto* t = std::get_if<std::shared_ptr<Table>>(&it->second.v))
            return t->get();
        throw ParseError(line_of(k), name(k), "expected a table");
    }
    TableList tables(const std::string& k) const
    {
        auto it = t_.entries.find(k);
        if (it == t_.entries.end())
            return {};
        if (auto* t = std::get_if<TableList>(&it->second.v))
            return *t;
        throw ParseError(line_of(k), name(k), "expected [[" + name(k) + "]] entries");
    }
    /// Reject keys the schema does not know, so typos surface as errors.
    void only(std::initializer_list<const char*> allowed) const
    {
        for (const auto& [k, v] : t_.entries) {
            bool ok = false;
            for (const char* a : allowed)
                ok = ok || k == a;
            if (!ok)
                throw ParseError(line_of(k), name(k), "unknown field");
        }
    }

private:
    const Table& t_;
    std::string prefix_;
};

template <class E>
E choose(const Reader& r, const std::string& key, const std::string& def,
         std::initializer_list<std::pair<const char*, E>> options)
{
    const std::string v = r.str(key, def);
    for (const auto& [n, e] : options)
        if (v == n)
            return e;
    std::string names;
    for (const auto& [n, e] : options)
        names += std::string(names.empty() ? "" : ", ") + n;
    throw ParseError(r.line_of(key), r.name(key), "expected one of " + names + ", got '" + v + "'");
}

std::string num_text(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    std::string s = os.str();
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

} // namespace

double Envelope::operator()(double t) const
{
    return 1.0 + amplitude * std::sin(two_pi * frequency * t);
}

double InflowProfile::operator()(double angle, double t) const
{
    if (kind == Kind::Constant)
        return mean;
    return mean + amplitude * std::cos(mode * angle - phase) * std::cos(two_pi * frequency * t);
}

double InitialProfile::operator()(Vec2 p) const
{
    switch (kind) {
    case Kind::Zero:
        return 0.0;
    case Kind::Constant:
        return value;
    case Kind::Gaussians: {
        double s = 0.0;
        for (const auto& g : gaussians) {
            const Vec2 d = p - g.center;
            s += g.amplitude * std::exp(-dot(d, d) / (2 * g.sigma * g.sigma));
        }
        return s;
    }
    case Kind::Sine:
        return value * std::sin(kx * p.x + ky * p.y + phase);
    }
    return 0.0;
}

double Scenario::g(int hole, double s, double t) const
{
    const HoleSpec& hs = domain.holes.at(hole);
    const HoleFlux& f = flux.at(hole);
    const double per = two_pi * hs.radius;
    return f.flux / per * (1.0 + f.modulation * std::cos(s / hs.radius - f.angle)) * f.envelope(t);
}

double Scenario::omega_plus(int hole, double s, double t) const
{
    return inflow.at(hole)(s / domain.holes.at(hole).radius, t);
}

double Scenario::total_flux(double t) const
{
    double s = 0.0;
    for (const auto& f : flux)
        s += f.flux * f.envelope(t);
    return s;
}

void validate_scenario(const Scenario& s)
{
    const std::size_t N = s.domain.holes.size();
    if (s.flux.size() != N || s.inflow.size() != N || s.circulation.size() != N)
        throw ValidationError("every hole needs flux, inflow and circulation data");
    if (!(s.T > 0.0) || !std::isfinite(s.T))
        throw ValidationError("T must be positive");
    if (!(s.p >= 1.0))
        throw ValidationError("p must be at least 1");
    if (s.nu.empty())
        throw ValidationError("nu list is empty");
    for (double nu : s.nu)
        if (!(nu >= 0.0) || !std::isfinite(nu))
            throw ValidationError("nu must be finite and non-negative");
    if (s.domain.grid_n < 8)
        throw ValidationError("grid_n must be at least 8");
    if (s.snapshot_stride < 1)
        throw ValidationError("snapshot_stride must be at least 1");
    if (!(s.dt_max > 0.0) || (s.dt && !(*s.dt > 0.0)))
        throw ValidationError("time steps must be positive");

    double scale = 0.0;
    for (const auto& f : s.flux) {
        scale += std::abs(f.flux) * (1.0 + std::abs(f.envelope.amplitude));
        if (!std::isfinite(f.flux) || !std::isfinite(f.modulation) || !std::isfinite(f.envelope.amplitude) ||
            !std::isfinite(f.envelope.frequency))
            throw ValidationError("SSC: flux data not finite");
    }
    const int ladder = 32;
    for (int m = 0; m <= ladder; ++m) {
        const double t = s.T * m / ladder;
        for (std::size_t k = 0; k < N; ++k) {
            const HoleFlux& f = s.flux[k];
            // Extremes of g over the circle at this time.
            const double base = f.flux / (two_pi * s.domain.holes[k].radius) * f.envelope(t);
            const double g1 = base * (1.0 + std::abs(f.modulation));
            const double g2 = base * (1.0 - std::abs(f.modulation));
            if (s.domain.holes[k].kind == HoleKind::Source && !(g1 < 0.0 && g2 < 0.0))
                throw ValidationError("SSC: g<0 on sources");
            if (s.domain.holes[k].kind == HoleKind::Sink && !(g1 > 0.0 && g2 > 0.0))
                throw ValidationError("SSC: g>0 on sinks");
        }
        if (std::abs(s.total_flux(t)) > 1e-12 * std::max(scale, 1.0))
            throw ValidationError("SSC: zero average");
    }

    for (double c : s.circulation)
        if (!std::isfinite(c))
            throw ValidationError("CIV: initial circulation not finite");
    const auto& ini = s.initial;
    bool finite = std::isfinite(ini.value) && std::isfinite(ini.kx) && std::isfinite(ini.ky) && std::isfinite(ini.phase);
    for (const auto& g : ini.gaussians)
        finite = finite && std::isfinite(g.amplitude) && std::isfinite(g.center.x) && std::isfinite(g.center.y) &&
                 g.sigma > 0.0;
    if (!finite)
        throw ValidationError("CIV: initial vorticity not finite");
    for (std::size_t k = 0; k < N; ++k) {
        const auto& in = s.inflow[k];
        if (!std::isfinite(in.mean) || !std::isfinite(in.amplitude) || !std::isfinite(in.phase) ||
            !std::isfinite(in.frequency))
            throw ValidationError("CIV: inflow vorticity not finite");
    }
}

Scenario parse_scenario(const std::string& text)
{
    const auto doc = parse_document(text);
    const Reader top(*doc, "");
    top.only({"id", "p", "T", "nu", "grid_n", "snapshot_stride", "dt_max", "dt", "outer", "hole", "initial",
              "tolerances"});
    Scenario s;
    s.id = top.str("id", "scenario");
    s.p = top.num("p", 2.0);
    s.T = top.num("T", 1.0);
    s.nu = top.nums("nu", std::vector<double>{1e-3});
    s.domain.grid_n = top.integer("grid_n", 128);
    s.snapshot_stride = top.integer("snapshot_stride", 1);
    s.dt_max = top.num("dt_max", 0.05);
    if (top.has("dt"))
        s.dt = top.num("dt");

    const Table* outer = top.table("outer");
    if (!outer)
        throw ParseError(1, "outer", "missing [outer] table");
    const Reader ro(*outer, "outer");
    ro.only({"shape", "center", "radius", "lo", "hi"});
    const std::string shape = ro.str("shape", "disk");
    if (shape == "disk")
        s.domain.outer = Disk{ro.point("center", Vec2{}), ro.num("radius")};
    else if (shape == "rectangle")
        s.domain.outer = Rectangle{ro.point("lo"), ro.point("hi")};
    else
        throw ParseError(ro.line_of("shape"), "outer.shape", "expected disk or rectangle");

    for (const auto& ht : top.tables("hole")) {
        const Reader r(*ht, "hole");
        r.only({"kind", "center", "radius", "flux", "modulation", "modulation_angle", "envelope_amplitude",
                "envelope_frequency", "circulation", "inflow", "inflow_mean", "inflow_amplitude", "inflow_mode",
                "inflow_phase", "inflow_frequency"});
        HoleSpec hs;
        hs.kind = choose<HoleKind>(r, "kind", "source", {{"source", HoleKind::Source}, {"sink", HoleKind::Sink}});
        hs.center = r.point("center");
        hs.radius = r.num("radius");
        s.domain.holes.push_back(hs);
        HoleFlux f;
        f.flux = r.num("flux");
        f.modulation = r.num("modulation", 0.0);
        f.angle = r.num("modulation_angle", 0.0);
        f.envelope.amplitude = r.num("envelope_amplitude", 0.0);
        f.envelope.frequency = r.num("envelope_frequency", 0.0);
        s.flux.push_back(f);
        s.circulation.push_back(r.num("circulation", 0.0));
        InflowProfile in;
        in.kind = choose<InflowProfile::Kind>(r, "inflow", "constant",
                                              {{"constant", InflowProfile::Kind::Constant},
                                               {"harmonic", InflowProfile::Kind::Harmonic}});
        in.mean = r.num("inflow_mean", 0.0);
        in.amplitude = r.num("inflow_amplitude", 0.0);
        in.mode = r.integer("inflow_mode", 1);
        in.phase = r.num("inflow_phase", 0.0);
        in.frequency = r.num("inflow_frequency", 0.0);
        s.inflow.push_back(in);
    }

    if (const Table* it = top.table("initial")) {
        const Reader r(*it, "initial");
        r.only({"profile", "value", "kx", "ky", "phase", "gaussian"});
        s.initial.kind = choose<InitialProfile::Kind>(r, "profile", "zero",
                                                      {{"zero", InitialProfile::Kind::Zero},
                                                       {"constant", InitialProfile::Kind::Constant},
                                                       {"gaussians", InitialProfile::Kind::Gaussians},
                                                       {"sine", InitialProfile::Kind::Sine}});
        s.initial.value = r.num("value", 0.0);
        s.initial.kx = r.num("kx", 1.0);
        s.initial.ky = r.num("ky", 0.0);
        s.initial.phase = r.num("phase", 0.0);
        for (const auto& gt : r.tables("gaussian")) {
            const Reader g(*gt, "initial.gaussian");
            g.only({"center", "sigma", "amplitude"});
            s.initial.gaussians.push_back({g.point("center"), g.num("sigma"), g.num("amplitude")});
        }
    }

    if (const Table* tt = top.table("tolerances")) {
        const Reader r(*tt, "tolerances");
        r.only({"budget", "residual", "duality", "circulation", "linf_viscous"});
        s.tol.budget = r.num("budget", s.tol.budget);
        s.tol.residual = r.num("residual", s.tol.residual);
        s.tol.duality = r.num("duality", s.tol.duality);
        s.tol.circulation = r.num("circulation", s.tol.circulation);
        s.tol.linf_viscous = r.num("linf_viscous", s.tol.linf_viscous);
    }

    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string to_text(const Scenario& s)
{
    std::ostringstream os;
    auto pt = [](Vec2 p) { return "[" + num_text(p.x) + ", " + num_text(p.y) + "]"; };
    os << "id = \"" << s.id << "\"\n";
    os << "p = " << num_text(s.p) << "\nT = " << num_text(s.T) << "\nnu = [";
    for (std::size_t k = 0; k < s.nu.size(); ++k)
        os << (k ? ", " : "") << num_text(s.nu[k]);
    os << "]\ngrid_n = " << s.domain.grid_n << "\nsnapshot_stride = " << s.snapshot_stride
       << "\ndt_max = " << num_text(s.dt_max) << "\n";
    if (s.dt)
        os << "dt = " << num_text(*s.dt) << "\n";
    os << "\n[outer]\n";
    if (auto* d = std::get_if<Disk>(&s.domain.outer))
        os << "shape = \"disk\"\ncenter = " << pt(d->center) << "\nradius = " << num_text(d->radius) << "\n";
    else {
        const auto& r = std::get<Rectangle>(s.domain.outer);
        os << "shape = \"rectangle\"\nlo = " << pt(r.lo) << "\nhi = " << pt(r.hi) << "\n";
    }
    for (std::size_t k = 0; k < s.domain.holes.size(); ++k) {
        const auto& h = s.domain.holes[k];
        const auto& f = s.flux[k];
        const auto& in = s.inflow[k];
        os << "\n[[hole]]\nkind = \"" << (h.kind == HoleKind::Source ? "source" : "sink") << "\"\n"
           << "center = " << pt(h.center) << "\nradius = " << num_text(h.radius) << "\n"
           << "flux = " << num_text(f.flux) << "\nmodulation = " << num_text(f.modulation)
           << "\nmodulation_angle = " << num_text(f.angle) << "\nenvelope_amplitude = "
           << num_text(f.envelope.amplitude) << "\nenvelope_frequency = " << num_text(f.envelope.frequency)
           << "\ncirculation = " << num_text(s.circulation[k]) << "\ninflow = \""
           << (in.kind == InflowProfile::Kind::Constant ? "constant" : "harmonic") << "\"\n"
           << "inflow_mean = " << num_text(in.mean) << "\ninflow_amplitude = " << num_text(in.amplitude)
           << "\ninflow_mode = " << in.mode << "\ninflow_phase = " << num_text(in.phase)
           << "\ninflow_frequency = " << num_text(in.frequency) << "\n";
    }
    const auto& ini = s.initial;
    static const char* kinds[] = {"zero", "constant", "gaussians", "sine"};
    os << "\n[initial]\nprofile = \"" << kinds[static_cast<int>(ini.kind)] << "\"\nvalue = " << num_text(ini.value)
       << "\nkx = " << num_text(ini.kx) << "\nky = " << num_text(ini.ky) << "\nphase = " << num_text(ini.phase)
       << "\n";
    for (const auto& g : ini.gaussians)
        os << "\n[[initial.gaussian]]\ncenter = " << pt(g.center) << "\nsigma = " << num_text(g.sigma)
           << "\namplitude = " << num_text(g.amplitude) << "\n";
    os << "\n[tolerances]\nbudget = " << num_text(s.tol.budget) << "\nresidual = " << num_text(s.tol.residual)
       << "\nduality = " << num_text(s.tol.duality) << "\ncirculation = " << num_text(s.tol.circulation)
       << "\nlinf_viscous = " << num_text(s.tol.linf_viscous) << "\n";
    return os.str();
}

Scenario reference_scenario()
{
    Scenario s;
    s.id = "reference";
    s.domain.outer = Disk{{0.0, 0.0}, 3.0};
    s.domain.holes = {{{-1.5, 0.0}, 0.5, HoleKind::Source}, {{1.5, 0.0}, 0.5, HoleKind::Sink}};
    s.domain.grid_n = 128;
    s.flux = {HoleFlux{-1.0, 0.0, 0.0, {}}, HoleFlux{1.0, 0.3, 0.0, {}}};
    InflowProfile in;
    in.kind = InflowProfile::Kind::Harmonic;
    in.mean = 0.5;
    in.amplitude = 0.5;
    in.mode = 1;
    in.frequency = 0.5;
    s.inflow = {in, InflowProfile{}};
    s.circulation = {0.5, -0.3};
    s.initial.kind = InitialProfile::Kind::Gaussians;
    s.initial.gaussians = {{{0.0, 1.0}, 0.4, 1.0}, {{0.0, -1.2}, 0.35, -0.8}};
    s.p = 2.0;
    s.T = 1.0;
    s.nu = {4e-3, 2e-3, 1e-3, 5e-4};
    s.snapshot_stride = 5;
    s.dt_max = 0.05;
    return s;
}

} // namespace vortlab
