#pragma once

#include "vortlab/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vortlab {

/// Time modulation of a hole's flux: 1 + amplitude * sin(2 pi frequency t).
struct Envelope {
    double amplitude = 0.0;
    double frequency = 0.0;

    double operator()(double t) const;
};

/// Normal velocity on one hole:
/// g(s, t) = flux / perimeter * (1 + modulation * cos(s / r - angle)) * envelope(t),
/// so that the boundary integral of g is flux * envelope(t).
struct HoleFlux {
    double flux = 0.0;
    double modulation = 0.0;
    double angle = 0.0;
    Envelope envelope;
};

/// Vorticity carried in through a Source, as a function of arclength and time.
struct InflowProfile {
    enum class Kind { Constant, Harmonic };
    Kind kind = Kind::Constant;
    double mean = 0.0;
    double amplitude = 0.0;
    int mode = 1;
    double phase = 0.0;
    double frequency = 0.0;

    double operator()(double angle, double t) const;
};

struct Gaussian {
    Vec2 center;
    double sigma = 1.0;
    double amplitude = 1.0;
};

struct InitialProfile {
    enum class Kind { Zero, Constant, Gaussians, Sine };
    Kind kind = Kind::Zero;
    double value = 0.0;
    std::vector<Gaussian> gaussians;
    double kx = 1.0, ky = 0.0, phase = 0.0; ///< Sine: value * sin(kx x + ky y + phase)

    double operator()(Vec2 p) const;
};

struct Tolerances {
    double budget = 0.05;      ///< budget slack, relative to the right-hand side
    double residual = 0.10;    ///< weak-form residuals, relative to the dominant term
    double duality = 0.05;     ///< duality residual, relative
    double circulation = 0.02; ///< harmonic-field circulation matrix, entrywise
    double linf_viscous = 10.0; ///< viscous L-infinity ratio allowed to reach 1 + this * h
};

struct Scenario {
    std::string id = "scenario";
    DomainSpec domain;
    std::vector<HoleFlux> flux;           ///< one per hole
    std::vector<InflowProfile> inflow;    ///< one per hole, read on Sources only
    std::vector<double> circulation;      ///< C_in, one per hole
    InitialProfile initial;
    double p = 2.0;
    double T = 1.0;
    std::vector<double> nu{1e-3};
    int snapshot_stride = 1;
    double dt_max = 0.05;
    std::optional<double> dt; ///< fixed step, overriding the stability bound
    Tolerances tol;

    double g(int hole, double s, double t) const;
    double omega_plus(int hole, double s, double t) const;
    double total_flux(double t) const;
};

/// Parse and validate scenario text. Throws ParseError or ValidationError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Check source/sink compatibility and finiteness on a ladder of times.
void validate_scenario(const Scenario& s);

std::string to_text(const Scenario& s);

/// Two holes in a disk: the configuration used by the tests and the CLI defaults.
Scenario reference_scenario();

} // namespace vortlab
