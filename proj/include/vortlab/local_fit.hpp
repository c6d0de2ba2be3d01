#pragma once

#include "vortlab/domain.hpp"

namespace vortlab {

/// Side condition imposed exactly on the local quadratic.
struct FitConstraint {
    enum class Kind { Value, NormalDerivative };
    Kind kind = Kind::Value;
    Vec2 at;
    Vec2 normal; ///< used by NormalDerivative
};

enum class FitEval { Value, DerivX, DerivY };

/// Weighted least-squares quadratic through fluid cells around `center`,
/// returned as the linear functional that evaluates it at `eval`.
/// With a constraint the stencil's datum_weight multiplies the datum.
/// Throws ExtrapolationError when fewer than 6 fluid cells are usable.
Stencil local_fit(const Domain& d, Vec2 center, Vec2 eval, FitEval what = FitEval::Value,
                  const FitConstraint* constraint = nullptr);

} // namespace vortlab
