#pragma once

#include <random>

#include "cherry/numerics.hpp"

namespace testutil {

using cherry::Real;

// |a - b| <= tol * max(|a|, |b|, floor)
inline bool close_rel(const Real& a, const Real& b, const Real& tol) {
    Real scale = cherry::max(cherry::abs(a), cherry::abs(b));
    if (scale < 1L) scale = Real::from_long(1, scale.prec());
    return cherry::abs(a - b) <= tol * scale;
}

inline bool close_abs(const Real& a, const Real& b, const Real& tol) {
    return cherry::abs(a - b) <= tol;
}

// uniform in [lo, hi) seeded deterministically; double entropy is enough for
// property-test sampling, values are then widened to context precision
inline Real rand_real(const cherry::NumericContext& ctx, std::mt19937_64& rng,
                      double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return ctx.real(d(rng));
}

} // namespace testutil
