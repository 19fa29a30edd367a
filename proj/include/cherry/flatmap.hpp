#pragma once

// Degree-one circle maps with one flat interval.
//
// The forward map f sends the whole interval [c,d] to the single critical
// value xi = omega mod 1, leaves via power laws of exponent r on both sides
// (matching width epsilon), and crosses the remaining arc through a strictly
// increasing quintic bridge with C^1 junctions.  The inverse branch g undoes
// f away from the gap: g maps the circle minus {xi} onto [d, 1+c] and is the
// return map used for forward-time suspension runs.

#include <string>

#include "cherry/numerics.hpp"

namespace cherry {

inline Real mod1(const Real& x) { return x - floor(x); }

// representative of (to - from) mod 1 in (-1/2, 1/2]
inline Real signed_gap(const Real& from, const Real& to) {
    Real u = mod1(to - from);
    Real half = Real::from_str("0.5", u.prec());
    if (u > half) u -= Real::from_long(1, u.prec());
    return u;
}

inline Real circle_dist(const Real& a, const Real& b) { return abs(signed_gap(a, b)); }

// saddle rates: 0 < lambda_s < 1 < lambda_u, transit exponent r = -log(lu)/log(ls)
struct SaddleSpec {
    Real lambda_s;
    Real lambda_u;
    Real r;

    static SaddleSpec from_rates(const Real& ls, const Real& lu) {
        if (!(ls > 0L && ls < 1L)) throw ConfigError("lambda_s must lie in (0,1)");
        if (!(lu > 1L)) throw ConfigError("lambda_u must exceed 1");
        return {ls, lu, -(log(lu) / log(ls))};
    }
    static SaddleSpec from_exponent(const Real& r, const Real& ls) {
        if (!(r > 0L)) throw ConfigError("transit exponent must be positive");
        if (!(ls > 0L && ls < 1L)) throw ConfigError("lambda_s must lie in (0,1)");
        return {ls, pow(ls, -r), r};
    }
    // contraction beats expansion along a saddle pass
    bool dissipative() const { return lambda_s * lambda_u <= 1L; }
};

class FlatCircleMap {
  public:
    FlatCircleMap(const NumericContext& ctx, const Real& c, const Real& d, const Real& r,
                  const Real& epsilon, const Real& omega)
        : prec_(ctx.precision_bits()),
          c_(c), d_(d), r_(r), eps_(epsilon), omega_(omega),
          xi_(mod1(omega)),
          anchor_(c + mod1(omega - c)),
          v0_(pow(epsilon, r)),
          v1_(Real::from_long(1, prec_) - pow(epsilon, r)),
          arc_(Real::from_long(1, prec_) + c - d - epsilon * 2L),
          m_(ctx.zero()), bd_(ctx.zero()),
          inv_r_(Real::from_long(1, prec_) / r),
          eta_(ctx.eps(8)) {
        if (!(c >= 0L && c < d && d < 1L)) throw ConfigError("need 0 <= c < d < 1");
        if (!(epsilon > 0L)) throw ConfigError("matching width must be positive");
        if (!(r > 0L)) throw ConfigError("power exponent must be positive");
        if (!(omega >= 0L && omega < 1L)) throw ConfigError("omega must lie in [0,1)");
        if (!(arc_ > 0L)) throw ConfigError("flat interval plus matching zones wraps the circle");
        m_ = r * pow(epsilon, r - 1L) * arc_;     // bridge end slope in s-units
        bd_ = v1_ - v0_ - m_;                      // cubic-and-up coefficient block
        validate_bridge();
    }

    FlatCircleMap with_omega(const Real& omega) const {
        FlatCircleMap m = *this;
        if (!(omega >= 0L && omega < 1L)) throw ConfigError("omega must lie in [0,1)");
        m.omega_ = omega;
        m.xi_ = mod1(omega);
        m.anchor_ = m.c_ + mod1(omega - m.c_);
        return m;
    }

    long precision_bits() const { return prec_; }
    const Real& c() const { return c_; }
    const Real& d() const { return d_; }
    const Real& r() const { return r_; }
    const Real& epsilon() const { return eps_; }
    const Real& omega() const { return omega_; }
    const Real& xi() const { return xi_; }
    const Real& eta() const { return eta_; }

    // bridge profile h(s) = v0 + m s + bd s^3 (10 - 15 s + 6 s^2), s in [0,1]
    Real bridge_value(const Real& s) const {
        Real s2 = s * s;
        Real poly = (Real::from_long(10, prec_) - s * 15L + s2 * 6L);
        return v0_ + m_ * s + bd_ * s * s2 * poly;
    }
    // h'(s) = m + 30 bd s^2 (1-s)^2
    Real bridge_slope(const Real& s) const {
        Real w = s * (Real::from_long(1, prec_) - s);
        return m_ + bd_ * w * w * 30L;
    }

    // profile value in [0,1) for a representative x_rep in [c, 1+c)
    Real profile(const Real& x_rep) const {
        if (x_rep <= d_) return Real::from_long(0, prec_);
        Real one = Real::from_long(1, prec_);
        if (x_rep <= d_ + eps_) return pow(x_rep - d_, r_);
        Real top = one + c_;
        if (x_rep >= top - eps_) return one - pow(top - x_rep, r_);
        Real s = (x_rep - d_ - eps_) / arc_;
        return bridge_value(s);
    }

    Real rep_from_c(const Real& x) const {  // representative in [c, 1+c)
        Real x0 = mod1(x);
        return x0 < c_ ? x0 + 1L : x0;
    }

    Real eval_f(const Real& x) const {
        Real x_rep = rep_from_c(x);
        if (x_rep <= d_) return xi_;  // flat image, bitwise
        return mod1(xi_ + profile(x_rep));
    }

    // anchored lift displacement F(x)-x with F(x_rep) = anchor + profile,
    // anchor = c + ((omega - c) mod 1); rotation numbers land in [0,1]
    Real lift_displacement_f(const Real& x) const {
        Real x_rep = rep_from_c(x);
        return anchor_ + profile(x_rep) - x_rep;
    }

    // |f'| as log-magnitude; zero on the closed flat interval
    LogMag deriv_f(const Real& x) const {
        Real x_rep = rep_from_c(x);
        if (x_rep <= d_) return LogMag::zero(prec_);
        Real one = Real::from_long(1, prec_);
        Real top = one + c_;
        if (x_rep <= d_ + eps_)
            return lm_mul(to_logmag(r_), lm_pow(to_logmag(x_rep - d_), r_ - one));
        if (x_rep >= top - eps_)
            return lm_mul(to_logmag(r_), lm_pow(to_logmag(top - x_rep), r_ - one));
        Real s = (x_rep - d_ - eps_) / arc_;
        return to_logmag(bridge_slope(s) / arc_);
    }

    // inverse branch; throws when y falls in the guard band around xi
    Real eval_g(const Real& y) const {
        Real t = mod1(y - xi_);
        Real one = Real::from_long(1, prec_);
        if (t < eta_ || one - t < eta_)
            throw OrbitHitSingularity("inverse branch evaluated inside the guard band", -1);
        return g_from_offset(t);
    }

    // g applied to xi + t for positive offset t in (0,1), bypassing the guard;
    // the near-singular suspension machinery calls this with exact offsets
    Real g_from_offset(const Real& t) const {
        Real one = Real::from_long(1, prec_);
        if (t <= v0_) return mod1(d_ + pow(t, inv_r_));
        if (t >= v1_) return mod1(one + c_ - pow(one - t, inv_r_));
        Real s = invert_bridge(t);
        return mod1(d_ + eps_ + s * arc_);
    }

    // lift displacement for g on the lift G: [xi, xi+1) -> [d, 1+c)
    Real lift_displacement_g(const Real& y) const {
        Real t = mod1(y - xi_);
        Real y_rep = xi_ + t;
        Real gv = eval_g(y);
        Real g_rep = gv < d_ ? gv + 1L : gv;
        return g_rep - y_rep;
    }

    LogMag deriv_g(const Real& y) const {
        Real x = eval_g(y);
        LogMag df = deriv_f(x);
        if (df.sign == 0)
            throw OrbitHitSingularity("inverse branch derivative at a flat-image point", -1);
        return lm_div(LogMag::one(prec_), df);
    }

    std::string content_key() const {
        return c_.str_hex() + "|" + d_.str_hex() + "|" + r_.str_hex() + "|" +
               eps_.str_hex() + "|" + omega_.str_hex();
    }

  private:
    void validate_bridge() const {
        // slope positivity checked on a uniform grid, not assumed
        const long grid = 10000;
        Real step = Real::from_long(1, prec_) / grid;
        Real s(prec_);
        for (long i = 0; i <= grid; ++i) {
            mpfr_mul_si(s.raw(), step.raw(), i, MPFR_RNDN);
            if (!(bridge_slope(s) > 0L))
                throw BridgeError("connecting arc is not strictly increasing at grid point " +
                                      std::to_string(i),
                                  i);
        }
    }

    // solve bridge_value(s) = t by double-precision bisection then Newton at
    // full precision; the slope is bounded below by m on [0,1]
    Real invert_bridge(const Real& t) const {
        double td = t.to_double();
        double v0 = v0_.to_double(), m = m_.to_double(), bd = bd_.to_double();
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 60; ++i) {
            double mid = 0.5 * (lo + hi);
            double s2 = mid * mid;
            double h = v0 + m * mid + bd * mid * s2 * (10.0 - 15.0 * mid + 6.0 * s2);
            (h < td ? lo : hi) = mid;
        }
        Real s = Real::from_double(0.5 * (lo + hi), prec_);
        Real tol = Real::pow2(-prec_ + 4, prec_);
        for (int it = 0; it < 64; ++it) {
            Real du = (bridge_value(s) - t) / bridge_slope(s);
            s -= du;
            if (abs(du) < tol) break;
        }
        if (s < 0L) s = Real::from_long(0, prec_);
        if (s > 1L) s = Real::from_long(1, prec_);
        return s;
    }

    long prec_;
    Real c_, d_, r_, eps_, omega_, xi_, anchor_;
    Real v0_, v1_, arc_, m_, bd_, inv_r_, eta_;
};

// direction adapters so rotation/orbit machinery can run either the forward
// map or the inverse branch through one interface
struct ForwardView {
    const FlatCircleMap* map;
    Real advance(const Real& x) const { return map->eval_f(x); }
    Real lift_displacement(const Real& x) const { return map->lift_displacement_f(x); }
    LogMag deriv(const Real& x) const { return map->deriv_f(x); }
    // entering the plateau pins the orbit to xi, which makes rotation numbers rational
    bool flat_hit(const Real& x) const { return map->rep_from_c(x) <= map->d(); }
    // gaps collapse under the semiconjugacy, so spatial distance does not
    // follow the circular order of orbits
    bool ordered_metric() const { return false; }
    long precision_bits() const { return map->precision_bits(); }
};

struct InverseView {
    const FlatCircleMap* map;
    Real advance(const Real& y) const { return map->eval_g(y); }
    Real lift_displacement(const Real& y) const { return map->lift_displacement_g(y); }
    LogMag deriv(const Real& y) const { return map->deriv_g(y); }
    bool flat_hit(const Real&) const { return false; }
    bool ordered_metric() const { return false; }
    long precision_bits() const { return map->precision_bits(); }
};

} // namespace cherry
