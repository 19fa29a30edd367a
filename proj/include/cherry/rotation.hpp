#pragma once

#include <gmp.h>

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "cherry/errors.hpp"
#include "cherry/flatmap.hpp"
#include "cherry/numerics.hpp"

namespace cherry {

inline Real golden_mean(const NumericContext& ctx) {
    return (sqrt(ctx.real(5)) - ctx.one()) / 2L;
}

struct ContinuedFraction {
    std::vector<long> a;   // partial quotients, a[0] = floor(alpha)
    bool exhausted = false;  // true when precision ran out before maxTerms
};

namespace detail {

// owned mpz registers for the integer Euclid loop
struct EuclidState {
    mpz_t num, den, quo, rem, q_mm, q_m, q_next, budget;
    EuclidState() { mpz_inits(num, den, quo, rem, q_mm, q_m, q_next, budget, nullptr); }
    ~EuclidState() { mpz_clears(num, den, quo, rem, q_mm, q_m, q_next, budget, nullptr); }
    EuclidState(const EuclidState&) = delete;
    EuclidState& operator=(const EuclidState&) = delete;
};

} // namespace detail

// Exact integer Euclid on the dyadic approximation num/2^k of alpha, k = P-16.
// The Gauss map on rounded reals misreads dyadic inputs near termination, so
// the expansion is done on an exact fraction instead.
//
// Two stopping regimes are told apart. A single huge partial quotient means
// alpha sits within 1/(q^2 * huge) of the previous convergent, i.e. it is
// rational at working precision; the expansion is cut there and a trailing 1
// is merged so the result equals the integer Euclid expansion of that
// rational regardless of which side the rounding landed on. A convergent
// denominator passing 2^((k-8)/2) without any huge quotient means genuine
// depth exhaustion: the delivered terms are reliable and the flag is raised.
inline ContinuedFraction continued_fraction(const Real& alpha, int maxTerms) {
    ContinuedFraction cf;
    long P = alpha.prec();
    long k = P - 16;
    Real scaled(P);
    mpfr_mul_2si(scaled.raw(), alpha.raw(), k, MPFR_RNDN);  // exact: exponent shift

    detail::EuclidState st;
    mpfr_get_z(st.num, scaled.raw(), MPFR_RNDN);
    mpz_setbit(st.den, static_cast<mp_bitcnt_t>(k));
    mpz_setbit(st.budget, static_cast<mp_bitcnt_t>((k - 8) / 2));
    mpz_set_ui(st.q_mm, 1);  // q(-2)
    mpz_set_ui(st.q_m, 0);   // q(-1)

    while (static_cast<int>(cf.a.size()) < maxTerms) {
        if (mpz_sgn(st.den) == 0) break;  // terminated exactly
        mpz_fdiv_qr(st.quo, st.rem, st.num, st.den);
        if (!cf.a.empty() && (mpz_cmp(st.quo, st.budget) > 0 || !mpz_fits_slong_p(st.quo))) {
            // rational reconstruction: canonical expansions never end in 1
            if (cf.a.size() >= 2 && cf.a.back() == 1) {
                cf.a.pop_back();
                cf.a.back() += 1;
            }
            return cf;
        }
        mpz_mul(st.q_next, st.quo, st.q_m);
        mpz_add(st.q_next, st.q_next, st.q_mm);
        if (!cf.a.empty() && mpz_cmp(st.q_next, st.budget) > 0) {
            cf.exhausted = true;
            break;
        }
        cf.a.push_back(mpz_get_si(st.quo));
        mpz_swap(st.num, st.den);
        mpz_swap(st.den, st.rem);
        mpz_swap(st.q_mm, st.q_m);
        mpz_swap(st.q_m, st.q_next);
    }
    return cf;
}

// exact expansion of a rational; terminates, never exhausts
inline ContinuedFraction continued_fraction(int64_t num, int64_t den) {
    if (den <= 0) throw ConfigError("denominator must be positive");
    ContinuedFraction cf;
    int64_t a = num, b = den;
    while (b != 0) {
        int64_t q = a / b;
        int64_t r = a - q * b;
        if (r < 0) {  // floor division for negative numerators
            q -= 1;
            r += b;
        }
        cf.a.push_back(static_cast<long>(q));
        a = b;
        b = r;
    }
    return cf;
}

struct Convergent {
    int64_t p = 0;
    int64_t q = 1;
};

// standard recurrence; stops before int64 overflow
inline std::vector<Convergent> convergents(const std::vector<long>& a) {
    std::vector<Convergent> out;
    int64_t p2 = 0, p1 = 1;  // p(-2), p(-1)
    int64_t q2 = 1, q1 = 0;
    const int64_t cap = int64_t{1} << 62;
    for (long ak : a) {
        if (ak != 0 && (std::abs(p1) > (cap - std::abs(p2)) / ak || q1 > (cap - q2) / ak)) break;
        int64_t p = ak * p1 + p2;
        int64_t q = ak * q1 + q2;
        p2 = p1; p1 = p;
        q2 = q1; q1 = q;
        out.push_back({p, q});
    }
    return out;
}

// distance from q*alpha to the nearest integer
inline Real qnorm(const Real& alpha, int64_t q) {
    Real v = alpha * Real::from_long(q, alpha.prec());
    return circle_dist(mod1(v), Real::from_long(0, alpha.prec()));
}

// rotation by a fixed angle; reference dynamics for the generic engine
class RigidRotation {
public:
    RigidRotation(const NumericContext& ctx, Real alpha)
        : alpha_(std::move(alpha)), one_(ctx.one()) {}
    Real advance(const Real& x) const { return mod1(x + alpha_); }
    Real lift_displacement(const Real&) const { return alpha_; }
    LogMag deriv(const Real&) const { return LogMag::one(alpha_.prec()); }
    bool flat_hit(const Real&) const { return false; }
    // isometry: spatial closest returns are the combinatorial ones
    bool ordered_metric() const { return true; }
    long precision_bits() const { return alpha_.prec(); }
    const Real& alpha() const { return alpha_; }

private:
    Real alpha_;
    Real one_;
};

struct ClosestReturn {
    long step;      // orbit time of the improvement
    int64_t p;      // rounded lift winding at that time
    Real dist;      // circle distance back to the start point
};

struct RotationStats {
    Real estimate;
    Real radius;      // certified: |estimate - rho| <= radius
    bool exact = false;  // plateau hit or genuine periodic return
    int64_t p = 0;
    int64_t q = 1;
    long iterations = 0;
    std::vector<ClosestReturn> returns;

    explicit RotationStats(long P) : estimate(P), radius(P) {}
};

// Rotation number from one orbit.
//
// Exact exits: a plateau hit pins the tail of the orbit to a genuine cycle
// (everything in the flat interval maps to one point), and a bitwise return
// to the start point is a genuine periodic orbit; both give the rational
// rotation number exactly.
//
// Otherwise the estimate is certified. For views whose metric respects the
// circular order of orbits (rigid rotation), the last spatial closest return
// p/q is a convergent and |rho - p/q| <= 1/(q*n), since a closer return
// would have shown up by step n. For maps with collapsed gaps the spatial
// distances lie about the combinatorics, so only the universal winding bound
// |rho - W_n/n| <= 1/n for monotone degree-one lifts is claimed.
template <class View>
RotationStats measure_rotation(const NumericContext& ctx, const View& view, const Real& x0,
                               long maxIter) {
    long P = view.precision_bits();
    RotationStats out(P);
    out.radius = ctx.one();

    Real x = x0;
    Real lift = x0;
    Real best = ctx.real(2);
    long flat_step = -1;
    Real flat_lift = ctx.zero();

    for (long n = 0; n <= maxIter; ++n) {
        if (view.flat_hit(x)) {
            if (flat_step < 0) {
                flat_step = n;
                flat_lift = lift;
            } else {
                int64_t q = n - flat_step;
                Real winding = lift - flat_lift;
                Real rounded = floor(winding + ctx.real("0.5"));
                if (circle_dist(winding, rounded) > ctx.eps(24) * Real::from_long(q, P))
                    throw CombinatoricsError("plateau cycle winding is not an integer");
                int64_t p = rounded.to_long();
                int64_t g = std::gcd(p < 0 ? -p : p, q);
                if (g > 1) { p /= g; q /= g; }
                out.exact = true;
                out.p = p;
                out.q = q;
                out.estimate = Real::from_long(p, P) / Real::from_long(q, P);
                out.radius = ctx.zero();
                out.iterations = n;
                return out;
            }
        }
        if (n == maxIter) break;
        Real d = view.lift_displacement(x);
        x = view.advance(x);
        lift += d;
        Real dist = circle_dist(x, x0);
        if (dist < best) {
            best = dist;
            Real winding = lift - x0;
            Real rounded = floor(winding + ctx.real("0.5"));
            ClosestReturn cr{n + 1, rounded.to_long(), dist};
            out.returns.push_back(cr);
            if (dist.is_zero()) {
                int64_t q = cr.step;
                int64_t p = cr.p;
                int64_t g = std::gcd(p < 0 ? -p : p, q);
                if (g > 1) { p /= g; q /= g; }
                out.exact = true;
                out.p = p;
                out.q = q;
                out.estimate = Real::from_long(p, P) / Real::from_long(q, P);
                out.radius = ctx.zero();
                out.iterations = cr.step;
                return out;
            }
        }
    }

    out.iterations = maxIter;
    if (out.returns.empty()) throw CombinatoricsError("no closest return observed");
    const ClosestReturn& last = out.returns.back();
    out.p = last.p;
    out.q = last.step;
    if (view.ordered_metric()) {
        out.estimate = Real::from_long(out.p, P) / Real::from_long(out.q, P);
        long horizon = maxIter > out.q ? maxIter : out.q;
        out.radius = ctx.one() / (Real::from_long(out.q, P) * Real::from_long(horizon, P));
    } else {
        out.estimate = (lift - x0) / Real::from_long(maxIter, P);
        out.radius = (ctx.one() + ctx.eps(16)) / Real::from_long(maxIter, P);
    }
    return out;
}

struct TuneOptions {
    long startIter = 4096;
    long maxIter = 1L << 21;
    long maxProbes = 400;
    Real tolRho;

    explicit TuneOptions(Real tol) : tolRho(std::move(tol)) {}
};

struct TuneResult {
    Real u;        // tuned parameter in [0,1]
    Real rho;      // measured rotation number at u
    Real radius;   // certified measurement radius
    bool locked = false;
    int64_t p = 0;
    int64_t q = 1;
    long probes = 0;

    explicit TuneResult(long P) : u(P), rho(P), radius(P) {}
};

// Bisects u in [0,1] against a monotone family rho(u) with rho(0)=0, rho(1)=1.
// Probes start cheap and deepen only when the certified interval straddles the
// target. Plateau hits decide a side exactly, which is the common case for
// families with a flat interval. A probe that cannot separate from the target
// at full depth sits in a thin gap between plateaus; nearby offsets of the
// midpoint are tried before giving up, which keeps the bracket invariant.
template <class Factory>
TuneResult tune_rotation(const NumericContext& ctx, Factory&& factory, const Real& target,
                         const TuneOptions& opt) {
    if (!(target >= 0L && target <= 1L)) throw ConfigError("tuning target must lie in [0,1]");
    Real lo = ctx.zero();
    Real hi = ctx.one();
    TuneResult res(ctx.precision_bits());
    res.radius = ctx.one();

    static const double offsets[] = {16.0 / 32, 15.0 / 32, 17.0 / 32, 13.0 / 32, 19.0 / 32,
                                     11.0 / 32, 21.0 / 32, 9.0 / 32,  23.0 / 32};

    for (long probe = 0; probe < opt.maxProbes; ++probe) {
        bool decided = false;
        for (double t : offsets) {
            Real u = lo + (hi - lo) * ctx.real(t);
            auto system = factory(u);
            long budget = opt.startIter;
            while (true) {
                RotationStats st = measure_rotation(ctx, system.view(), system.start(), budget);
                res.probes = probe + 1;
                Real err = abs(st.estimate - target);
                if (err + st.radius <= opt.tolRho) {
                    res.u = u;
                    res.rho = st.estimate;
                    res.radius = st.radius;
                    res.locked = st.exact;
                    res.p = st.p;
                    res.q = st.q;
                    return res;
                }
                if (st.exact || err > st.radius) {
                    if (st.estimate < target) lo = u; else hi = u;
                    decided = true;
                    break;
                }
                if (budget >= opt.maxIter) break;  // undecidable here; nudge the midpoint
                budget *= 4;
                if (budget > opt.maxIter) budget = opt.maxIter;
            }
            if (decided) break;
        }
        if (!decided)
            throw TuneError("no probe near the midpoint separates from the target at max depth");
    }
    throw TuneError("bisection budget exhausted before reaching the target tolerance");
}

// adapter so tune_rotation can drive a map family through its forward dynamics
struct ForwardSystem {
    FlatCircleMap map;
    ForwardView view_{nullptr};
    ForwardSystem(FlatCircleMap m) : map(std::move(m)) { view_.map = &map; }
    ForwardSystem(const ForwardSystem& o) : map(o.map) { view_.map = &map; }
    ForwardSystem(ForwardSystem&& o) noexcept : map(std::move(o.map)) { view_.map = &map; }
    const ForwardView& view() const { return view_; }
    Real start() const { return map.xi(); }
};

// family u -> same geometry with the critical value advanced by u from c;
// rho runs monotonically from 0 to 1 as u sweeps [0,1]
inline auto omega_family(const NumericContext& ctx, const FlatCircleMap& base) {
    return [&ctx, base](const Real& u) {
        return ForwardSystem(base.with_omega(mod1(base.c() + u)));
    };
}

} // namespace cherry
