#pragma once

// Mode-locking intervals of the inverse return map, their parabolic
// endpoints, distortion of the near-parabolic passage, gap bounds for the
// critical and parabolic orbits, and finite stages of the parabolic-tuning
// construction.
//
// Rationals p/q count windings of g in its own direction of motion, which
// equals the forward drift of f, so a p/q orbit of g is a branch cycle of f
// with lift winding exactly p.  Such cycles never meet the flat interval
// (its interior has no inverse image), hence their multipliers are finite
// and nonzero, and tongues end in honest saddle-node tangencies of the
// smooth branch.  That requires r > 1: for r < 1 the branch is uniformly
// expanding and branch cycles die at the flat-interval boundary instead,
// with no parabolic endpoint to certify.
//
// The lock gap below is the q-step displacement of the anchored forward
// lift minus p.  It increases pointwise in omega, is negative everywhere
// below a tongue and positive everywhere above it, and its zero set inside
// is the union of the locked cycles; the g-attracting cycle sits at upward
// zero crossings.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cherry/returns.hpp"

namespace cherry {

struct TongueFamily {
    FlatCircleMap base;

    FlatCircleMap at(const Real& omega) const { return base.with_omega(mod1(omega)); }
};

// arc [lo, lo+len) on the circle
struct CircleInterval {
    Real lo;
    Real len;

    bool contains(const Real& x) const { return mod1(x - lo) <= len; }
    Real mid() const { return mod1(lo + len / 2L); }
};

inline CircleInterval interval_around(const Real& center, const Real& radius) {
    return {mod1(center - radius), radius * 2L};
}

namespace detail {

// q-step lift displacement against winding p; zero exactly on locked orbits
inline Real lock_gap(const FlatCircleMap& map, const Real& x, long p, long q) {
    Real sum = Real::from_long(0, x.prec());
    Real y = x;
    for (long k = 0; k < q; ++k) {
        sum = sum + map.lift_displacement_f(y);
        y = map.eval_f(y);
    }
    return sum - Real::from_long(p, x.prec());
}

inline long default_grid(long q) { return std::max<long>(96, std::min<long>(16 * q, 512)); }

} // namespace detail

// Grid extremes of the lock gap, sharpened by nested subgrid refinement.
// Near a tangency the sign-relevant feature is a bump of width ~sqrt(gap),
// far below the grid pitch, so refinement matters more than grid size.
struct LockScan {
    Real minGap, maxGap;
    Real argMin, argMax;

    explicit LockScan(long P) : minGap(P), maxGap(P), argMin(P), argMax(P) {}
    bool locked() const { return !(minGap > 0L) && !(maxGap < 0L); }
};

inline LockScan scan_lock(const NumericContext& ctx, const FlatCircleMap& map, long p, long q,
                          long grid = 0) {
    if (q < 1 || p < 0 || p > q || grid < 0) throw ConfigError("lock scan needs 0 <= p <= q");
    if (grid == 0) grid = detail::default_grid(q);
    LockScan out(ctx.precision_bits());

    Real step = ctx.one() / ctx.real(grid);
    for (long i = 0; i < grid; ++i) {
        Real x = ctx.real(i) * step;
        Real gapv = detail::lock_gap(map, x, p, q);
        if (i == 0 || gapv < out.minGap) {
            out.minGap = gapv;
            out.argMin = x;
        }
        if (i == 0 || gapv > out.maxGap) {
            out.maxGap = gapv;
            out.argMax = x;
        }
    }
    auto refine = [&](Real& val, Real& arg, int sign) {
        Real w = step;
        const long n = 48;
        for (int round = 0; round < 5; ++round) {
            Real lo = arg - w;
            Real span = w * 2L;
            for (long i = 0; i <= n; ++i) {
                Real x = mod1(lo + span * i / n);
                Real gapv = detail::lock_gap(map, x, p, q);
                if (gapv * sign > val * sign) {
                    val = gapv;
                    arg = x;
                }
            }
            w = span / n * 2L;
        }
    };
    refine(out.minGap, out.argMin, -1);
    refine(out.maxGap, out.argMax, 1);
    return out;
}

// attracting cycle of g: an upward zero crossing of the lock gap
struct CycleInfo {
    std::vector<Real> orbit;  // g-orbit from the detected point
    double multiplier = 0;    // (g^q)' along it

    Real closest_to(const Real& target) const {
        Real best = orbit.front();
        Real bd = circle_dist(best, target);
        for (const Real& y : orbit) {
            Real d = circle_dist(y, target);
            if (d < bd) {
                bd = d;
                best = y;
            }
        }
        return best;
    }
};

inline CycleInfo find_cycle(const NumericContext& ctx, const FlatCircleMap& map, long p, long q,
                            long grid = 0) {
    LockScan scan = scan_lock(ctx, map, p, q, grid);
    if (!(scan.minGap < 0L) || !(scan.maxGap > 0L))
        throw TongueNotFound("no transverse periodic orbit at the requested rotation number");
    // bisect along the positively oriented arc from the minimum to the
    // maximum; the crossing it traps goes from negative to positive
    Real arc = mod1(scan.argMax - scan.argMin);
    Real lo = ctx.real(0), hi = ctx.one();
    for (int it = 0; it < 140; ++it) {
        Real mid = (lo + hi) / 2L;
        if (detail::lock_gap(map, mod1(scan.argMin + arc * mid), p, q) > 0L)
            hi = mid;
        else
            lo = mid;
    }
    CycleInfo info;
    InverseView g{&map};
    Real y = mod1(scan.argMin + arc * ((lo + hi) / 2L));
    Real logSum = ctx.real(0);
    for (long k = 0; k < q; ++k) {
        info.orbit.push_back(y);
        logSum = logSum + map.deriv_g(y).logAbs;
        y = g.advance(y);
    }
    info.multiplier = std::exp(logSum.to_double());
    return info;
}

struct TongueRecord {
    long p = 0, q = 1;
    Real omegaLo, omegaHi;
    double multLo = 0;  // (g^q)' at the attracting orbit just inside each end
    double multHi = 0;

    explicit TongueRecord(long P) : omegaLo(P), omegaHi(P) {}
    Real width() const { return omegaHi - omegaLo; }
};

// Bisection on the monotone lock-gap extremes.  Below the tongue the gap is
// negative everywhere, above it positive everywhere; the lower edge is where
// the maximum reaches zero and the upper edge where the minimum does.  A
// bracket end already inside the tongue clamps that edge to the bracket.
inline TongueRecord locate_tongue(const NumericContext& ctx, const TongueFamily& fam, long p,
                                  long q, const Real& bracketLo, const Real& bracketHi,
                                  const Real& tol, long grid = 0) {
    if (!(bracketLo < bracketHi)) throw ConfigError("empty tongue bracket");
    LockScan atLo = scan_lock(ctx, fam.at(bracketLo), p, q, grid);
    LockScan atHi = scan_lock(ctx, fam.at(bracketHi), p, q, grid);
    if (atLo.minGap > 0L) throw TongueNotFound("bracket starts above the tongue");
    if (atHi.maxGap < 0L) throw TongueNotFound("bracket ends below the tongue");

    auto edge = [&](bool upper) {
        Real lo = bracketLo, hi = bracketHi;
        while (hi - lo > tol) {
            Real mid = (lo + hi) / 2L;
            LockScan sc = scan_lock(ctx, fam.at(mid), p, q, grid);
            bool past = upper ? (sc.minGap > 0L) : (sc.maxGap >= 0L);
            if (past)
                hi = mid;
            else
                lo = mid;
        }
        return (lo + hi) / 2L;
    };

    TongueRecord rec(ctx.precision_bits());
    rec.p = p;
    rec.q = q;
    rec.omegaLo = atLo.locked() ? bracketLo : edge(false);
    rec.omegaHi = atHi.locked() ? bracketHi : edge(true);
    if (!(rec.omegaLo < rec.omegaHi)) throw TongueNotFound("tongue empty at this resolution");

    LockScan midScan = scan_lock(ctx, fam.at((rec.omegaLo + rec.omegaHi) / 2L), p, q, grid);
    if (!midScan.locked()) throw TongueNotFound("midpoint fails periodic-orbit detection");

    Real inset = max(min(tol, rec.width() / 4L), rec.width() / 1024L);
    rec.multLo = find_cycle(ctx, fam.at(rec.omegaLo + inset), p, q, grid).multiplier;
    rec.multHi = find_cycle(ctx, fam.at(rec.omegaHi - inset), p, q, grid).multiplier;
    return rec;
}

enum class TongueSide { lower, upper };

struct EndpointResult {
    Real omega;
    Real point;             // cycle point nearest the singular value
    double multiplier = 0;  // at omega -+ tol inside
    double kappa = 0;       // 1 - multiplier there
    std::vector<double> ladder;  // multipliers along the dyadic approach

    explicit EndpointResult(long P) : omega(P), point(P) {}
};

// Certify an endpoint as parabolic: refine it to tol, then watch the
// attracting multiplier climb to 1 along a dyadic parameter sequence.
inline EndpointResult parabolic_endpoint(const NumericContext& ctx, const TongueFamily& fam,
                                         const TongueRecord& rec, TongueSide side,
                                         const Real& tol, long grid = 0) {
    Real span = rec.width();
    if (!(span > 0L)) throw ConfigError("degenerate tongue record");
    // the endpoint must be pinned below the finest dyadic rung, else the
    // rung multipliers measure the location error instead of the approach
    Real tolEff = min(tol, span / Real::pow2(13, ctx.precision_bits()));
    bool upper = side == TongueSide::upper;

    // anchor one bisection end inside, push the other strictly outside
    Real inPt = (rec.omegaLo + rec.omegaHi) / 2L;
    Real outPt = upper ? rec.omegaHi : rec.omegaLo;
    Real pad = span / 64L;
    while (scan_lock(ctx, fam.at(outPt), rec.p, rec.q, grid).locked())
        outPt = upper ? outPt + pad : outPt - pad;
    Real lo = upper ? inPt : outPt;
    Real hi = upper ? outPt : inPt;
    while (hi - lo > tolEff) {
        Real mid = (lo + hi) / 2L;
        bool inside = scan_lock(ctx, fam.at(mid), rec.p, rec.q, grid).locked();
        if (inside == upper)
            lo = mid;
        else
            hi = mid;
    }
    EndpointResult out(ctx.precision_bits());
    out.omega = (lo + hi) / 2L;

    for (int j = 4; j <= 12; ++j) {
        Real off = span / Real::pow2(j, ctx.precision_bits());
        Real oj = upper ? out.omega - off : out.omega + off;
        out.ladder.push_back(find_cycle(ctx, fam.at(oj), rec.p, rec.q, grid).multiplier);
    }
    for (size_t i = 1; i < out.ladder.size(); ++i)
        if (out.ladder[i] < out.ladder[i - 1] - 1e-9)
            throw EndpointCertificationError("multiplier not climbing along the dyadic approach");
    if (!(1 - out.ladder.back() < (1 - out.ladder.front()) / 4))
        throw EndpointCertificationError("multiplier fails to approach 1");

    Real oIn = upper ? out.omega - tolEff : out.omega + tolEff;
    FlatCircleMap inMap = fam.at(oIn);
    CycleInfo cyc = find_cycle(ctx, inMap, rec.p, rec.q, grid);
    out.point = cyc.closest_to(inMap.xi());
    out.multiplier = cyc.multiplier;
    out.kappa = 1 - cyc.multiplier;

    // just past the edge the orbit must be gone
    Real oOut = upper ? out.omega + tolEff : out.omega - tolEff;
    if (scan_lock(ctx, fam.at(oOut), rec.p, rec.q, grid).locked())
        throw EndpointCertificationError("periodic orbit persists past the endpoint");
    return out;
}

// f^steps along the monotone branch, for passages of higher-period stages
struct IteratedForward {
    const FlatCircleMap* map;
    long steps = 1;

    Real advance(const Real& x) const {
        Real y = x;
        for (long i = 0; i < steps; ++i) y = map->eval_f(y);
        return y;
    }
    LogMag deriv(const Real& x) const {
        Real y = x;
        LogMag acc{1, Real::from_long(0, x.prec())};
        for (long i = 0; i < steps; ++i) {
            acc = lm_mul(acc, map->deriv_f(y));
            y = map->eval_f(y);
        }
        return acc;
    }
};

struct DistortionReport {
    double minDeriv = 0, maxDeriv = 0;
    double K = 0;
    long nMin = 0, nMax = 0;
    long samples = 0;
};

// Escape through the channel [a1, a2] containing the ghost of a lost cycle:
// for samples x in the entry window [a1, F^2(a1)], n(x) counts the iterates
// that stay inside, and the chain derivative of the escape map stays pinched
// in [1/K, K] however slow the crawl is.
template <class System>
DistortionReport parabolic_passage_distortion(const NumericContext& ctx, const System& sys,
                                              const Real& a1, const Real& a2, long sampleCount,
                                              long cap = 2000000) {
    if (sampleCount < 1) throw ConfigError("need at least one passage sample");
    Real posA2 = mod1(a2 - a1);
    Real window = mod1(sys.advance(sys.advance(a1)) - a1);
    if (window > posA2) throw ConfigError("entry window leaves the channel");

    DistortionReport rep;
    rep.samples = sampleCount;
    for (long j = 0; j < sampleCount; ++j) {
        Real x = mod1(a1 + window * (2 * j + 1) / (2 * sampleCount));
        Real logSum = ctx.real(0);
        long n = 0;
        for (;;) {
            logSum = logSum + sys.deriv(x).logAbs;
            x = sys.advance(x);
            ++n;
            if (mod1(x - a1) > posA2) break;
            if (n >= cap)
                throw PassageStalled("no escape after " + std::to_string(cap) + " steps");
        }
        double dv = std::exp(logSum.to_double());
        if (j == 0 || dv < rep.minDeriv) rep.minDeriv = dv;
        if (j == 0 || dv > rep.maxDeriv) rep.maxDeriv = dv;
        if (j == 0 || n < rep.nMin) rep.nMin = n;
        if (j == 0 || n > rep.nMax) rep.nMax = n;
    }
    rep.K = std::max(rep.maxDeriv, 1 / rep.minDeriv);
    return rep;
}

struct GapReport {
    double deltaGap = 0;
    int minimizerPoint = -1;  // index into the probed points
    long minimizerStep = 0;
    bool singularHit = false;
    bool lipschitzGapHolds = false;  // 2 delta < (1/L) delta^(1/r)
};

// Smallest distance the inverse orbits of the probe points keep from the
// singular value; wanted bounded away from zero uniformly in the stage
// multiplier.
inline GapReport gap_bound(const FlatCircleMap& map, const std::vector<Real>& points, long kMax,
                           double L) {
    if (points.empty() || kMax < 1) throw ConfigError("gap bound needs points and iterations");
    GapReport rep;
    bool first = true;
    for (size_t i = 0; i < points.size(); ++i) {
        Real y = points[i];
        for (long k = 1; k <= kMax; ++k) {
            try {
                y = map.eval_g(y);
            } catch (const OrbitHitSingularity&) {
                rep.singularHit = true;
                rep.deltaGap = 0;
                rep.minimizerPoint = static_cast<int>(i);
                rep.minimizerStep = k;
                return rep;
            }
            double d = circle_dist(y, map.xi()).to_double();
            if (first || d < rep.deltaGap) {
                rep.deltaGap = d;
                rep.minimizerPoint = static_cast<int>(i);
                rep.minimizerStep = k;
                first = false;
            }
        }
    }
    double r = map.r().to_double();
    rep.lipschitzGapHolds = 2 * rep.deltaGap < std::pow(rep.deltaGap, 1 / r) / L;
    return rep;
}

struct StageFraction {
    int boxStage = 0;     // which stage's flow boxes
    double horizon = 0;
    int seed = 0;         // 0: flat-interval midpoint, 1: parabolic point
    double fraction = 0;  // time share spent over those boxes
    double bound = 0;     // required product of c_i
};

struct StageRecord {
    int n = 0;
    long p = 0, b = 1;  // rotation p/b of g at this stage
    long a = 0;         // multiplier that produced this stage
    Real omega;
    Real point;   // parabolic point nearest the singular value
    Real radius;  // half-width of B_n
    std::vector<CircleInterval> baseBoxes;  // g^i(B_n), i < b
    std::vector<double> cList;
    std::vector<StageFraction> fractions;
    double deltaGap = 0;
    double K = 0;
    double roofCap = 0, roofFloor = 0;
    long offTongueCount = 0;
    long retries = 0;
    TongueRecord tongue;

    explicit StageRecord(long P) : omega(P), point(P), radius(P), tongue(P) {}
};

inline double stage_constant(int i) { return 1 - std::ldexp(1.0, -i - 2); }

struct StageOptions {
    Real locateTol;
    Real endpointTol;
    long grid = 0;      // 0: derived from the period
    long aCap = 256;    // retry multipliers double up to this
    long gapIterations = 256;
    long passageSamples = 12;
    int passageOffsetExp = 12;  // passage measured at endpoint + width/2^exp
    std::vector<double> horizons{1000.0, 4000.0};

    explicit StageOptions(const NumericContext& ctx)
        : locateTol(ctx.real("1e-9")), endpointTol(ctx.real("1e-10")) {}
};

namespace detail {

// sorted disjoint cover of a box family; membership in O(log) instead of a
// sweep over thousands of stage boxes per orbit step
struct IntervalUnion {
    std::vector<Real> lo, hi;

    static IntervalUnion from_boxes(const std::vector<CircleInterval>& boxes) {
        std::vector<std::pair<Real, Real>> segs;
        for (const CircleInterval& box : boxes) {
            Real a = mod1(box.lo);
            Real b = a + box.len;
            if (b > 1L) {
                segs.emplace_back(a, Real::from_long(1, a.prec()));
                segs.emplace_back(Real::from_long(0, a.prec()), b - 1L);
            } else {
                segs.emplace_back(a, b);
            }
        }
        std::sort(segs.begin(), segs.end(),
                  [](const auto& s, const auto& t) { return s.first < t.first; });
        IntervalUnion out;
        for (auto& seg : segs) {
            if (!out.hi.empty() && !(seg.first > out.hi.back())) {
                if (seg.second > out.hi.back()) out.hi.back() = seg.second;
            } else {
                out.lo.push_back(seg.first);
                out.hi.push_back(seg.second);
            }
        }
        return out;
    }

    bool contains(const Real& x) const {
        Real xm = mod1(x);
        size_t i = std::upper_bound(lo.begin(), lo.end(), xm) - lo.begin();
        return i > 0 && !(xm > hi[i - 1]);
    }
};

// time share each recorded stage's boxes capture along the suspension orbit
inline std::vector<double> box_fractions(const FlatCircleMap& map, const Roof& roof,
                                         const std::vector<const StageRecord*>& boxes,
                                         const Real& z, double horizon) {
    InverseView g{&map};
    std::vector<IntervalUnion> covers;
    for (const StageRecord* rec : boxes) covers.push_back(IntervalUnion::from_boxes(rec->baseBoxes));
    std::vector<double> inBox(boxes.size(), 0.0);
    Real x = z;
    double t = 0;
    while (t < horizon) {
        LogMag dm = to_logmag(circle_dist(x, map.xi()));
        if (dm.sign == 0)
            throw OrbitHitSingularity("occupancy orbit reached the singular value", -1);
        double tau = roof.eval(dm).to_double();
        double lived = std::min(tau, horizon - t);
        for (size_t i = 0; i < boxes.size(); ++i)
            if (covers[i].contains(x)) inBox[i] += lived;
        t += lived;
        if (lived < tau) break;
        x = g.advance(x);
    }
    for (double& v : inBox) v /= horizon;
    return inBox;
}

// B_n and its whole inverse orbit must stay clear of the singular value
inline std::vector<CircleInterval> orbit_boxes(const FlatCircleMap& map, const Real& point,
                                               Real& radius, long b) {
    for (;;) {
        std::vector<CircleInterval> out;
        bool clear = true;
        try {
            Real lo = mod1(point - radius);
            Real hi = mod1(point + radius);
            for (long i = 0; i < b && clear; ++i) {
                CircleInterval box{lo, mod1(hi - lo)};
                if (box.contains(map.xi())) clear = false;
                out.push_back(box);
                if (i + 1 < b) {
                    lo = map.eval_g(lo);
                    hi = map.eval_g(hi);
                }
            }
        } catch (const OrbitHitSingularity&) {
            clear = false;
        }
        if (clear) return out;
        radius = radius / 2L;
    }
}

inline double roof_over_box(const Roof& roof, const FlatCircleMap& map,
                            const CircleInterval& box) {
    return roof.eval(to_logmag(circle_dist(box.mid(), map.xi()))).to_double();
}

} // namespace detail

// Stage 1: the fixed-point tongue, its upper parabolic endpoint, and the
// first neighborhood.  Occupancy inequalities are vacuous here.  The
// bracket starts inside the tongue on purpose: below omega = c the anchored
// winding wraps, so the clamped lower edge stands in for a lower bound the
// construction never uses.
inline StageRecord initial_stage(const NumericContext& ctx, const TongueFamily& fam,
                                 const Roof& roof, const StageOptions& opts) {
    StageRecord rec(ctx.precision_bits());
    rec.n = 1;
    rec.p = 0;
    rec.b = 1;
    rec.cList = {stage_constant(1)};

    Real c = fam.base.c();
    rec.tongue = locate_tongue(ctx, fam, 0, 1, c + ctx.real("0.05"), c + ctx.real("0.40"),
                               opts.locateTol, opts.grid);
    EndpointResult ep =
        parabolic_endpoint(ctx, fam, rec.tongue, TongueSide::upper, opts.endpointTol, opts.grid);
    rec.omega = ep.omega;
    rec.point = ep.point;

    FlatCircleMap map = fam.at(rec.omega);
    rec.radius = circle_dist(rec.point, map.xi()) / 2L;
    rec.baseBoxes = detail::orbit_boxes(map, rec.point, rec.radius, rec.b);

    Real off = rec.tongue.width() / Real::pow2(opts.passageOffsetExp, ctx.precision_bits());
    FlatCircleMap outMap = fam.at(rec.omega + off);
    IteratedForward sys{&outMap, 1};
    DistortionReport dist = parabolic_passage_distortion(
        ctx, sys, mod1(rec.point - rec.radius), mod1(rec.point + rec.radius),
        opts.passageSamples);
    rec.K = dist.K;

    std::vector<Real> probes{map.c(), map.d(), rec.point};
    GapReport gap = gap_bound(map, probes, opts.gapIterations, std::max(rec.K, 1.0));
    rec.deltaGap = gap.deltaGap;

    rec.roofCap = rec.roofFloor = detail::roof_over_box(roof, map, rec.baseBoxes[0]);
    return rec;
}

// Inductive step: aim the rotation number of g at (p a + 1)/(a b), take the
// upper parabolic endpoint of that tongue, rebuild neighborhoods, and
// certify that the new flow still spends its mandated time share over every
// recorded stage's boxes.  Multipliers that fail any certification double
// up to the cap.
inline StageRecord liouville_stage(const NumericContext& ctx, const TongueFamily& fam,
                                   const Roof& roof, const std::vector<StageRecord>& history,
                                   long a, const StageOptions& opts) {
    if (history.empty()) throw ConfigError("stage history starts with initial_stage");
    if (a < 2) throw ConfigError("stage multiplier must be at least 2");
    const StageRecord& prev = history.back();
    std::string diagnostics;
    long tries = 0;

    for (long aTry = a; aTry <= opts.aCap; aTry *= 2, ++tries) {
        long b2 = prev.b * aTry;
        long p2 = prev.p * aTry + 1;

        // bracket: start just above the previous endpoint, expand until the
        // scan certifies the far end is past the new tongue
        Real lo = prev.omega + opts.endpointTol * 4L;
        Real step = ctx.real("1e-5");
        Real hi = lo + step;
        int expansions = 0;
        while (!(scan_lock(ctx, fam.at(hi), p2, b2, opts.grid).minGap > 0L)) {
            step = step * 2L;
            hi = hi + step;
            if (++expansions > 60) break;
        }

        StageRecord rec(ctx.precision_bits());
        Real epTol = opts.endpointTol;
        try {
            // successive tongues thin out superlinearly; keep shrinking the
            // bisection tolerance until the scan resolves this one
            Real lt = opts.locateTol;
            for (;;) {
                try {
                    rec.tongue = locate_tongue(ctx, fam, p2, b2, lo, hi, lt, opts.grid);
                    break;
                } catch (const TongueNotFound&) {
                    lt = lt / 1024L;
                    if (lt < ctx.real("1e-45")) throw;
                }
            }
            epTol = min(epTol, rec.tongue.width() / Real::pow2(13, ctx.precision_bits()));
            EndpointResult ep =
                parabolic_endpoint(ctx, fam, rec.tongue, TongueSide::upper, epTol, opts.grid);
            rec.omega = ep.omega;
            rec.point = ep.point;
        } catch (const Error& e) {
            diagnostics += "a=" + std::to_string(aTry) + ": " + e.what() + "\n";
            continue;
        }
        rec.n = prev.n + 1;
        rec.p = p2;
        rec.b = b2;
        rec.a = aTry;
        rec.retries = tries;
        rec.cList = prev.cList;
        rec.cList.push_back(stage_constant(rec.n));

        FlatCircleMap map = fam.at(rec.omega);
        // cycle spacing is read just inside, where the orbit is transverse
        CycleInfo cyc = find_cycle(ctx, fam.at(rec.omega - epTol), p2, b2, opts.grid);
        Real nearest(ctx.precision_bits());
        bool haveNearest = false;
        for (const Real& y : cyc.orbit) {
            Real d = circle_dist(y, rec.point);
            if (d.is_zero()) continue;
            if (!haveNearest || d < nearest) {
                nearest = d;
                haveNearest = true;
            }
        }
        rec.radius =
            haveNearest ? nearest / 2L : circle_dist(rec.point, map.xi()) / 2L;
        rec.baseBoxes = detail::orbit_boxes(map, rec.point, rec.radius, rec.b);

        // condition (4): for every recorded stage i < n, the share over its
        // boxes must beat c_i ... c_(n-1)
        std::vector<const StageRecord*> tracked;
        for (const StageRecord& h : history) tracked.push_back(&h);
        std::vector<Real> seeds{(map.c() + map.d()) / 2L, rec.point};
        bool certified = true;
        try {
            for (size_t hz = 0; hz < opts.horizons.size(); ++hz) {
                // the window has to cover several periods of the new cycle
                double horizon =
                    std::max(opts.horizons[hz], std::ldexp(8.0, 2 * static_cast<int>(hz)) *
                                                    static_cast<double>(rec.b));
                for (int seedIdx = 0; seedIdx < 2 && certified; ++seedIdx) {
                    std::vector<double> share =
                        detail::box_fractions(map, roof, tracked, seeds[seedIdx], horizon);
                    for (size_t i = 0; i < tracked.size(); ++i) {
                        double bound = 1;
                        for (int j = tracked[i]->n; j < rec.n; ++j) bound *= stage_constant(j);
                        rec.fractions.push_back(
                            {tracked[i]->n, horizon, seedIdx, share[i], bound});
                        if (!(share[i] > bound)) {
                            certified = false;
                            diagnostics += "a=" + std::to_string(aTry) + ": t_A" +
                                           std::to_string(tracked[i]->n) + " share " +
                                           std::to_string(share[i]) + " <= bound " +
                                           std::to_string(bound) + " at horizon " +
                                           std::to_string(horizon) + "\n";
                        }
                    }
                }
                if (!certified) break;
            }
        } catch (const OrbitHitSingularity& e) {
            certified = false;
            diagnostics += "a=" + std::to_string(aTry) + ": occupancy: " + e.what() + "\n";
        }
        if (!certified) continue;

        // distortion through the fresh parabolic channel, just outside; the
        // crawl iterates f^b so successive iterates stay inside the channel
        Real off = rec.tongue.width() / Real::pow2(opts.passageOffsetExp, ctx.precision_bits());
        FlatCircleMap outMap = fam.at(rec.omega + off);
        IteratedForward sys{&outMap, rec.b};
        try {
            DistortionReport dist = parabolic_passage_distortion(
                ctx, sys, mod1(rec.point - rec.radius), mod1(rec.point + rec.radius),
                opts.passageSamples);
            rec.K = dist.K;
        } catch (const Error& e) {
            diagnostics += "a=" + std::to_string(aTry) + ": passage: " + e.what() + "\n";
        }

        std::vector<Real> probes{map.c(), map.d(), rec.point};
        GapReport gap = gap_bound(map, probes, opts.gapIterations, std::max(rec.K, 1.0));
        rec.deltaGap = gap.deltaGap;

        rec.roofCap = rec.roofFloor = detail::roof_over_box(roof, map, rec.baseBoxes[0]);
        for (const CircleInterval& box : rec.baseBoxes) {
            double tau = detail::roof_over_box(roof, map, box);
            rec.roofCap = std::max(rec.roofCap, tau);
            rec.roofFloor = std::min(rec.roofFloor, tau);
        }
        for (const CircleInterval& box : rec.baseBoxes) {
            bool inside = false;
            for (const CircleInterval& pbox : prev.baseBoxes)
                if (pbox.contains(box.lo) && pbox.contains(mod1(box.lo + box.len))) {
                    inside = true;
                    break;
                }
            if (!inside) ++rec.offTongueCount;
        }
        return rec;
    }
    throw StageFailed("no admissible multiplier up to " + std::to_string(opts.aCap) + "\n" +
                      diagnostics);
}

} // namespace cherry
