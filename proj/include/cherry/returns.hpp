#pragma once

// Closest-return tables over the orbit of the critical value, invariant
// masses of dynamical partitions through rigid-rotation arc lengths, the
// integrability diagnostic for the return-time roof, derivative expansion
// scans off the preimage tower of the flat interval, and the coverage of
// the circle by the forward inverse images of the gap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "flatmap.hpp"
#include "rotation.hpp"

namespace cherry {

// return-time profile tau = tau0 + coef * (-log dist to the singular point).
// coef = 1/log(lambda_u) is the linear-saddle transit clock, so the roof and
// the exit power law share one exponent convention; coef = 0 bounds the roof.
struct Roof {
    Real tau0;
    Real coef;

    static Roof for_saddle(const NumericContext& ctx, const SaddleSpec& saddle) {
        if (!(saddle.lambda_u > 1L)) throw ConfigError("unstable rate must exceed 1");
        return {ctx.one(), ctx.one() / log(saddle.lambda_u)};
    }
    static Roof constant(const Real& tau0) {
        if (!(tau0 > 0L)) throw ConfigError("roof floor must be positive");
        return {tau0, Real::from_long(0, tau0.prec())};
    }
    Real eval(const LogMag& dist) const { return tau0 - coef * dist.logAbs; }
};

// forward orbit x_1..x_n of a start point
template <class View>
std::vector<Real> orbit_points(const View& view, const Real& x0, long n) {
    std::vector<Real> out;
    out.reserve(static_cast<size_t>(n));
    Real x = x0;
    for (long i = 1; i <= n; ++i) {
        x = view.advance(x);
        out.push_back(x);
    }
    return out;
}

// orbit of the critical value; everything downstream hangs off it
inline std::vector<Real> critical_orbit(const FlatCircleMap& map, long n) {
    ForwardView view{&map};
    return orbit_points(view, map.xi(), n);
}

struct ReturnRow {
    int level = 0;              // n
    int64_t q = 0;              // q_n
    int64_t qNext = 0;          // q_{n+1}
    Real x;                     // orbit point at time q_n
    LogMag dist;                // distance from x back to the base point
    Real mass;                  // ||q_n * rho||
    Real singularMass;          // M_n = mass * (-log dist)
    std::optional<Real> ratio;  // dist_n / dist_{n-2}
    int side = 0;               // sign of the signed gap base -> x

    explicit ReturnRow(long P) : x(P), dist(LogMag::zero(P)), mass(P), singularMass(P) {}
};

struct ClosestReturnTable {
    Real rho;                // measured rotation number
    bool exactRho = false;   // plateau or bitwise-periodic lock
    int64_t p = 0;
    int64_t q = 1;           // rho = p/q when exactRho
    ContinuedFraction cf;
    std::vector<ReturnRow> rows;
    long collapseStep = -1;  // first orbit index pinned back onto the base point
    bool collapseViaFlat = false;  // collapse detected through a flat-interval transit
    long strainedLevels = 0;  // rows whose distance fell below 2^(-P/2)
    long refinedBits = 0;    // nonzero when a wider re-run replaced the distances
    long precisionBits = 0;

    explicit ClosestReturnTable(long P) : rho(P), precisionBits(P) {}
};

struct ReturnOptions {
    long maxIter = 1L << 21;     // rotation measurement budget
    int64_t directCap = 100000;  // largest level cross-checked by direct minimization
};

namespace detail {

// denominator ladder: convergents with strictly increasing q, keeping the
// better approximation when q repeats (0/1 versus 1/1)
inline std::vector<Convergent> return_levels(const std::vector<long>& quotients) {
    std::vector<Convergent> out;
    for (const Convergent& c : convergents(quotients)) {
        if (c.q < 1) continue;
        if (!out.empty() && out.back().q == c.q)
            out.back() = c;
        else if (out.empty() || c.q > out.back().q)
            out.push_back(c);
    }
    return out;
}

// ||q_n * p/q|| in exact integer arithmetic
inline Real rational_qnorm(int64_t qn, int64_t p, int64_t q, long P) {
    __int128 m = (static_cast<__int128>(qn) * p) % q;
    if (m < 0) m += q;
    int64_t mm = static_cast<int64_t>(m);
    int64_t best = mm < q - mm ? mm : q - mm;
    return Real::from_long(best, P) / Real::from_long(q, P);
}

} // namespace detail

// Table of closest returns of the orbit of `base` to itself.  Levels come
// from the convergents of the measured rotation number; each level q_n with
// q_n <= directCap is certified to minimize the distance over all iterates
// up to q_n.  The walk stops early when the orbit returns exactly (rational
// lock), so every emitted row has positive distance and a known q_{n+1}.
template <class View>
ClosestReturnTable closest_returns(const NumericContext& ctx, const View& view, const Real& base,
                                   int depth, const ReturnOptions& opt = {}) {
    if (depth < 1) throw ConfigError("table depth must be at least 1");
    long P = view.precision_bits();
    ClosestReturnTable table(P);

    RotationStats stats = measure_rotation(ctx, view, base, opt.maxIter);
    table.rho = stats.estimate;
    table.exactRho = stats.exact;
    if (stats.exact) {
        table.p = stats.p;
        table.q = stats.q;
        table.cf = continued_fraction(stats.p, stats.q);
    } else {
        table.cf = continued_fraction(stats.estimate, depth + 3);
    }

    std::vector<Convergent> levels = detail::return_levels(table.cf.a);
    size_t want = static_cast<size_t>(depth) + 1;  // one extra level supplies q_{n+1}
    if (levels.size() < want) {
        if (!table.exactRho && table.cf.exhausted)
            throw PrecisionExhausted("continued fraction too short for requested depth");
        want = levels.size();
    }
    if (want < 2) throw CombinatoricsError("no closest-return level available");
    size_t rowCount = want - 1;

    LogMag strain = to_logmag(Real::pow2(-(P / 2), P));
    LogMag runMin = to_logmag(ctx.real(2));
    int64_t runArg = 0;
    size_t nextRow = 0;
    Real x = base;
    // exact locks keep walking past the last row to pin down the collapse step
    int64_t horizon = table.exactRho ? table.q : std::numeric_limits<int64_t>::max();

    for (int64_t i = 1; i <= horizon; ++i) {
        x = view.advance(x);
        Real gap = signed_gap(base, x);
        LogMag dist = to_logmag(gap);
        if (dist.sign == 0) {  // bitwise periodic return: the ladder ends here
            table.collapseStep = i;
            table.collapseViaFlat = false;
            break;
        }
        LogMag adist{1, dist.logAbs};
        bool record = lm_less(adist, runMin);
        if (nextRow < rowCount && i == levels[nextRow].q) {
            if (!record && i <= opt.directCap)
                throw CombinatoricsError("direct minimization contradicts the convergent level",
                                         static_cast<long>(nextRow) + 1, i, runArg);
            if (!table.rows.empty() && !lm_less(adist, table.rows.back().dist))
                throw CombinatoricsError("closest-return distances failed to decrease",
                                         static_cast<long>(nextRow) + 1, i, runArg);
            ReturnRow row(P);
            row.level = static_cast<int>(nextRow) + 1;
            row.q = levels[nextRow].q;
            row.qNext = levels[nextRow + 1].q;
            row.x = mod1(x);
            row.dist = adist;
            row.side = gap.sgn();
            row.mass = table.exactRho ? detail::rational_qnorm(row.q, table.p, table.q, P)
                                      : qnorm(table.rho, row.q);
            row.singularMass = row.mass * (-adist.logAbs);
            if (table.rows.size() >= 2)
                row.ratio = from_logmag(lm_div(adist, table.rows[table.rows.size() - 2].dist));
            if (lm_abs_less(adist, strain)) ++table.strainedLevels;
            table.rows.push_back(std::move(row));
            ++nextRow;
        }
        if (record) {
            runMin = adist;
            runArg = i;
        }
        if (view.flat_hit(x)) {  // next image is pinned to the critical value
            table.collapseStep = i + 1;
            table.collapseViaFlat = true;
            break;
        }
        if (nextRow == rowCount && !table.exactRho) break;
    }
    return table;
}

// Map front end.  Distances below 2^(-P/2) keep only half their bits through
// the plain subtraction, so the bookkeeping is redone once with the same
// binary parameters embedded at twice the precision (widening is exact).
inline ClosestReturnTable closest_returns(const NumericContext& ctx, const FlatCircleMap& map,
                                          int depth, const ReturnOptions& opt = {}) {
    ForwardView view{&map};
    ClosestReturnTable table = closest_returns(ctx, view, map.xi(), depth, opt);
    // a bitwise return that skipped the flat interval is an underflow symptom
    // on a flat map, never a genuine cycle; widen for that too
    bool suspectCollapse = table.collapseStep > 0 && !table.collapseViaFlat;
    if (table.strainedLevels == 0 && !suspectCollapse) return table;

    long wideBits = 2 * ctx.precision_bits();
    NumericContext wide(wideBits);
    FlatCircleMap wmap(wide, with_precision(map.c(), wideBits), with_precision(map.d(), wideBits),
                       with_precision(map.r(), wideBits), with_precision(map.epsilon(), wideBits),
                       with_precision(map.omega(), wideBits));
    ForwardView wview{&wmap};
    ClosestReturnTable wtable = closest_returns(wide, wview, wmap.xi(), depth, opt);
    long P = ctx.precision_bits();
    ClosestReturnTable out(P);
    out.rho = with_precision(wtable.rho, P);
    out.exactRho = wtable.exactRho;
    out.p = wtable.p;
    out.q = wtable.q;
    out.cf = wtable.cf;
    out.collapseStep = wtable.collapseStep;
    out.collapseViaFlat = wtable.collapseViaFlat;
    out.strainedLevels = wtable.strainedLevels;  // rows still strained after widening
    out.refinedBits = wideBits;
    for (const ReturnRow& wrow : wtable.rows) {
        ReturnRow row(P);
        row.level = wrow.level;
        row.q = wrow.q;
        row.qNext = wrow.qNext;
        row.x = with_precision(wrow.x, P);
        row.dist = LogMag{wrow.dist.sign, with_precision(wrow.dist.logAbs, P + 64)};
        row.mass = with_precision(wrow.mass, P);
        row.singularMass = with_precision(wrow.singularMass, P);
        if (wrow.ratio) row.ratio = with_precision(*wrow.ratio, P);
        row.side = wrow.side;
        out.rows.push_back(std::move(row));
    }
    return out;
}

inline std::string to_csv(const ClosestReturnTable& table) {
    std::string out = "n,q_n,dist_qn_log10,mass_n,M_n,ratio_n\n";
    Real ln10 = log(Real::from_long(10, table.precisionBits));
    char buf[192];
    for (const ReturnRow& row : table.rows) {
        double distLog10 = (row.dist.logAbs / ln10).to_double();
        if (row.ratio) {
            std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%.17g\n", row.level,
                          static_cast<long long>(row.q), distLog10, row.mass.to_double(),
                          row.singularMass.to_double(), row.ratio->to_double());
        } else {
            std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,\n", row.level,
                          static_cast<long long>(row.q), distLog10, row.mass.to_double(),
                          row.singularMass.to_double());
        }
        out += buf;
    }
    return out;
}

enum class MassTrend { DIVERGENT_TREND, CONVERGENT_TREND, INCONCLUSIVE };

inline const char* to_string(MassTrend t) {
    switch (t) {
        case MassTrend::DIVERGENT_TREND: return "DIVERGENT_TREND";
        case MassTrend::CONVERGENT_TREND: return "CONVERGENT_TREND";
        default: return "INCONCLUSIVE";
    }
}

// verdict thresholds: geometric decay is read off the log fit, a flat
// plateau off the plain fit of the terms themselves
inline constexpr double kConvergentSlope = -0.1;
inline constexpr double kDivergentSlopeBand = 0.02;
inline constexpr double kConvergentTailCap = 0.5;

struct MassSeriesReport {
    MassTrend trend = MassTrend::INCONCLUSIVE;
    double slope = 0;       // least-squares slope of log M_n over the fit window
    double linSlope = 0;    // least-squares slope of M_n itself over the window
    double intercept = 0;
    double ratio = 1;       // exp(slope), per-level decay factor
    double floorValue = 0;  // smallest M_n inside the window
    double tail = 0;        // geometric tail past the table (convergent fits)
    int fitLo = 0;
    int fitHi = 0;
    std::vector<double> logMass;  // natural log of M_n for every level
};

// Trend of the singular mass terms.  The series sums the roof over the
// closest-return tower, so a positive floor marks a divergent roof integral
// and geometric decay marks an integrable one.  Fit window defaults to the
// last four levels; fewer than six levels is inconclusive by fiat.
inline MassSeriesReport singular_mass_series(const ClosestReturnTable& table, int fitLo = 0,
                                             int fitHi = 0) {
    MassSeriesReport rep;
    int n = static_cast<int>(table.rows.size());
    for (const ReturnRow& row : table.rows)
        rep.logMass.push_back(log(row.singularMass).to_double());
    if (fitHi <= 0) {
        fitHi = n;
        fitLo = n - 3;
    }
    if (fitLo < 1) fitLo = 1;
    rep.fitLo = fitLo;
    rep.fitHi = fitHi;
    if (n < 6 || fitHi > n || fitHi - fitLo < 1) return rep;

    double sx = 0, sy = 0, syl = 0, sxx = 0, sxy = 0, sxyl = 0, cnt = 0;
    double floorLog = rep.logMass[fitLo - 1];
    for (int lv = fitLo; lv <= fitHi; ++lv) {
        double y = rep.logMass[lv - 1];
        double yl = std::exp(y);
        sx += lv;
        sy += y;
        syl += yl;
        sxx += static_cast<double>(lv) * lv;
        sxy += lv * y;
        sxyl += lv * yl;
        cnt += 1;
        floorLog = std::min(floorLog, y);
    }
    double det = cnt * sxx - sx * sx;
    rep.slope = (cnt * sxy - sx * sy) / det;
    rep.linSlope = (cnt * sxyl - sx * syl) / det;
    rep.intercept = (sy - rep.slope * sx) / cnt;
    rep.ratio = std::exp(rep.slope);
    rep.floorValue = std::exp(floorLog);
    rep.tail = rep.ratio < 1 ? std::exp(rep.intercept + rep.slope * (n + 1)) / (1 - rep.ratio)
                             : std::numeric_limits<double>::infinity();

    if (rep.slope < kConvergentSlope && rep.tail < kConvergentTailCap)
        rep.trend = MassTrend::CONVERGENT_TREND;
    else if (std::abs(rep.linSlope) < kDivergentSlopeBand && rep.floorValue > 0)
        rep.trend = MassTrend::DIVERGENT_TREND;
    return rep;
}

struct QuadratureSums {
    Real far;      // integrand at the arc endpoint farther from the base point
    Real mid;      // integrand at the arc midpoint
    Real massSum;  // rigid masses; telescopes to 1
    long points = 0;

    explicit QuadratureSums(long P) : far(P), mid(P), massSum(P) {}
};

// Partition the circle by the first n orbit points and weight each arc with
// the rigid-rotation arc length between the matching rotation iterates: the
// semi-conjugacy preserves circular order, so that length is exactly the
// invariant mass of the arc.  The walk stops early at an exact return, where
// the partition saturates.
template <class View, class F>
QuadratureSums quadrature_over_orbit(const NumericContext& ctx, const View& view, const Real& base,
                                     const Real& rho, long n, F&& integrand) {
    long P = view.precision_bits();
    std::vector<Real> pts;
    pts.reserve(static_cast<size_t>(n));
    Real x = base;
    for (long i = 1; i <= n; ++i) {
        x = view.advance(x);
        if (circle_dist(x, base).is_zero()) break;
        pts.push_back(mod1(x));
        if (view.flat_hit(x)) break;
    }
    long m = static_cast<long>(pts.size());
    if (m < 2) throw ConfigError("need at least two partition points");

    std::vector<long> order(static_cast<size_t>(m));
    for (long k = 0; k < m; ++k) order[static_cast<size_t>(k)] = k;
    std::sort(order.begin(), order.end(),
              [&pts](long a, long b) { return pts[static_cast<size_t>(a)] < pts[static_cast<size_t>(b)]; });

    QuadratureSums sums(P);
    Real half = ctx.real("0.5");
    for (long k = 0; k < m; ++k) {
        long ia = order[static_cast<size_t>(k)];
        long ib = order[static_cast<size_t>((k + 1) % m)];
        const Real& a = pts[static_cast<size_t>(ia)];
        const Real& b = pts[static_cast<size_t>(ib)];
        Real gap = mod1(b - a);  // the wrap arc lands here too: b < a gives b - a + 1
        Real mass = mod1(mod1(rho * Real::from_long(ib + 1, P)) - mod1(rho * Real::from_long(ia + 1, P)));
        Real farPoint = circle_dist(a, base) > circle_dist(b, base) ? a : b;
        Real midPoint = mod1(a + gap * half);
        if (circle_dist(midPoint, base).is_zero()) midPoint = mod1(a + gap * half * half);
        sums.far = sums.far + integrand(farPoint) * mass;
        sums.mid = sums.mid + integrand(midPoint) * mass;
        sums.massSum = sums.massSum + mass;
    }
    sums.points = m;
    return sums;
}

struct TauIntegralReport {
    ClosestReturnTable table;
    std::vector<Real> partialFar;  // per level n = 2..depth: partition by q_n points
    std::vector<Real> partialMid;
    Real integralFar;  // partition by quadPoints orbit points
    Real integralMid;
    Real massSum;
    MassSeriesReport series;
    double tailBound = 0;
    MassTrend verdict = MassTrend::INCONCLUSIVE;

    TauIntegralReport(ClosestReturnTable t, long P)
        : table(std::move(t)), integralFar(P), integralMid(P), massSum(P) {}
};

// Estimate of the roof integral against the invariant measure.  Sums are
// reported for two arc representatives because the roof is only known up to
// order near the singular point; the verdict must not depend on the choice.
inline TauIntegralReport tau_integral(const NumericContext& ctx, const FlatCircleMap& map,
                                      const Roof& roof, int depth, long quadPoints,
                                      const ReturnOptions& opt = {}) {
    if (quadPoints < 2) throw ConfigError("quadrature needs at least two points");
    ForwardView view{&map};
    TauIntegralReport rep(closest_returns(ctx, map, depth, opt), ctx.precision_bits());
    const Real& base = map.xi();
    auto tau = [&](const Real& pt) { return roof.eval(to_logmag(circle_dist(pt, base))); };

    for (size_t lv = 1; lv < rep.table.rows.size(); ++lv) {
        QuadratureSums sums =
            quadrature_over_orbit(ctx, view, base, rep.table.rho, rep.table.rows[lv].q, tau);
        rep.partialFar.push_back(sums.far);
        rep.partialMid.push_back(sums.mid);
    }
    QuadratureSums fine = quadrature_over_orbit(ctx, view, base, rep.table.rho, quadPoints, tau);
    rep.integralFar = fine.far;
    rep.integralMid = fine.mid;
    rep.massSum = fine.massSum;

    rep.series = singular_mass_series(rep.table);
    rep.verdict = rep.series.trend;
    if (rep.series.trend == MassTrend::CONVERGENT_TREND && rep.table.rows.size() >= 2) {
        const ReturnRow& last = rep.table.rows.back();
        const ReturnRow& prev = rep.table.rows[rep.table.rows.size() - 2];
        double rq = (last.mass / prev.mass).to_double();
        double rM = rep.series.ratio;
        double tau0 = roof.tau0.to_double();
        double coef = roof.coef.to_double();
        rep.tailBound = tau0 * last.mass.to_double() * rq / (1 - rq) +
                        coef * last.singularMass.to_double() * rM / (1 - rM);
    } else {
        rep.tailBound = std::numeric_limits<double>::infinity();
    }
    return rep;
}

struct ExpansionReport {
    bool found = false;
    long N = 0;
    long k = 0;
    double alpha = 0;  // smallest derivative of the N-step composition off the tower
    double logAlpha = 0;
    long admissible = 0;  // grid points outside the excluded tower at the found k
    long gridSize = 0;
    double bestLog = -std::numeric_limits<double>::infinity();  // diagnostics when not found
    long bestN = 0;
    long bestK = 0;
};

// Scan for uniform expansion of iterated forward derivatives away from the
// preimage tower of the flat interval.  A point belongs to tower level i
// when its i-th forward image lands in [c,d]; a point inside the first k
// levels is excluded for that k.  Products accumulate in log space; an orbit
// that reaches the flat interval zeroes its product and sinks the minimum.
inline ExpansionReport expansion_search(const NumericContext& ctx, const FlatCircleMap& map,
                                        long kMax, long Ncap, long gridSize) {
    if (kMax < 0 || Ncap < 2 || gridSize < 16) throw ConfigError("degenerate expansion scan");
    long P = ctx.precision_bits();
    ExpansionReport rep;
    rep.gridSize = gridSize;
    ForwardView view{&map};

    struct Point {
        Real x;
        LogMag product;
        long exclusion;  // first tower level containing the point, kMax+1 if none
    };
    std::vector<Point> points;
    points.reserve(static_cast<size_t>(gridSize));
    Real step = ctx.one() / gridSize;
    for (long j = 0; j < gridSize; ++j) {
        Real x0 = (Real::from_long(j, P) + ctx.real("0.5")) * step;
        long excl = kMax + 1;
        Real y = x0;
        for (long i = 0; i <= kMax; ++i) {
            if (view.flat_hit(y)) {
                excl = i;
                break;
            }
            y = map.eval_f(y);
        }
        if (excl == 0) continue;  // inside the flat interval itself, excluded everywhere
        points.push_back(Point{x0, LogMag::one(P), excl});
    }

    std::vector<long> snaps;
    for (long nv = 2; nv <= Ncap; nv *= 2) snaps.push_back(nv);
    const double inf = std::numeric_limits<double>::infinity();
    // minLog[s][lv]: minimum log-product at snapshot s over points with exclusion == lv
    std::vector<std::vector<double>> minLog(snaps.size(),
                                            std::vector<double>(static_cast<size_t>(kMax) + 2, inf));

    size_t snapIdx = 0;
    for (long n = 1; n <= Ncap && snapIdx < snaps.size(); ++n) {
        for (Point& pt : points) {
            LogMag d = map.deriv_f(pt.x);
            pt.product = lm_mul(pt.product, d);
            pt.x = map.eval_f(pt.x);
        }
        if (n == snaps[snapIdx]) {
            for (const Point& pt : points) {
                double lg = pt.product.sign == 0 ? -inf : pt.product.logAbs.to_double();
                double& slot = minLog[snapIdx][static_cast<size_t>(pt.exclusion)];
                slot = std::min(slot, lg);
            }
            ++snapIdx;
        }
    }

    std::vector<long> admissible(static_cast<size_t>(kMax) + 1, 0);
    for (const Point& pt : points)
        for (long k = 0; k < pt.exclusion && k <= kMax; ++k) ++admissible[static_cast<size_t>(k)];

    for (size_t s = 0; s < snaps.size(); ++s) {
        // admissible at k means exclusion > k, so the grid minimum for k is a
        // suffix minimum over the per-level minima strictly above k
        std::vector<double> gridMin(static_cast<size_t>(kMax) + 1, inf);
        double running = inf;
        for (long lv = kMax + 1; lv >= 1; --lv) {
            running = std::min(running, minLog[s][static_cast<size_t>(lv)]);
            gridMin[static_cast<size_t>(lv - 1)] = running;
        }
        for (long k = 0; k <= kMax; ++k) {
            double lg = gridMin[static_cast<size_t>(k)];
            if (admissible[static_cast<size_t>(k)] < 1 || lg == inf) continue;
            if (lg > rep.bestLog) {
                rep.bestLog = lg;
                rep.bestN = snaps[s];
                rep.bestK = k;
            }
            if (!rep.found && lg > 0) {
                rep.found = true;
                rep.N = snaps[s];
                rep.k = k;
                rep.logAlpha = lg;
                rep.alpha = std::exp(lg);
                rep.admissible = admissible[static_cast<size_t>(k)];
            }
        }
        if (rep.found) break;
    }
    return rep;
}

namespace detail {

// ordered registry of circular arcs; touching endpoints are fine, interior
// overlap is a correctness failure in the caller's dynamics
class ArcRegistry {
  public:
    void insert(const Real& lo, const Real& len, long step) {
        Real a = mod1(lo);
        Real b = a + len;
        Real one = Real::from_long(1, a.prec());
        if (b > one) {
            insert_leg(a, one, step);
            insert_leg(one - one, b - one, step);
        } else {
            insert_leg(a, b, step);
        }
    }

  private:
    struct Leg {
        Real lo, hi;
        bool operator<(const Leg& o) const { return lo < o.lo; }
    };
    std::set<Leg> legs_;

    void insert_leg(const Real& lo, const Real& hi, long step) {
        if (!(hi > lo)) return;
        Leg leg{lo, hi};
        auto it = legs_.lower_bound(leg);
        if (it != legs_.end() && it->lo < hi)
            throw DisjointnessError("arc overlaps its right neighbor", step);
        if (it != legs_.begin() && std::prev(it)->hi > lo)
            throw DisjointnessError("arc overlaps its left neighbor", step);
        legs_.insert(it, std::move(leg));
    }
};

} // namespace detail

struct CoverageReport {
    Real total;  // accumulated length of the pairwise-disjoint gap images
    long steps = 0;
    double minLength = 1;  // smallest image seen

    explicit CoverageReport(long P) : total(P) {}
};

// Total length of the forward inverse images of the open gap (c,d).  The
// images are pairwise disjoint because the inverse branch never maps back
// into the gap; any overlap is a map or precision bug and throws.
inline CoverageReport wandering_coverage(const NumericContext& ctx, const FlatCircleMap& map,
                                         long N) {
    if (N < 0) throw ConfigError("step count must be nonnegative");
    CoverageReport rep(ctx.precision_bits());
    rep.total = ctx.zero();
    rep.steps = N;
    Real cap = ctx.one() + ctx.eps(24);
    detail::ArcRegistry registry;
    Real a = map.c(), b = map.d();
    Real len = map.d() - map.c();
    for (long n = 0; n <= N; ++n) {
        if (n > 0) {
            // the inverse branch is only injective off the singular point, so an
            // image arc that swallowed it cannot be pulled back any further
            if (mod1(map.xi() - a) <= len) throw OrbitHitSingularity("gap image reached the singular point", n);
            a = map.eval_g(a);
            b = map.eval_g(b);
            len = mod1(b - a);
        }
        registry.insert(a, len, n);
        rep.total = rep.total + len;
        if (rep.total > cap) throw DisjointnessError("coverage exceeded the circle", n);
        rep.minLength = std::min(rep.minLength, len.to_double());
    }
    return rep;
}

} // namespace cherry
