#pragma once

// Suspension of the inverse branch g under the log-singular roof: Birkhoff
// evolution, saddle-box occupancy, Jacobian growth, and the empirical
// classification of the physical measure.
//
// One suspension pass starts at a section point x, flows for tau(x) and
// returns at g(x).  The pass carries the orbit through the linear saddle
// chart: the stable coordinate starts at order one and contracts by
// lambda_s per unit time, the unstable coordinate starts at the entry
// distance u = dist(x, xi) and expands by lambda_u per unit time.  All box
// bookkeeping below is the closed form of that two-exponential clock.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cherry/returns.hpp"

namespace cherry {

struct SuspensionFlow {
    FlatCircleMap map;
    SaddleSpec saddle;
    Roof roof;

    static SuspensionFlow over(const NumericContext& ctx, const FlatCircleMap& map,
                               const SaddleSpec& saddle) {
        return {map, saddle, Roof::for_saddle(ctx, saddle)};
    }
    // same saddle rates, explicit roof; lets tests degrade the singular part
    static SuspensionFlow with_roof(const FlatCircleMap& map, const SaddleSpec& saddle, Roof roof) {
        return {map, saddle, std::move(roof)};
    }

    Real roof_at(const Real& x) const {
        LogMag d = to_logmag(circle_dist(x, map.xi()));
        if (d.sign == 0) throw OrbitHitSingularity("roof evaluated at the singular point", -1);
        return roof.eval(d);
    }
};

// Time a linear-saddle pass entering at unstable distance u spends inside
// the delta-box.  The stable coordinate reaches delta at t1, the unstable
// one leaves it at t2; the dwell is their gap, never negative.
inline double saddle_pass_occupancy(const SaddleSpec& saddle, double logU, double delta) {
    if (!(delta > 0 && delta < 1)) throw ConfigError("box radius must lie in (0,1)");
    double lnDelta = std::log(delta);
    double t1 = lnDelta / std::log(saddle.lambda_s.to_double());
    double t2 = (lnDelta - logU) / std::log(saddle.lambda_u.to_double());
    return t2 > t1 ? t2 - t1 : 0.0;
}
inline double saddle_pass_occupancy(const SaddleSpec& saddle, const Real& u, double delta) {
    LogMag m = to_logmag(u);
    if (m.sign == 0) throw ConfigError("entry distance must be positive");
    return saddle_pass_occupancy(saddle, m.logAbs.to_double(), delta);
}

enum class PhysicalVerdict { DIRAC_SADDLE, QUASI_MINIMAL, INCONCLUSIVE };

inline const char* to_string(PhysicalVerdict v) {
    switch (v) {
        case PhysicalVerdict::DIRAC_SADDLE: return "DIRAC_SADDLE";
        case PhysicalVerdict::QUASI_MINIMAL: return "QUASI_MINIMAL";
        default: return "INCONCLUSIVE";
    }
}

// classification thresholds on the occupancy fraction and the half-window
// agreement of the observable averages
inline constexpr double kDiracOccupancy = 0.9;
inline constexpr double kQuasiOccupancy = 0.5;
inline constexpr double kQuasiHalfWidth = 1e-2;

inline PhysicalVerdict classify_thresholds(double occupancy, double halfWidth) {
    if (occupancy >= kDiracOccupancy) return PhysicalVerdict::DIRAC_SADDLE;
    if (occupancy <= kQuasiOccupancy && halfWidth < kQuasiHalfWidth)
        return PhysicalVerdict::QUASI_MINIMAL;
    return PhysicalVerdict::INCONCLUSIVE;
}

// base-point observable: constant along suspension fibers, so its time
// average reduces to the roof-weighted return average
struct Observable {
    std::string name;
    std::function<double(const Real&)> fn;
};

inline std::vector<Observable> standard_observables(const FlatCircleMap& map) {
    std::vector<Observable> obs;
    const Real xi = map.xi();
    obs.push_back({"cos_dist", [xi](const Real& x) {
                       return std::cos(2 * std::numbers::pi * circle_dist(x, xi).to_double());
                   }});
    return obs;
}

struct BirkhoffReport {
    Real start;
    double horizon = 0;        // requested flow time T
    long returns = 0;          // completed passes inside [0, T]
    double occupancy = 0;      // box dwell summed over passes, clipped at T
    double occupancyFraction = 0;
    std::vector<std::string> names;
    std::vector<double> averages;    // roof-weighted over [0, T]
    std::vector<double> halfWidths;  // |average over [0,T/2] - average over [T/2,T]|
    double halfWidth = 0;            // largest of the above
    double minLogDist = 0;           // deepest pass seen, natural log
    PhysicalVerdict verdict = PhysicalVerdict::INCONCLUSIVE;
    std::vector<std::pair<double, double>> trace;  // (t, occupancy/t) checkpoints

    explicit BirkhoffReport(long P) : start(P) {}
};

// Flow the suspension for time T from x0: iterate g, add the roof per pass,
// split every pass across the half-window boundary and the horizon, and sum
// the saddle-box dwell with the box window cut to the part of the pass that
// actually happened.  tracePoints > 0 records that many running-occupancy
// checkpoints for plotting.
inline BirkhoffReport evolve_birkhoff(const NumericContext& ctx, const SuspensionFlow& flow,
                                      const Real& x0, double T,
                                      const std::vector<Observable>& observables, double delta,
                                      long tracePoints = 0) {
    if (!(T > 0)) throw ConfigError("flow horizon must be positive");
    if (!(delta > 0 && delta < 1)) throw ConfigError("box radius must lie in (0,1)");
    BirkhoffReport rep(ctx.precision_bits());
    rep.start = x0;
    rep.horizon = T;
    for (const Observable& o : observables) rep.names.push_back(o.name);

    double lnDelta = std::log(delta);
    double lnLs = std::log(flow.saddle.lambda_s.to_double());
    double lnLu = std::log(flow.saddle.lambda_u.to_double());
    double t1 = lnDelta / lnLs;

    size_t m = observables.size();
    std::vector<double> sumLo(m, 0.0), sumHi(m, 0.0);
    double half = T / 2;
    InverseView g{&flow.map};
    Real x = x0;
    double t = 0;
    long n = 0;
    while (t < T) {
        LogMag dm = to_logmag(circle_dist(x, flow.map.xi()));
        if (dm.sign == 0) throw OrbitHitSingularity("orbit reached the singular point", n);
        double logU = dm.logAbs.to_double();
        double tau = flow.roof.eval(dm).to_double();
        double lived = std::min(tau, T - t);

        double t2 = (lnDelta - logU) / lnLu;
        double dwell = std::min(t2, lived) - t1;
        if (dwell > 0) rep.occupancy += dwell;
        rep.minLogDist = std::min(rep.minLogDist, logU);

        for (size_t i = 0; i < m; ++i) {
            double v = observables[i].fn(x);
            double lo = std::min(std::max(half - t, 0.0), lived);
            sumLo[i] += v * lo;
            sumHi[i] += v * (lived - lo);
        }
        t += lived;
        if (tracePoints > 0 && t > 0 &&
            t >= (static_cast<double>(rep.trace.size()) + 1) * T / tracePoints)
            rep.trace.emplace_back(t, rep.occupancy / t);
        if (lived == tau) {
            ++n;
            x = g.advance(x);
        }
    }
    rep.returns = n;
    rep.occupancyFraction = rep.occupancy / T;
    for (size_t i = 0; i < m; ++i) {
        rep.averages.push_back((sumLo[i] + sumHi[i]) / T);
        double w = std::abs(sumLo[i] / half - sumHi[i] / (T - half));
        rep.halfWidths.push_back(w);
        rep.halfWidth = std::max(rep.halfWidth, w);
    }
    rep.verdict = classify_thresholds(rep.occupancyFraction, rep.halfWidth);
    return rep;
}

struct ClassifyReport {
    PhysicalVerdict verdict = PhysicalVerdict::INCONCLUSIVE;
    long dissent = 0;    // samples disagreeing with the majority
    long resampled = 0;  // seeds discarded for hitting the singularity
    std::vector<BirkhoffReport> samples;
};

// Majority verdict over deterministically seeded start points.  The seed
// stream is a fixed 64-bit LCG so reruns reproduce the samples bit for bit.
inline ClassifyReport classify_physical(const NumericContext& ctx, const SuspensionFlow& flow,
                                        long sampleCount, double T, double delta,
                                        std::uint64_t seed, long tracePoints = 0) {
    if (sampleCount < 1) throw ConfigError("need at least one sample");
    ClassifyReport rep;
    std::uint64_t state = seed * 6364136223846793005ULL + 1442695040888963407ULL;
    auto draw = [&state]() {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        std::uint64_t z = state;
        z ^= z >> 33;
        z *= 0xff51afd7ed558ccdULL;
        z ^= z >> 33;
        return z;
    };
    std::vector<Observable> obs = standard_observables(flow.map);
    long counts[3] = {0, 0, 0};
    for (long s = 0; s < sampleCount; ++s) {
        for (;;) {
            // top 53 bits of the draw, exactly representable as a double
            Real x0 = Real::from_double(static_cast<double>(draw() >> 11) *
                                            (1.0 / 9007199254740992.0),
                                        ctx.precision_bits());
            if (to_logmag(circle_dist(x0, flow.map.xi())).sign == 0) {
                ++rep.resampled;
                continue;
            }
            try {
                BirkhoffReport r = evolve_birkhoff(ctx, flow, x0, T, obs, delta, tracePoints);
                counts[static_cast<int>(r.verdict)]++;
                rep.samples.push_back(std::move(r));
            } catch (const OrbitHitSingularity&) {
                ++rep.resampled;
                continue;
            }
            break;
        }
    }
    int best = 0;
    for (int v = 1; v < 3; ++v)
        if (counts[v] > counts[best]) best = v;
    rep.verdict = static_cast<PhysicalVerdict>(best);
    rep.dissent = sampleCount - counts[best];
    return rep;
}

struct JacobianTrend {
    double slope = 0;  // fitted log-Jacobian growth per unit flow time
    int sign = 0;
    long passes = 0;
    double transitRate = 0;  // log(lambda_s * lambda_u), the saddle part per unit time
};

// Log-Jacobian along the suspension orbit: every pass contributes its dwell
// times the saddle divergence plus the smooth-arc stretch log Dg at the
// return point.  The slope is the least-squares fit of the running sum
// against flow time; the conservative saddle zeroes the transit term and
// the smooth part can be suppressed to isolate it.
inline JacobianTrend jacobian_trend(const NumericContext& ctx, const SuspensionFlow& flow,
                                    const Real& x0, double T, bool includeSmooth = true) {
    if (!(T > 0)) throw ConfigError("flow horizon must be positive");
    JacobianTrend trend;
    double divergence = std::log(flow.saddle.lambda_s.to_double()) +
                        std::log(flow.saddle.lambda_u.to_double());
    trend.transitRate = divergence;
    InverseView g{&flow.map};
    Real x = x0;
    double t = 0, J = 0;
    double st = 0, sj = 0, stt = 0, stj = 0;
    long n = 0;
    while (t < T) {
        LogMag dm = to_logmag(circle_dist(x, flow.map.xi()));
        if (dm.sign == 0) throw OrbitHitSingularity("orbit reached the singular point", n);
        double tau = flow.roof.eval(dm).to_double();
        double lived = std::min(tau, T - t);
        J += lived * divergence;
        if (includeSmooth && lived == tau) J += flow.map.deriv_g(x).logAbs.to_double();
        t += lived;
        st += t;
        sj += J;
        stt += t * t;
        stj += t * J;
        ++n;
        if (lived < tau) break;
        x = g.advance(x);
    }
    trend.passes = n;
    double det = n * stt - st * st;
    trend.slope = det != 0 ? (n * stj - st * sj) / det : 0.0;
    trend.sign = trend.slope > 0 ? 1 : (trend.slope < 0 ? -1 : 0);
    return trend;
}

} // namespace cherry
