#pragma once

// JSON/CSV forms of every report the command-line tool emits, decimal-string
// config parsing, the run-id content hash, and atomic file writes.
//
// Payload files must be byte-identical across reruns of the same config and
// seed, so everything here is deterministic: ordered_json keeps insertion
// order, high-precision values carry an exact hex-float field next to the
// 24-digit decimal one, and doubles go through nlohmann's shortest
// round-trip printing.  Wall-clock data never enters a payload; it lives in
// the run manifest only.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cherry/suspension.hpp"
#include "cherry/tongues.hpp"

namespace cherry {

using Json = nlohmann::ordered_json;

inline Json real_json(const Real& x) {
    return Json{{"dec", x.str_dec(24)}, {"hex", x.str_hex()}};
}

inline Real real_from_json(const Json& j, long P) {
    if (j.is_object()) return Real::from_str(j.at("hex").get<std::string>(), P);
    if (j.is_string()) return Real::from_str(j.get<std::string>(), P);
    if (j.is_number_integer()) return Real::from_long(j.get<long>(), P);
    throw ConfigError("numeric config fields must be decimal strings");
}

inline Json logmag_json(const LogMag& m) {
    return Json{{"sign", m.sign}, {"log_abs", m.logAbs.str_dec(24)}};
}

// ---- map and saddle ----

inline Json map_json(const FlatCircleMap& m) {
    Json j;
    j["precision_bits"] = m.precision_bits();
    j["c"] = real_json(m.c());
    j["d"] = real_json(m.d());
    j["epsilon"] = real_json(m.epsilon());
    j["r"] = real_json(m.r());
    j["omega"] = real_json(m.omega());
    return j;
}

inline FlatCircleMap map_from_json(const NumericContext& ctx, const Json& j) {
    long P = ctx.precision_bits();
    return FlatCircleMap(ctx, real_from_json(j.at("c"), P), real_from_json(j.at("d"), P),
                         real_from_json(j.at("r"), P), real_from_json(j.at("epsilon"), P),
                         real_from_json(j.at("omega"), P));
}

inline Json saddle_json(const SaddleSpec& s) {
    return Json{{"lambda_s", real_json(s.lambda_s)},
                {"lambda_u", real_json(s.lambda_u)},
                {"r", real_json(s.r)},
                {"dissipative", s.dissipative()}};
}

// ---- rotation ----

inline Json cf_json(const ContinuedFraction& cf) {
    return Json{{"a", cf.a}, {"exhausted", cf.exhausted}};
}

inline Json tune_json(const TuneResult& t) {
    Json j;
    j["u"] = real_json(t.u);
    j["rho"] = real_json(t.rho);
    j["radius"] = real_json(t.radius);
    j["locked"] = t.locked;
    j["p"] = t.p;
    j["q"] = t.q;
    j["probes"] = t.probes;
    return j;
}

// ---- closest returns ----

inline Json table_json(const ClosestReturnTable& t) {
    Json j;
    j["rho"] = real_json(t.rho);
    j["exact_rho"] = t.exactRho;
    j["p"] = t.p;
    j["q"] = t.q;
    j["cf"] = cf_json(t.cf);
    j["levels"] = t.rows.size();
    j["collapse_step"] = t.collapseStep;
    j["collapse_via_flat"] = t.collapseViaFlat;
    j["strained_levels"] = t.strainedLevels;
    j["refined_bits"] = t.refinedBits;
    j["precision_bits"] = t.precisionBits;
    return j;
}

inline std::string table_csv(const ClosestReturnTable& t) {
    std::ostringstream out;
    out << "level,q,q_next,x_hex,log_dist,side,mass,singular_mass,ratio\n";
    for (const ReturnRow& row : t.rows) {
        out << row.level << ',' << row.q << ',' << row.qNext << ',' << row.x.str_hex() << ','
            << row.dist.logAbs.str_dec(24) << ',' << row.side << ',' << row.mass.str_dec(24)
            << ',' << row.singularMass.str_dec(24) << ',';
        if (row.ratio) out << row.ratio->str_dec(24);
        out << '\n';
    }
    return out.str();
}

inline Json series_json(const MassSeriesReport& s) {
    Json j;
    j["trend"] = to_string(s.trend);
    j["slope"] = s.slope;
    j["lin_slope"] = s.linSlope;
    j["intercept"] = s.intercept;
    j["ratio"] = s.ratio;
    j["floor"] = s.floorValue;
    j["tail"] = s.tail;
    j["fit_lo"] = s.fitLo;
    j["fit_hi"] = s.fitHi;
    j["log_mass"] = s.logMass;
    return j;
}

inline Json tau_json(const TauIntegralReport& r) {
    Json j;
    j["table"] = table_json(r.table);
    j["series"] = series_json(r.series);
    j["verdict"] = to_string(r.verdict);
    j["tail_bound"] = r.tailBound;
    Json far = Json::array(), mid = Json::array();
    for (const Real& v : r.partialFar) far.push_back(v.str_dec(24));
    for (const Real& v : r.partialMid) mid.push_back(v.str_dec(24));
    j["partial_far"] = far;
    j["partial_mid"] = mid;
    j["integral_far"] = real_json(r.integralFar);
    j["integral_mid"] = real_json(r.integralMid);
    j["mass_sum"] = real_json(r.massSum);
    return j;
}

inline Json expansion_json(const ExpansionReport& e) {
    Json j;
    j["found"] = e.found;
    j["N"] = e.N;
    j["k"] = e.k;
    j["alpha"] = e.alpha;
    j["log_alpha"] = e.logAlpha;
    j["admissible"] = e.admissible;
    j["grid_size"] = e.gridSize;
    j["best_log"] = e.bestLog;
    j["best_N"] = e.bestN;
    j["best_k"] = e.bestK;
    return j;
}

inline Json coverage_json(const CoverageReport& c) {
    Json j;
    j["total"] = real_json(c.total);
    j["steps"] = c.steps;
    j["min_length"] = c.minLength;
    return j;
}

// ---- suspension ----

inline Json birkhoff_json(const BirkhoffReport& b) {
    Json j;
    j["start"] = real_json(b.start);
    j["horizon"] = b.horizon;
    j["returns"] = b.returns;
    j["occupancy_fraction"] = b.occupancyFraction;
    j["half_width"] = b.halfWidth;
    j["min_log_dist"] = b.minLogDist;
    j["verdict"] = to_string(b.verdict);
    Json avg = Json::object();
    for (size_t i = 0; i < b.names.size(); ++i) avg[b.names[i]] = b.averages[i];
    j["averages"] = avg;
    return j;
}

inline Json classify_json(const ClassifyReport& c) {
    Json j;
    j["verdict"] = to_string(c.verdict);
    j["dissent"] = c.dissent;
    j["resampled"] = c.resampled;
    j["samples"] = c.samples.size();
    return j;
}

inline std::string classify_csv(const ClassifyReport& c) {
    std::ostringstream out;
    out << "sample,start_hex,returns,occupancy_fraction,half_width,min_log_dist,verdict";
    if (!c.samples.empty())
        for (const std::string& name : c.samples.front().names) out << ",avg_" << name;
    out << '\n';
    for (size_t i = 0; i < c.samples.size(); ++i) {
        const BirkhoffReport& b = c.samples[i];
        out << i << ',' << b.start.str_hex() << ',' << b.returns << ',' << b.occupancyFraction
            << ',' << b.halfWidth << ',' << b.minLogDist << ',' << to_string(b.verdict);
        for (double a : b.averages) out << ',' << a;
        out << '\n';
    }
    return out.str();
}

inline std::string occupancy_plot_csv(const ClassifyReport& c) {
    std::ostringstream out;
    out << "sample,t,running_occupancy\n";
    for (size_t i = 0; i < c.samples.size(); ++i)
        for (const auto& [t, occ] : c.samples[i].trace) out << i << ',' << t << ',' << occ << '\n';
    return out.str();
}

inline Json jacobian_json(const JacobianTrend& t) {
    Json j;
    j["slope"] = t.slope;
    j["sign"] = t.sign;
    j["passes"] = t.passes;
    j["transit_rate"] = t.transitRate;
    return j;
}

// ---- tongues and stages ----

inline Json tongue_json(const TongueRecord& t) {
    Json j;
    j["p"] = t.p;
    j["q"] = t.q;
    j["omega_lo"] = real_json(t.omegaLo);
    j["omega_hi"] = real_json(t.omegaHi);
    j["width"] = real_json(t.width());
    j["mult_lo"] = t.multLo;
    j["mult_hi"] = t.multHi;
    return j;
}

inline Json endpoint_json(const EndpointResult& e) {
    Json j;
    j["omega"] = real_json(e.omega);
    j["point"] = real_json(e.point);
    j["multiplier"] = e.multiplier;
    j["kappa"] = e.kappa;
    j["ladder"] = e.ladder;
    return j;
}

inline Json stage_json(const StageRecord& s) {
    Json j;
    j["n"] = s.n;
    j["p"] = s.p;
    j["b"] = s.b;
    j["a"] = s.a;
    j["rho"] = s.b > 0 ? static_cast<double>(s.p) / static_cast<double>(s.b) : 0.0;
    j["omega"] = real_json(s.omega);
    j["point"] = real_json(s.point);
    j["radius"] = real_json(s.radius);
    Json boxes = Json::array();
    for (const CircleInterval& b : s.baseBoxes)
        boxes.push_back(Json{{"lo", b.lo.str_dec(24)}, {"len", b.len.str_dec(24)}});
    j["boxes"] = boxes;
    j["c_list"] = s.cList;
    Json fr = Json::array();
    for (const StageFraction& f : s.fractions)
        fr.push_back(Json{{"box_stage", f.boxStage},
                          {"horizon", f.horizon},
                          {"seed", f.seed},
                          {"fraction", f.fraction},
                          {"bound", f.bound},
                          {"holds", f.fraction > f.bound}});
    j["fractions"] = fr;
    j["delta_gap"] = s.deltaGap;
    j["K"] = s.K;
    j["roof_cap"] = s.roofCap;
    j["roof_floor"] = s.roofFloor;
    j["off_tongue_count"] = s.offTongueCount;
    j["retries"] = s.retries;
    j["tongue"] = tongue_json(s.tongue);
    return j;
}

// ---- run identity and files ----

// FNV-1a, stable across platforms; the run id is this hash of the canonical
// (sorted-key, no-whitespace) config text
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string run_id(const Json& config) {
    nlohmann::json sorted = nlohmann::json::parse(config.dump());
    std::uint64_t h = fnv1a64(sorted.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) throw ConfigError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace cherry
