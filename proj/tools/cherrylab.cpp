// Batch front end over the header library: tune the rotation number, dump
// closest-return diagnostics, classify the physical measure, scan for
// uniform expansion, locate tongues, and run the parabolic-tuning stages.
//
// One command per process.  All numeric inputs arrive as decimal strings in
// a single JSON config and are parsed at the working precision, so no value
// is double-rounded through a binary literal.  Every artifact embeds the
// run id (the content hash of the effective config); rerunning a command
// with the same config and seed reproduces payload files byte for byte, and
// wall-clock data goes to the manifest only.
//
// Exit codes: 0 success, 2 bad config, 3 numeric or diagnostic failure.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cherry/rotation.hpp"
#include "cherry/serialize.hpp"

namespace fs = std::filesystem;
using namespace cherry;
using Clock = std::chrono::steady_clock;

namespace {

constexpr const char* kVersion = "0.3.0";

struct Run {
    Json config;
    fs::path outDir;
    std::string id;
    long precision = 256;
    std::uint64_t seed = 1;
    long threads = 1;
    Json artifacts = Json::array();
    Json timings = Json::object();
    Clock::time_point t0 = Clock::now();

    // payloads carry the id first; the manifest carries everything volatile
    void save_json(const std::string& name, const Json& body) {
        Json out;
        out["run_id"] = id;
        for (const auto& [k, v] : body.items()) out[k] = v;
        atomic_write(outDir / name, out.dump(2) + "\n");
        artifacts.push_back(name);
    }
    void save_csv(const std::string& name, const std::string& body) {
        atomic_write(outDir / name, "# run_id=" + id + "\n" + body);
        artifacts.push_back(name);
    }
    void mark(const std::string& what) {
        timings[what] = std::chrono::duration<double>(Clock::now() - t0).count();
        t0 = Clock::now();
    }
    void finish(const std::string& command) {
        Json m;
        m["run_id"] = id;
        m["command"] = command;
        m["library_version"] = kVersion;
        m["precision_bits"] = precision;
        m["seed"] = seed;
        m["threads"] = threads;
        m["config"] = config;
        m["artifacts"] = artifacts;
        m["timings_s"] = timings;
        std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["written_utc"] = stamp;
        atomic_write(outDir / "manifest.json", m.dump(2) + "\n");
    }
};

long get_long(const Json& j, const char* key, long fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<long>();
}

double get_double(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (v.is_string()) return std::stod(v.get<std::string>());
    return v.get<double>();
}

Real get_real(const NumericContext& ctx, const Json& j, const char* key, const char* fallback) {
    if (!j.contains(key)) return ctx.real(fallback);
    return real_from_json(j.at(key), ctx.precision_bits());
}

FlatCircleMap load_map(const NumericContext& ctx, const Json& config) {
    if (config.contains("map_file")) {
        Json j = Json::parse(read_file(config.at("map_file").get<std::string>()));
        return map_from_json(ctx, j);
    }
    if (!config.contains("map")) throw ConfigError("config needs a map or map_file entry");
    return map_from_json(ctx, config.at("map"));
}

// saddle from explicit rates, from an exponent, or inherited from the map;
// giving both an exponent and an incompatible rate pair is a config error
SaddleSpec load_saddle(const NumericContext& ctx, const Json& config, const FlatCircleMap& map) {
    long P = ctx.precision_bits();
    if (!config.contains("saddle")) return SaddleSpec::from_exponent(map.r(), ctx.real("0.5"));
    const Json& j = config.at("saddle");
    Real ls = get_real(ctx, j, "lambda_s", "0.5");
    SaddleSpec s = j.contains("lambda_u")
                       ? SaddleSpec::from_rates(ls, real_from_json(j.at("lambda_u"), P))
                       : SaddleSpec::from_exponent(map.r(), ls);
    if (j.contains("lambda_u") && abs(s.r - map.r()) > ctx.real("1e-12"))
        throw ConfigError("saddle rates contradict the map exponent r");
    return s;
}

// ---- commands ----

int cmd_tune(const NumericContext& ctx, Run& run) {
    FlatCircleMap base = load_map(ctx, run.config);
    const Json& tj = run.config.at("tune");
    std::string targetSpec = tj.contains("target") ? tj.at("target").get<std::string>() : "golden";
    Real target = targetSpec == "golden" ? golden_mean(ctx) : ctx.real(targetSpec);

    TuneOptions opt(get_real(ctx, tj, "tol", "1e-6"));
    opt.maxProbes = get_long(tj, "max_probes", opt.maxProbes);
    opt.maxIter = get_long(tj, "max_iter", opt.maxIter);
    opt.startIter = get_long(tj, "start_iter", opt.startIter);

    TuneResult res = tune_rotation(ctx, omega_family(ctx, base), target, opt);
    FlatCircleMap tuned = base.with_omega(mod1(base.c() + res.u));
    run.mark("tune");

    int cfDepth = static_cast<int>(get_long(tj, "cf_depth", 20));
    ContinuedFraction cf = continued_fraction(res.rho, cfDepth);
    long maxQuot = 0;
    for (size_t i = 1; i < cf.a.size(); ++i) maxQuot = std::max(maxQuot, cf.a[i]);

    Json rep;
    rep["target"] = targetSpec;
    rep["tune"] = tune_json(res);
    rep["cf"] = cf_json(cf);
    rep["max_quotient"] = maxQuot;
    rep["bounded_type_prefix"] = maxQuot > 0 && maxQuot <= 16;
    run.save_json("map.json", map_json(tuned));
    run.save_json("rotation_report.json", rep);
    return 0;
}

int cmd_returns(const NumericContext& ctx, Run& run) {
    FlatCircleMap map = load_map(ctx, run.config);
    SaddleSpec saddle = load_saddle(ctx, run.config, map);
    const Json& rj = run.config.contains("returns") ? run.config.at("returns") : Json::object();
    int depth = static_cast<int>(get_long(rj, "depth", 10));
    ReturnOptions opt;
    opt.maxIter = get_long(rj, "max_iter", opt.maxIter);
    opt.directCap = get_long(rj, "direct_cap", opt.directCap);
    long quadPoints = get_long(rj, "quad_points", 4096);

    try {
        Roof roof = Roof::for_saddle(ctx, saddle);
        TauIntegralReport tau = tau_integral(ctx, map, roof, depth, quadPoints, opt);
        run.mark("returns");
        run.save_csv("returns_table.csv", table_csv(tau.table));
        Json rep;
        rep["saddle"] = saddle_json(saddle);
        rep["depth"] = depth;
        rep["report"] = tau_json(tau);
        run.save_json("returns.json", rep);
    } catch (const CombinatoricsError& e) {
        // dump both candidate combinatorics before surfacing the error
        ForwardView view{&map};
        RotationStats stats = measure_rotation(ctx, view, map.xi(), opt.maxIter);
        Json dump;
        dump["error"] = e.what();
        Json ladder = Json::array();
        ContinuedFraction cf = continued_fraction(stats.estimate, 24);
        for (const Convergent& c : convergents(cf.a))
            ladder.push_back(Json{{"p", c.p}, {"q", c.q}});
        dump["cf_candidate"] = ladder;
        Json direct = Json::array();
        for (const ClosestReturn& cr : stats.returns)
            direct.push_back(Json{{"step", cr.step}, {"p", cr.p}, {"dist", cr.dist.str_dec(24)}});
        dump["direct_candidate"] = direct;
        run.save_json("returns_conflict.json", dump);
        throw;
    }
    return 0;
}

int cmd_classify(const NumericContext& ctx, Run& run) {
    FlatCircleMap map = load_map(ctx, run.config);
    SaddleSpec saddle = load_saddle(ctx, run.config, map);
    const Json& cj = run.config.contains("classify") ? run.config.at("classify") : Json::object();
    long samples = get_long(cj, "samples", 20);
    double T = get_double(cj, "T", 1e6);
    double delta = get_double(cj, "delta", 0.1);
    long tracePoints = get_long(cj, "trace_points", 256);

    SuspensionFlow flow = SuspensionFlow::over(ctx, map, saddle);
    ClassifyReport rep = classify_physical(ctx, flow, samples, T, delta, run.seed, tracePoints);
    run.mark("classify");

    Json j;
    j["saddle"] = saddle_json(saddle);
    j["T"] = T;
    j["delta"] = delta;
    j["seed"] = run.seed;
    j["report"] = classify_json(rep);
    run.save_json("classify.json", j);
    run.save_csv("classify_samples.csv", classify_csv(rep));
    run.save_csv("occupancy_plot.csv", occupancy_plot_csv(rep));
    return 0;
}

int cmd_expansion(const NumericContext& ctx, Run& run) {
    FlatCircleMap map = load_map(ctx, run.config);
    const Json& ej = run.config.contains("expansion") ? run.config.at("expansion") : Json::object();
    ExpansionReport rep = expansion_search(ctx, map, get_long(ej, "k_max", 8),
                                           get_long(ej, "N_cap", 64), get_long(ej, "grid", 10000));
    run.mark("expansion");
    run.save_json("expansion.json", expansion_json(rep));
    return rep.found ? 0 : 3;
}

int cmd_tongues(const NumericContext& ctx, Run& run) {
    FlatCircleMap base = load_map(ctx, run.config);
    const Json& tj = run.config.at("tongues");
    long p = get_long(tj, "p", 0), q = get_long(tj, "q", 1);
    TongueFamily fam{base};
    Real lo = real_from_json(tj.at("bracket_lo"), ctx.precision_bits());
    Real hi = real_from_json(tj.at("bracket_hi"), ctx.precision_bits());
    Real tol = get_real(ctx, tj, "tol", "1e-9");
    long grid = get_long(tj, "grid", 0);

    TongueRecord rec = locate_tongue(ctx, fam, p, q, lo, hi, tol, grid);
    run.mark("tongue");
    run.save_json("tongue.json", tongue_json(rec));

    std::string side = tj.contains("endpoint") ? tj.at("endpoint").get<std::string>() : "none";
    if (side != "none") {
        if (side != "upper" && side != "lower")
            throw ConfigError("endpoint side must be upper, lower, or none");
        EndpointResult ep =
            parabolic_endpoint(ctx, fam, rec, side == "upper" ? TongueSide::upper : TongueSide::lower,
                               get_real(ctx, tj, "endpoint_tol", "1e-10"), grid);
        run.mark("endpoint");
        run.save_json("endpoint.json", endpoint_json(ep));
    }
    return 0;
}

int cmd_stages(const NumericContext& ctx, Run& run) {
    FlatCircleMap base = load_map(ctx, run.config);
    SaddleSpec saddle = load_saddle(ctx, run.config, base);
    const Json& sj = run.config.contains("stages") ? run.config.at("stages") : Json::object();
    int count = static_cast<int>(get_long(sj, "count", 2));
    if (count < 1 || count > 4) throw ConfigError("stage count must lie in [1, 4]");

    StageOptions opts(ctx);
    opts.locateTol = get_real(ctx, sj, "locate_tol", "1e-9");
    opts.endpointTol = get_real(ctx, sj, "endpoint_tol", "1e-10");
    opts.aCap = get_long(sj, "a_cap", opts.aCap);
    opts.gapIterations = get_long(sj, "gap_iterations", opts.gapIterations);
    opts.passageSamples = get_long(sj, "passage_samples", opts.passageSamples);
    if (sj.contains("horizons")) opts.horizons = sj.at("horizons").get<std::vector<double>>();
    std::vector<long> schedule;
    if (sj.contains("multipliers")) schedule = sj.at("multipliers").get<std::vector<long>>();
    long aStart = get_long(sj, "a_start", 8);

    TongueFamily fam{base};
    Roof roof = Roof::for_saddle(ctx, saddle);
    std::vector<StageRecord> stages;
    stages.push_back(initial_stage(ctx, fam, roof, opts));
    run.mark("stage_1");
    for (int n = 2; n <= count; ++n) {
        long a = static_cast<size_t>(n - 2) < schedule.size() ? schedule[n - 2] : aStart;
        stages.push_back(liouville_stage(ctx, fam, roof, stages, a, opts));
        run.mark("stage_" + std::to_string(n));
    }

    Json transcript;
    transcript["count"] = count;
    Json chain = Json::array();
    bool allHold = true;
    for (size_t i = 0; i < stages.size(); ++i) {
        const StageRecord& s = stages[i];
        for (const StageFraction& f : s.fractions) allHold = allHold && f.fraction > f.bound;
        Json link;
        link["n"] = s.n;
        link["p"] = s.p;
        link["b"] = s.b;
        if (i > 0) {
            const StageRecord& prev = stages[i - 1];
            double drop = std::abs(static_cast<double>(s.p) / s.b -
                                   static_cast<double>(prev.p) / prev.b);
            link["rho_step"] = drop;
            link["rho_step_bound"] = 1.0 / static_cast<double>(s.b);
            link["superlinear"] = drop <= 1.0 / static_cast<double>(s.b);
        }
        chain.push_back(link);
        run.save_json("stage_" + std::to_string(s.n) + ".json", stage_json(s));
    }
    transcript["chain"] = chain;
    transcript["condition4_certified"] = allHold;
    run.save_json("stages.json", transcript);
    return 0;
}

int cmd_verify(Run& run) {
    Json m = Json::parse(read_file(run.outDir / "manifest.json"));
    std::string id = m.at("run_id").get<std::string>();
    std::string recomputed = run_id(m.at("config"));
    bool ok = recomputed == id;
    std::printf("manifest hash %s (stored %s, recomputed %s)\n", ok ? "ok" : "MISMATCH",
                id.c_str(), recomputed.c_str());
    for (const Json& a : m.at("artifacts")) {
        std::string name = a.get<std::string>();
        fs::path p = run.outDir / name;
        bool good = fs::exists(p);
        if (good) {
            std::string body = read_file(p);
            if (name.size() > 5 && name.substr(name.size() - 5) == ".json")
                good = Json::parse(body).at("run_id").get<std::string>() == id;
            else
                good = body.rfind("# run_id=" + id + "\n", 0) == 0;
        }
        std::printf("artifact %-28s %s\n", name.c_str(), good ? "ok" : "BROKEN");
        ok = ok && good;
    }
    return ok ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for circle maps with one flat interval"};
    app.require_subcommand(1);

    std::string configPath, outDir;
    long precision = 0;
    std::int64_t seedFlag = -1;
    long threads = 1;
    std::string command;

    auto add = [&](const char* name, const char* help, bool needsConfig) {
        CLI::App* sub = app.add_subcommand(name, help);
        if (needsConfig) sub->add_option("--config", configPath, "config JSON")->required();
        sub->add_option("--out", outDir, "output directory")->required();
        sub->add_option("--precision", precision, "working precision in bits");
        sub->add_option("--seed", seedFlag, "sample seed");
        sub->add_option("--threads", threads, "worker threads");
        sub->callback([&, name] { command = name; });
        return sub;
    };
    add("tune", "tune omega to a target rotation number", true);
    add("returns", "closest-return table and roof-integral diagnostics", true);
    add("classify", "sample Birkhoff averages and classify the physical measure", true);
    add("expansion", "scan for uniform expansion off the preimage tower", true);
    add("tongues", "locate a mode-locking interval and its parabolic endpoint", true);
    add("stages", "run the parabolic-tuning stage construction", true);
    add("verify", "recheck run-id linkage of an output directory", false);

    CLI11_PARSE(app, argc, argv);

    Run run;
    run.outDir = outDir;
    try {
        std::error_code ec;
        fs::create_directories(run.outDir, ec);
        if (command == "verify") return cmd_verify(run);

        run.config = Json::parse(read_file(configPath));
        if (precision > 0) run.config["precision_bits"] = precision;
        if (seedFlag >= 0) run.config["seed"] = seedFlag;
        run.precision = run.config.contains("precision_bits")
                            ? run.config.at("precision_bits").get<long>()
                            : 256;
        run.seed = run.config.contains("seed") ? run.config.at("seed").get<std::uint64_t>() : 1;
        run.threads = threads;
        run.id = run_id(run.config);

        NumericContext ctx = make_context(run.precision);
        int rc = 0;
        if (command == "tune") rc = cmd_tune(ctx, run);
        else if (command == "returns") rc = cmd_returns(ctx, run);
        else if (command == "classify") rc = cmd_classify(ctx, run);
        else if (command == "expansion") rc = cmd_expansion(ctx, run);
        else if (command == "tongues") rc = cmd_tongues(ctx, run);
        else if (command == "stages") rc = cmd_stages(ctx, run);
        run.finish(command);
        return rc;
    } catch (const ConfigError& e) {
        Json err{{"error", "config"}, {"what", e.what()}};
        std::fprintf(stderr, "config error: %s\n", e.what());
        if (!run.outDir.empty()) atomic_write(run.outDir / "error.json", err.dump(2) + "\n");
        return 2;
    } catch (const Json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        Json err{{"error", "numeric"}, {"what", e.what()}};
        std::fprintf(stderr, "error: %s\n", e.what());
        if (!run.outDir.empty()) atomic_write(run.outDir / "error.json", err.dump(2) + "\n");
        return 3;
    }
}
