#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtail/bounds.hpp"
#include "qtail/config.hpp"
#include "qtail/csv.hpp"
#include "qtail/estimate.hpp"
#include "qtail/verify.hpp"
#include "qtail/version.hpp"

namespace qtail {

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    bool force = false;
    bool trace = false;
};

struct SllnRow {
    std::uint64_t seed = 0;
    double w_min_over_n = 0.0;
    double w_max_over_n = 0.0;
    double target = 0.0;
    bool pass = false;
};

struct ExperimentResult {
    bool all_pass = true;
    std::vector<TailEstimate> tail;
    BoundReport bounds;
    std::vector<VerdictRow> verdict;
    std::vector<BigJumpReport> bigjump;
    std::vector<HillEstimate> hill;
    std::vector<MomentStability> moments;
    std::vector<MomentVerdict> moment_predictions;
    ExceedanceProfile majorant;
    std::vector<SllnRow> slln;
    SuiteResult coupling;
    SuiteResult qk;
    nlohmann::json manifest;
    std::string output_dir;
};

namespace detail {

inline std::vector<std::uint64_t> run_seeds(const ExperimentConfig& cfg,
                                            const RunOptions& opts) {
    if (opts.seed_override) return {*opts.seed_override};
    return cfg.seeds;
}

inline void refuse_stale_output(const std::filesystem::path& dir,
                                const std::string& hash, bool force) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path) || force) return;
    std::ifstream in(manifest_path);
    if (!in) return;
    try {
        nlohmann::json j;
        in >> j;
        const std::string old_hash = j.value("config_hash", "");
        if (!old_hash.empty() && old_hash != hash)
            throw ConfigError("output directory holds results for config hash " + old_hash +
                              " (new hash " + hash + "); rerun with --force to overwrite");
    } catch (const nlohmann::json::exception&) {
        // unreadable manifest: treat as absent
    }
}

inline void write_tail_csv(const std::filesystem::path& dir,
                           const std::vector<TailEstimate>& tail,
                           const std::string& hash_comment) {
    CsvWriter csv((dir / "tail.csv").string(),
                  {"x", "p_hat", "hits", "n_effective", "ci_low", "ci_high", "batches",
                   "burn_in", "no_hits"},
                  hash_comment);
    for (const auto& t : tail)
        csv.row({fmt17(t.x), fmt17(t.p_hat), std::to_string(t.hits),
                 std::to_string(t.n_effective), fmt17(t.ci_low), fmt17(t.ci_high),
                 std::to_string(t.batches), std::to_string(t.burn_in),
                 t.no_hits ? "1" : "0"});
}

inline void write_bounds_csv(const std::filesystem::path& dir, const BoundReport& rep,
                             const std::string& hash_comment) {
    CsvWriter csv((dir / "bounds.csv").string(),
                  {"x", "theorem", "lower", "upper", "asymptotic"}, hash_comment);
    for (const auto& row : rep.rows)
        csv.row({fmt17(row.x), row.theorem, fmt17(row.lower), fmt17(row.upper),
                 fmt17(row.asymptotic)});
}

inline void write_verdict_csv(const std::filesystem::path& dir,
                              const std::vector<VerdictRow>& rows,
                              const std::string& hash_comment) {
    CsvWriter csv((dir / "verdict.csv").string(),
                  {"x", "p_hat", "ci_low", "ci_high", "lower", "upper", "slack",
                   "powered", "pass"},
                  hash_comment);
    for (const auto& r : rows)
        csv.row({fmt17(r.x), fmt17(r.p_hat), fmt17(r.ci_low), fmt17(r.ci_high),
                 fmt17(r.lower), fmt17(r.upper), fmt17(r.slack), r.powered ? "1" : "0",
                 r.pass ? "1" : "0"});
}

}  // namespace detail

// Columnar export of a simulated path with a reproducibility manifest:
// path.csv (n, d, then any captured columns) plus path_manifest.json holding
// the queue description, seed and the content hash of both.
inline void export_path_record(const PathRecord& rec, const QueueConfig& cfg,
                               const std::string& directory) {
    const std::filesystem::path dir(directory);
    std::filesystem::create_directories(dir);
    std::vector<std::string> header{"n", "d"};
    const bool have_w = !rec.workloads.empty();
    const bool have_assign = !rec.assignments.empty();
    const bool have_draws = !rec.sigmas.empty();
    if (have_w)
        for (int i = 1; i <= rec.s; ++i) header.push_back("w" + std::to_string(i));
    if (have_assign) header.push_back("i_n");
    if (have_draws) {
        header.push_back("sigma");
        header.push_back("tau");
    }
    CsvWriter csv((dir / "path.csv").string(), header);
    for (std::size_t n = 0; n < rec.delays.size(); ++n) {
        std::vector<std::string> row{std::to_string(n + 1), fmt17(rec.delays[n])};
        if (have_w)
            for (int i = 0; i < rec.s; ++i)
                row.push_back(fmt17(rec.workloads[n * rec.s + i]));
        if (have_assign) row.push_back(std::to_string(rec.assignments[n]));
        if (have_draws) {
            row.push_back(fmt17(rec.sigmas[n]));
            row.push_back(fmt17(rec.taus[n]));
        }
        csv.row(row);
    }
    nlohmann::json manifest;
    manifest["queue"]["s"] = cfg.s;
    manifest["queue"]["interarrival"] = distribution_to_json(cfg.interarrival);
    manifest["queue"]["service"] = distribution_to_json(cfg.service);
    manifest["seed"] = rec.seed;
    manifest["steps"] = rec.delays.size();
    manifest["columns"] = header;
    manifest["content_hash"] = hex64(fnv1a64(manifest.dump()));
    std::ofstream out(dir / "path_manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
}

// Analytic bounds only; no simulation.
inline BoundReport bounds_report(const ExperimentConfig& cfg) {
    cfg.validate();
    const QueueConfig q = cfg.queue();
    if (q.b() == 0.0) {
        BoundReport rep;
        rep.s = cfg.s;
        rep.notes.push_back("degenerate zero service: no bounds apply");
        return rep;
    }
    return evaluate_bounds(q, cfg.x_grid, cfg.delta_lower, cfg.delta_upper,
                           cfg.effective_h(q));
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const RunOptions& opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    ExperimentResult result;
    const std::string hash = cfg.content_hash();
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    detail::refuse_stale_output(dir, hash, opts.force);
    result.output_dir = dir.string();

    const QueueConfig q = cfg.queue();
    const auto seeds = detail::run_seeds(cfg, opts);
    const std::string hash_comment = "config_hash=" + hash;
    const std::uint64_t burn = cfg.effective_burn_in();
    const bool degenerate = q.b() == 0.0;
    nlohmann::json diag_summary = nlohmann::json::object();

    if (cfg.diag.slln) {
        const double target = (q.b() - q.s * q.a()) / q.s;
        CsvWriter csv((dir / "slln.csv").string(),
                      {"seed", "n", "w_min_over_n", "w_max_over_n", "target", "pass"}, hash_comment);
        for (std::uint64_t seed : seeds) {
            const DriftResult drift = unstable_drift(q, cfg.n, seed);
            SllnRow row;
            row.seed = seed;
            row.w_min_over_n = drift.w_min_over_n;
            row.w_max_over_n = drift.w_max_over_n;
            row.target = target;
            row.pass = std::fabs(drift.w_min_over_n - target) < cfg.diag.slln_tol * target &&
                       std::fabs(drift.w_max_over_n - target) < cfg.diag.slln_tol * target;
            result.slln.push_back(row);
            result.all_pass = result.all_pass && row.pass;
            csv.row({std::to_string(seed), std::to_string(cfg.n), fmt17(drift.w_min_over_n),
                     fmt17(drift.w_max_over_n), fmt17(target), row.pass ? "1" : "0"});
        }
        diag_summary["slln"] = {{"target", target}, {"tol", cfg.diag.slln_tol}};
    } else {
        // stationary tail estimation and the bound confrontation
        result.tail = estimate_tail(q, cfg.x_grid, cfg.n, burn, cfg.batches, seeds,
                                    opts.threads);
        detail::write_tail_csv(dir, result.tail, hash_comment);
        std::vector<double> lower(result.tail.size(),
                                  std::numeric_limits<double>::quiet_NaN());
        std::vector<double> upper(result.tail.size(),
                                  std::numeric_limits<double>::quiet_NaN());
        if (!degenerate) {
            result.bounds = evaluate_bounds(q, cfg.x_grid, cfg.delta_lower,
                                            cfg.delta_upper, cfg.effective_h(q));
            std::size_t i = 0;
            for (const auto& row : result.bounds.rows) {
                if (row.theorem != "theorem6") continue;
                lower[i] = row.lower;
                upper[i] = row.upper;
                ++i;
            }
        } else {
            result.bounds.notes.push_back("degenerate zero service: no bounds apply");
        }
        detail::write_bounds_csv(dir, result.bounds, hash_comment);
        result.verdict = sandwich_verdict(result.tail, lower, upper, cfg.slack,
                                          cfg.power_hits);
        detail::write_verdict_csv(dir, result.verdict, hash_comment);
        for (const auto& row : result.verdict) result.all_pass = result.all_pass && row.pass;
    }

    if (cfg.diag.bigjump) {
        const double h = cfg.effective_h(q);
        const std::vector<double> xs = cfg.diag.bigjump_x.empty() ? cfg.x_grid : cfg.diag.bigjump_x;
        result.bigjump = bigjump_scan(q, xs, h, cfg.n, burn, seeds.front(),
                                      cfg.diag.bigjump_window_cap, opts.trace);
        CsvWriter csv((dir / "bigjump.csv").string(),
                      {"x", "window", "conditioning_events", "matched_events", "frequency",
                       "a_hat", "threshold_slope"}, hash_comment);
        for (const auto& rep : result.bigjump)
            csv.row({fmt17(rep.x), std::to_string(rep.window),
                     std::to_string(rep.conditioning_events),
                     std::to_string(rep.matched_events), fmt17(rep.frequency),
                     fmt17(rep.a_hat), fmt17(rep.slope)});
        if (opts.trace) {
            CsvWriter tcsv((dir / "bigjump_trace.csv").string(), {"x", "event", "lags"}, hash_comment);
            for (const auto& rep : result.bigjump) {
                std::size_t ev = 0;
                for (const auto& lags : rep.trace) {
                    std::string joined;
                    for (std::size_t i = 0; i < lags.size(); ++i) {
                        if (i) joined += ';';
                        joined += std::to_string(lags[i]);
                    }
                    tcsv.row({fmt17(rep.x), std::to_string(ev++), joined});
                }
            }
        }
    }

    if (cfg.diag.hill) {
        // strided retention across one path of the main run
        std::vector<double> retained;
        retained.reserve(cfg.diag.hill_retain);
        const std::uint64_t avail = cfg.n > burn ? cfg.n - burn : 0;
        const std::uint64_t stride = std::max<std::uint64_t>(1, avail / cfg.diag.hill_retain);
        drive_kw(q, cfg.n, std::vector<double>(q.s, 0.0), seeds.front(),
                 [&](std::uint64_t n_idx, double d, double, double) {
                     if (n_idx <= burn) return;
                     if ((n_idx - burn - 1) % stride == 0 &&
                         retained.size() < cfg.diag.hill_retain)
                         retained.push_back(d);
                 });
        std::sort(retained.begin(), retained.end(), std::greater<double>());
        CsvWriter csv((dir / "hill.csv").string(),
                      {"m_fraction", "m", "alpha_hat", "samples_used"}, hash_comment);
        for (double frac : cfg.diag.hill_m_fractions) {
            const std::size_t m = static_cast<std::size_t>(
                std::ceil(frac * static_cast<double>(retained.size())));
            const HillEstimate est = hill_index(retained, std::max<std::size_t>(2, m));
            result.hill.push_back(est);
            csv.row({fmt17(frac), std::to_string(est.m), fmt17(est.alpha_hat),
                     std::to_string(est.samples_used)});
        }
    }

    if (cfg.diag.moments) {
        const std::uint64_t samples = std::min<std::uint64_t>(cfg.diag.moments_samples,
                                                              cfg.n > burn ? cfg.n - burn : 1);
        result.moments = empirical_moment_path(q, cfg.diag.moments_gamma, samples, burn,
                                               seeds.front());
        CsvWriter csv((dir / "moments.csv").string(),
                      {"gamma", "prefix_n", "estimate", "ratio", "stabilizing",
                       "predicted"}, hash_comment);
        for (std::size_t g = 0; g < result.moments.size(); ++g) {
            const auto& ms = result.moments[g];
            const MomentVerdict pred =
                moment_condition(ms.gamma, q.service, q.s, q.k());
            result.moment_predictions.push_back(pred);
            for (std::size_t i = 0; i < ms.prefixes.size(); ++i)
                csv.row({fmt17(ms.gamma), std::to_string(ms.prefixes[i].n),
                         fmt17(ms.prefixes[i].value),
                         i ? fmt17(ms.ratios[i - 1]) : std::string("nan"),
                         ms.stabilizing ? "1" : "0", to_string(pred)});
        }
    }

    if (cfg.diag.majorant) {
        const double h = cfg.effective_h(q);
        result.majorant = majorant_exceedance_profile(q, h, cfg.diag.majorant_t,
                                                      cfg.diag.majorant_n, burn,
                                                      seeds.front());
        CsvWriter csv((dir / "majorant.csv").string(), {"t", "exceedances", "frequency"}, hash_comment);
        for (std::size_t i = 0; i < result.majorant.t_grid.size(); ++i)
            csv.row({fmt17(result.majorant.t_grid[i]),
                     std::to_string(result.majorant.exceedances[i]),
                     fmt17(result.majorant.frequency[i])});
        diag_summary["majorant"] = {{"slope", result.majorant.slope},
                                    {"intercept", result.majorant.intercept},
                                    {"fit_points", result.majorant.fit_points},
                                    {"events", result.majorant.events}};
    }

    if (cfg.diag.coupling) {
        result.coupling = verify_coupling(cfg.diag.coupling_configs,
                                          cfg.diag.coupling_steps, seeds.front());
        CsvWriter csv((dir / "coupling.csv").string(),
                      {"configs", "steps", "violations", "pass"}, hash_comment);
        csv.row({std::to_string(cfg.diag.coupling_configs),
                 std::to_string(result.coupling.checked),
                 std::to_string(result.coupling.violations),
                 result.coupling.pass ? "1" : "0"});
        result.all_pass = result.all_pass && result.coupling.pass;
    }

    if (cfg.diag.qk) {
        result.qk = verify_qk(cfg.diag.qk_sequences, seeds.front());
        CsvWriter csv((dir / "qk.csv").string(), {"sequences", "violations", "pass"}, hash_comment);
        csv.row({std::to_string(result.qk.checked), std::to_string(result.qk.violations),
                 result.qk.pass ? "1" : "0"});
        result.all_pass = result.all_pass && result.qk.pass;
    }

    // structured JSON mirror of every emitted table, with full provenance
    {
        nlohmann::json rep;
        rep["config_hash"] = hash;
        if (!result.tail.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& t : result.tail)
                rows.push_back({{"x", t.x},
                                {"p_hat", t.p_hat},
                                {"hits", t.hits},
                                {"n_effective", t.n_effective},
                                {"ci_low", t.ci_low},
                                {"ci_high", t.ci_high},
                                {"batches", t.batches},
                                {"burn_in", t.burn_in},
                                {"no_hits", t.no_hits}});
            rep["tail"] = std::move(rows);
        }
        if (!result.bounds.rows.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : result.bounds.rows) {
                nlohmann::json row{{"x", r.x}, {"theorem", r.theorem}};
                if (!std::isnan(r.lower)) row["lower"] = r.lower;
                if (!std::isnan(r.upper)) row["upper"] = r.upper;
                if (!std::isnan(r.asymptotic)) row["asymptotic"] = r.asymptotic;
                rows.push_back(std::move(row));
            }
            rep["bounds"] = {{"rows", std::move(rows)},
                             {"delta_lower", result.bounds.delta_lower},
                             {"delta_upper", result.bounds.delta_upper},
                             {"h", result.bounds.h},
                             {"rho", result.bounds.rho},
                             {"k", result.bounds.k},
                             {"quadrature_abs_tol", 1e-10},
                             {"notes", result.bounds.notes}};
        }
        if (!result.verdict.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& v : result.verdict)
                rows.push_back({{"x", v.x},
                                {"p_hat", v.p_hat},
                                {"lower", v.lower},
                                {"upper", v.upper},
                                {"slack", v.slack},
                                {"powered", v.powered},
                                {"pass", v.pass}});
            rep["verdict"] = std::move(rows);
        }
        if (!result.bigjump.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& b : result.bigjump)
                rows.push_back({{"x", b.x},
                                {"window", b.window},
                                {"conditioning_events", b.conditioning_events},
                                {"matched_events", b.matched_events},
                                {"frequency", b.no_events ? nlohmann::json() : nlohmann::json(b.frequency)},
                                {"a_hat", b.a_hat},
                                {"threshold_slope", b.slope}});
            rep["bigjump"] = std::move(rows);
        }
        if (!result.hill.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& e : result.hill)
                rows.push_back({{"m", e.m},
                                {"alpha_hat", e.alpha_hat},
                                {"samples_used", e.samples_used}});
            rep["hill"] = std::move(rows);
        }
        if (!result.moments.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t g = 0; g < result.moments.size(); ++g) {
                const auto& ms = result.moments[g];
                nlohmann::json prefixes = nlohmann::json::array();
                for (const auto& p : ms.prefixes)
                    prefixes.push_back({{"n", p.n}, {"value", p.value}});
                rows.push_back({{"gamma", ms.gamma},
                                {"prefixes", std::move(prefixes)},
                                {"stabilizing", ms.stabilizing},
                                {"tol", ms.tol},
                                {"predicted", to_string(result.moment_predictions[g])}});
            }
            rep["moments"] = std::move(rows);
        }
        if (!result.majorant.t_grid.empty()) {
            rep["majorant"] = {{"t_grid", result.majorant.t_grid},
                               {"exceedances", result.majorant.exceedances},
                               {"frequency", result.majorant.frequency},
                               {"events", result.majorant.events},
                               {"slope", result.majorant.slope},
                               {"fit_points", result.majorant.fit_points}};
        }
        if (!result.slln.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : result.slln)
                rows.push_back({{"seed", r.seed},
                                {"w_min_over_n", r.w_min_over_n},
                                {"w_max_over_n", r.w_max_over_n},
                                {"target", r.target},
                                {"pass", r.pass}});
            rep["slln"] = std::move(rows);
        }
        std::ofstream rout(dir / "report.json", std::ios::binary | std::ios::trunc);
        rout << rep.dump(2) << '\n';
    }

    const auto t1 = std::chrono::steady_clock::now();
    nlohmann::json manifest;
    manifest["name"] = cfg.name;
    manifest["version"] = QTAIL_VERSION;
    manifest["config"] = cfg.normalized();
    manifest["config_hash"] = hash;
    manifest["seeds"] = seeds;
    manifest["wall_time_sec"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0;
    manifest["all_pass"] = result.all_pass;
    manifest["diagnostics"] = diag_summary;
    {
        std::vector<std::string> outputs;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.path().extension() == ".csv") outputs.push_back(entry.path().filename().string());
        std::sort(outputs.begin(), outputs.end());
        manifest["outputs"] = outputs;
    }
    std::ofstream mout(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    mout << manifest.dump(2) << '\n';
    result.manifest = manifest;
    return result;
}

}  // namespace qtail
