// Experiment runner: simulate stationary waiting times of GI/GI/s FCFS
// queues, evaluate the analytic tail bounds, and confront the two.
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qtail/experiment.hpp"
#include "qtail/verify.hpp"
#include "qtail/version.hpp"

namespace {

int run_command(const std::string& config_path, const qtail::RunOptions& opts) {
    const auto cfg = qtail::ExperimentConfig::from_file(config_path);
    const auto result = qtail::run_experiment(cfg, opts);
    std::printf("experiment %s -> %s\n", cfg.name.c_str(), result.output_dir.c_str());
    for (const auto& row : result.verdict)
        std::printf("  x=%-12g p_hat=%-12g band=[%g, %g] %s%s\n", row.x, row.p_hat,
                    row.lower, row.upper, row.pass ? "pass" : "FAIL",
                    row.powered ? "" : " (unpowered)");
    for (const auto& row : result.slln)
        std::printf("  seed=%llu w_min/n=%g w_max/n=%g target=%g %s\n",
                    static_cast<unsigned long long>(row.seed), row.w_min_over_n,
                    row.w_max_over_n, row.target, row.pass ? "pass" : "FAIL");
    std::printf("%s\n", result.all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return result.all_pass ? 0 : 1;
}

int bounds_command(const std::string& config_path) {
    auto cfg = qtail::ExperimentConfig::from_file(config_path);
    const auto report = qtail::bounds_report(cfg);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    qtail::detail::write_bounds_csv(dir, report, "config_hash=" + cfg.content_hash());
    std::printf("rho=%.6g k=%d h=%.6g -> %s/bounds.csv (%zu rows)\n", report.rho,
                report.k, report.h, cfg.output_dir.c_str(), report.rows.size());
    for (const auto& note : report.notes) std::printf("note: %s\n", note.c_str());
    return 0;
}

int verify_command(const std::string& suite, std::uint64_t seed) {
    qtail::SuiteResult res;
    if (suite == "coupling")
        res = qtail::verify_coupling(100, 1000000, seed);
    else if (suite == "monotonicity")
        res = qtail::verify_monotonicity(100000, seed);
    else if (suite == "qk")
        res = qtail::verify_qk(1000, seed);
    else if (suite == "lindley")
        res = qtail::verify_lindley(12);
    else if (suite == "reduction")
        res = qtail::verify_reduction(1000000, seed);
    else if (suite == "quadrature")
        res = qtail::verify_quadrature();
    else if (suite == "residual")
        res = qtail::verify_residual(1000, seed);
    else {
        std::fprintf(stderr,
                     "unknown suite '%s' (choose from coupling, monotonicity, qk, "
                     "lindley, reduction, quadrature, residual)\n",
                     suite.c_str());
        return 2;
    }
    std::printf("%s: %s [%s]\n", res.name.c_str(), res.detail.c_str(),
                res.pass ? "pass" : "FAIL");
    return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stationary waiting-time tails in multi-server queues"};
    app.require_subcommand(1);

    std::string config_path;
    std::string suite;
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    bool force = false;
    bool trace = false;
    std::uint64_t verify_seed = 1;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "experiment config (json)")->required();
    run->add_option("--seed-override", seed_override, "replace the config seed list");
    run->add_option("--threads", threads, "seed-level parallelism");
    run->add_flag("--force", force, "overwrite results from a different config");
    run->add_flag("--trace", trace, "emit per-event big-jump lag tuples");

    auto* bounds = app.add_subcommand("bounds", "evaluate analytic bounds only");
    bounds->add_option("config", config_path, "experiment config (json)")->required();

    auto* verify = app.add_subcommand("verify", "run an exact property suite");
    verify->add_option("suite", suite,
                       "coupling|monotonicity|qk|lindley|reduction|quadrature|residual")
        ->required();
    verify->add_option("--seed-override", verify_seed, "suite seed");

    auto* version = app.add_subcommand("version", "print version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (version->parsed()) {
            std::printf("qtail %s\n", QTAIL_VERSION);
            return 0;
        }
        if (run->parsed()) {
            qtail::RunOptions opts;
            opts.seed_override = seed_override;
            opts.threads = threads;
            opts.force = force;
            opts.trace = trace;
            return run_command(config_path, opts);
        }
        if (bounds->parsed()) return bounds_command(config_path);
        if (verify->parsed()) return verify_command(suite, verify_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
