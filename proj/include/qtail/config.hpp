#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtail/dist.hpp"
#include "qtail/queue.hpp"

namespace qtail {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline nlohmann::json distribution_to_json(const Distribution& d) {
    nlohmann::json j;
    j["family"] = family_name(d.family());
    switch (d.family()) {
        case Family::Pareto:
            j["alpha"] = d.p1();
            j["xm"] = d.p2();
            break;
        case Family::Weibull:
            j["shape"] = d.p1();
            j["scale"] = d.p2();
            break;
        case Family::Lognormal:
            j["mu"] = d.p1();
            j["sigma2"] = d.p2();
            break;
        case Family::Exponential:
            j["rate"] = d.p1();
            break;
        case Family::Deterministic:
            j["value"] = d.p1();
            break;
    }
    return j;
}

inline Distribution distribution_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw ConfigError("distribution record needs a family field");
    const std::string fam = j.at("family").get<std::string>();
    auto need = [&](const char* key) -> double {
        if (!j.contains(key))
            throw ConfigError("distribution " + fam + " needs parameter '" + key + "'");
        return j.at(key).get<double>();
    };
    try {
        if (fam == "pareto") return Distribution::pareto(need("alpha"), need("xm"));
        if (fam == "weibull") return Distribution::weibull(need("shape"), need("scale"));
        if (fam == "lognormal") return Distribution::lognormal(need("mu"), need("sigma2"));
        if (fam == "exponential") return Distribution::exponential(need("rate"));
        if (fam == "deterministic") return Distribution::deterministic(need("value"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("unknown distribution family '" + fam + "'");
}

struct DiagnosticsConfig {
    bool bigjump = false;
    bool hill = false;
    bool moments = false;
    bool majorant = false;
    bool coupling = false;
    bool slln = false;
    bool qk = false;
    std::vector<double> bigjump_x;          // empty: reuse the main x grid
    std::uint64_t bigjump_window_cap = 1000000;
    std::vector<double> moments_gamma{1.0};
    std::uint64_t moments_samples = 10000000;
    std::uint64_t hill_retain = 1000000;
    std::vector<double> hill_m_fractions{0.005, 0.01, 0.02};
    std::vector<double> majorant_t;         // empty: 0,2,...,40
    std::uint64_t majorant_n = 10000000;
    double slln_tol = 0.05;
    std::uint64_t coupling_configs = 100;
    std::uint64_t coupling_steps = 1000000;
    std::uint64_t qk_sequences = 1000;
};

struct ExperimentConfig {
    std::string name = "experiment";
    int s = 1;
    std::optional<Distribution> interarrival;
    std::optional<Distribution> service;
    std::vector<double> x_grid;
    std::uint64_t n = 1000000;
    std::uint64_t burn_in = 0;  // 0: default rule max(1e5, n/100)
    int batches = 32;
    std::vector<std::uint64_t> seeds{1};
    double delta_lower = 0.1;
    double delta_upper = 0.05;
    double h = std::numeric_limits<double>::quiet_NaN();  // NaN: midpoint
    double slack = 2.0;
    double power_hits = 30.0;
    DiagnosticsConfig diag;
    std::string output_dir = "out";

    QueueConfig queue() const { return QueueConfig(s, *interarrival, *service); }

    std::uint64_t effective_burn_in() const {
        return burn_in > 0 ? burn_in : std::max<std::uint64_t>(100000, n / 100);
    }

    double effective_h(const QueueConfig& q) const {
        return std::isnan(h) ? default_h(q) : h;
    }

    // Canonical form: every default materialized, keys sorted by nlohmann.
    nlohmann::json normalized() const;
    std::string content_hash() const { return hex64(fnv1a64(normalized().dump())); }

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    void validate() const;
};

inline nlohmann::json ExperimentConfig::normalized() const {
    nlohmann::json j;
    j["name"] = name;
    j["queue"]["s"] = s;
    j["queue"]["interarrival"] = distribution_to_json(*interarrival);
    j["queue"]["service"] = distribution_to_json(*service);
    j["x_grid"] = x_grid;
    j["run"]["n"] = n;
    j["run"]["burn_in"] = effective_burn_in();
    j["run"]["batches"] = batches;
    j["run"]["seeds"] = seeds;
    j["bounds"]["delta_lower"] = delta_lower;
    j["bounds"]["delta_upper"] = delta_upper;
    if (std::isnan(h))
        j["bounds"]["h"] = "midpoint";
    else
        j["bounds"]["h"] = h;
    j["verdict"]["slack"] = slack;
    j["verdict"]["power_hits"] = power_hits;
    nlohmann::json dj = nlohmann::json::object();
    if (diag.bigjump) {
        dj["bigjump"]["x_grid"] = diag.bigjump_x.empty() ? x_grid : diag.bigjump_x;
        dj["bigjump"]["window_cap"] = diag.bigjump_window_cap;
    }
    if (diag.hill) {
        dj["hill"]["retain"] = diag.hill_retain;
        dj["hill"]["m_fractions"] = diag.hill_m_fractions;
    }
    if (diag.moments) {
        dj["moments"]["gamma"] = diag.moments_gamma;
        dj["moments"]["samples"] = diag.moments_samples;
    }
    if (diag.majorant) {
        dj["majorant"]["t_grid"] = diag.majorant_t;
        dj["majorant"]["n"] = diag.majorant_n;
    }
    if (diag.coupling) {
        dj["coupling"]["configs"] = diag.coupling_configs;
        dj["coupling"]["steps"] = diag.coupling_steps;
    }
    if (diag.slln) dj["slln"]["tol"] = diag.slln_tol;
    if (diag.qk) dj["qk"]["sequences"] = diag.qk_sequences;
    j["diagnostics"] = dj;
    j["output"] = output_dir;
    return j;
}

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        cfg.name = j.value("name", cfg.name);
        const auto& q = j.at("queue");
        cfg.s = q.value("s", 1);
        cfg.interarrival = distribution_from_json(q.at("interarrival"));
        cfg.service = distribution_from_json(q.at("service"));
        if (j.contains("x_grid")) {
            const auto& xg = j.at("x_grid");
            if (xg.is_array()) {
                cfg.x_grid = xg.get<std::vector<double>>();
            } else if (xg.is_object() && xg.contains("geometric")) {
                const auto& g = xg.at("geometric");
                const double start = g.at("start").get<double>();
                const double ratio = g.at("ratio").get<double>();
                const int count = g.at("count").get<int>();
                if (!(start > 0.0 && ratio > 0.0 && count >= 1))
                    throw ConfigError("geometric x_grid needs start>0, ratio>0, count>=1");
                double x = start;
                for (int i = 0; i < count; ++i, x *= ratio) cfg.x_grid.push_back(x);
            } else {
                throw ConfigError("x_grid must be a list or {geometric:{start,ratio,count}}");
            }
        }
        if (j.contains("run")) {
            const auto& r = j.at("run");
            cfg.n = r.value("n", cfg.n);
            cfg.burn_in = r.value("burn_in", cfg.burn_in);
            cfg.batches = r.value("batches", cfg.batches);
            if (r.contains("seeds")) cfg.seeds = r.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (j.contains("bounds")) {
            const auto& b = j.at("bounds");
            cfg.delta_lower = b.value("delta_lower", cfg.delta_lower);
            cfg.delta_upper = b.value("delta_upper", cfg.delta_upper);
            if (b.contains("h") && !b.at("h").is_string()) cfg.h = b.at("h").get<double>();
        }
        if (j.contains("verdict")) {
            const auto& v = j.at("verdict");
            cfg.slack = v.value("slack", cfg.slack);
            cfg.power_hits = v.value("power_hits", cfg.power_hits);
        }
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            if (!d.is_object()) throw ConfigError("diagnostics must be an object");
            for (auto it = d.begin(); it != d.end(); ++it) {
                const std::string& key = it.key();
                const auto& v = it.value();
                if (key == "bigjump") {
                    cfg.diag.bigjump = true;
                    if (v.contains("x_grid")) cfg.diag.bigjump_x = v.at("x_grid").get<std::vector<double>>();
                    cfg.diag.bigjump_window_cap = v.value("window_cap", cfg.diag.bigjump_window_cap);
                } else if (key == "hill") {
                    cfg.diag.hill = true;
                    cfg.diag.hill_retain = v.value("retain", cfg.diag.hill_retain);
                    if (v.contains("m_fractions"))
                        cfg.diag.hill_m_fractions = v.at("m_fractions").get<std::vector<double>>();
                } else if (key == "moments") {
                    cfg.diag.moments = true;
                    if (v.contains("gamma"))
                        cfg.diag.moments_gamma = v.at("gamma").get<std::vector<double>>();
                    cfg.diag.moments_samples = v.value("samples", cfg.diag.moments_samples);
                } else if (key == "majorant") {
                    cfg.diag.majorant = true;
                    if (v.contains("t_grid"))
                        cfg.diag.majorant_t = v.at("t_grid").get<std::vector<double>>();
                    cfg.diag.majorant_n = v.value("n", cfg.diag.majorant_n);
                } else if (key == "coupling") {
                    cfg.diag.coupling = true;
                    cfg.diag.coupling_configs = v.value("configs", cfg.diag.coupling_configs);
                    cfg.diag.coupling_steps = v.value("steps", cfg.diag.coupling_steps);
                } else if (key == "slln") {
                    cfg.diag.slln = true;
                    cfg.diag.slln_tol = v.value("tol", cfg.diag.slln_tol);
                } else if (key == "qk") {
                    cfg.diag.qk = true;
                    cfg.diag.qk_sequences = v.value("sequences", cfg.diag.qk_sequences);
                } else {
                    throw ConfigError("unknown diagnostic '" + key + "'");
                }
            }
        }
        cfg.output_dir = j.value("output", cfg.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (cfg.diag.majorant && cfg.diag.majorant_t.empty()) {
        // geometric default grid: resolves overshoot decay scales from ~0.05 to ~50
        cfg.diag.majorant_t.push_back(0.0);
        for (double t = 0.05; t <= 51.3; t *= 2.0) cfg.diag.majorant_t.push_back(t);
    }
    // canonical grid order keeps estimates, bounds and hashes aligned
    std::sort(cfg.x_grid.begin(), cfg.x_grid.end());
    cfg.x_grid.erase(std::unique(cfg.x_grid.begin(), cfg.x_grid.end()), cfg.x_grid.end());
    std::sort(cfg.diag.bigjump_x.begin(), cfg.diag.bigjump_x.end());
    return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

inline void ExperimentConfig::validate() const {
    if (!interarrival || !service) throw ConfigError("queue laws missing");
    if (s < 1) throw ConfigError("queue requires s >= 1");
    const QueueConfig q = queue();
    const double rho = q.rho();
    const bool degenerate = q.b() == 0.0;
    // an SLLN run is the one place an unstable system is allowed; it skips
    // stationary estimation and bounds entirely
    const bool slln_only = diag.slln;
    if (diag.slln && q.stable())
        throw ConfigError("SLLN diagnostic requires rho > s (unstable system)");
    if (!diag.slln && !q.stable())
        throw ConfigError(
            "stationary estimation requires rho < s; rho > s is permitted only for SLLN checks");
    if (!degenerate && !slln_only && q.integer_rho())
        throw ConfigError("integer rho outside theorem hypotheses (bounds require k < rho < k+1)");
    if (!slln_only) {
        if (x_grid.empty()) throw ConfigError("x_grid must not be empty");
        for (std::size_t i = 0; i < x_grid.size(); ++i) {
            if (!(x_grid[i] > 0.0)) throw ConfigError("x_grid values must be positive");
            if (i > 0 && !(x_grid[i] > x_grid[i - 1]))
                throw ConfigError("x_grid must be strictly increasing");
        }
        if (batches < 10) throw ConfigError("batch means need batches >= 10");
        if (effective_burn_in() >= n) throw ConfigError("burn_in must be smaller than n");
    }
    if (seeds.empty()) throw ConfigError("at least one seed required");
    if (!(slack >= 1.0)) throw ConfigError("verdict slack must be >= 1");
    if (!(delta_lower > 0.0)) throw ConfigError("Theorem 6 lower requires delta > 0");
    if (!(delta_upper >= 0.0 && delta_upper < 1.0))
        throw ConfigError("Theorem 6 upper requires delta in [0,1)");
    if (diag.bigjump) {
        if (interarrival->family() != Family::Deterministic)
            throw ConfigError("big-jump diagnostic requires deterministic interarrival times");
        if (!classify(*service).base.irv)
            throw ConfigError(
                "big-jump diagnostic requires an intermediate regularly varying service family");
    }
    if (diag.majorant && interarrival->family() != Family::Deterministic)
        throw ConfigError("majorant diagnostic requires deterministic interarrival times");
    if ((diag.majorant || diag.bigjump || !std::isnan(h)) && !degenerate) {
        if (!(rho < q.k() + 1.0))
            throw ConfigError("Theorem 6 upper requires rho < k+1");
        if (!std::isnan(h)) {
            const auto [lo, hi] = h_interval(q);
            if (!(h > lo && h < hi))
                throw ConfigError("h outside the admissible spacing interval (" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + ")");
        }
    }
    if (diag.moments && service->family() == Family::Deterministic)
        throw ConfigError(
            "moment condition requires service with unbounded support; deterministic rejected");
    if (diag.moments)
        for (double g : diag.moments_gamma)
            if (!(g > 0.0)) throw ConfigError("moment condition requires gamma > 0");
    if (diag.hill) {
        if (diag.hill_retain < 100)
            throw ConfigError("hill diagnostic needs retain >= 100");
        for (double f : diag.hill_m_fractions)
            if (!(f > 0.0 && f < 1.0))
                throw ConfigError("hill m fractions must lie in (0,1)");
    }
}

}  // namespace qtail
