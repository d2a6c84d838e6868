#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qtail/bounds.hpp"
#include "qtail/dist.hpp"
#include "qtail/queue.hpp"
#include "qtail/special.hpp"

namespace qtail {

inline std::uint64_t default_burn_in(std::uint64_t n) {
    return std::max<std::uint64_t>(100000, n / 100);
}

struct TailEstimate {
    double x = 0.0;
    double p_hat = 0.0;
    std::uint64_t hits = 0;
    std::uint64_t n_effective = 0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    int batches = 0;
    std::uint64_t burn_in = 0;
    bool no_hits = false;
};

namespace detail {

struct SeedTailCounts {
    std::vector<std::uint64_t> hits;  // batches x nx, row-major by batch
    std::uint64_t batch_len = 0;
};

inline SeedTailCounts tail_counts_one_seed(const QueueConfig& cfg,
                                           std::span<const double> x_grid,
                                           std::uint64_t n, std::uint64_t burn_in,
                                           int batches, std::uint64_t seed) {
    const std::size_t nx = x_grid.size();
    SeedTailCounts out;
    out.batch_len = (n - burn_in) / static_cast<std::uint64_t>(batches);
    if (out.batch_len == 0)
        throw std::invalid_argument("run too short for the requested batches");
    out.hits.assign(static_cast<std::size_t>(batches) * nx, 0);
    const std::uint64_t total = burn_in + out.batch_len * batches;
    std::uint64_t* hits = out.hits.data();
    const double* xs = x_grid.data();
    const std::uint64_t batch_len = out.batch_len;
    drive_kw(cfg, total, std::vector<double>(cfg.s, 0.0), seed,
             [&](std::uint64_t n_idx, double d, double, double) {
                 if (n_idx <= burn_in) return;
                 const std::uint64_t j = n_idx - burn_in - 1;
                 const std::size_t batch = static_cast<std::size_t>(j / batch_len);
                 std::uint64_t* row = hits + batch * nx;
                 for (std::size_t i = 0; i < nx && d > xs[i]; ++i) ++row[i];
             });
    return out;
}

}  // namespace detail

// Long-run tail estimation with batch-means confidence intervals. One path
// per seed; batches are contiguous post-burn-in blocks; multi-seed runs pool
// hits and batch means in seed order, so results are deterministic.
inline std::vector<TailEstimate> estimate_tail(const QueueConfig& cfg,
                                               std::vector<double> x_grid,
                                               std::uint64_t n, std::uint64_t burn_in,
                                               int batches,
                                               std::span<const std::uint64_t> seeds,
                                               int threads = 1) {
    if (!cfg.stable())
        throw std::invalid_argument("stationary estimation requires rho < s");
    if (batches < 10) throw std::invalid_argument("batch means need batches >= 10");
    if (burn_in >= n) throw std::invalid_argument("burn_in must be smaller than n");
    if (seeds.empty()) throw std::invalid_argument("at least one seed required");
    std::sort(x_grid.begin(), x_grid.end());
    const std::size_t nx = x_grid.size();
    std::vector<detail::SeedTailCounts> per_seed(seeds.size());
    if (threads <= 1 || seeds.size() == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            per_seed[i] = detail::tail_counts_one_seed(cfg, x_grid, n, burn_in, batches, seeds[i]);
    } else {
        // static round-robin assignment keeps the merge order independent of timing
        std::vector<std::thread> pool;
        const std::size_t workers = std::min<std::size_t>(threads, seeds.size());
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                for (std::size_t i = w; i < seeds.size(); i += workers)
                    per_seed[i] = detail::tail_counts_one_seed(cfg, x_grid, n, burn_in, batches, seeds[i]);
            });
        }
        for (auto& t : pool) t.join();
    }
    std::vector<TailEstimate> out(nx);
    const std::uint64_t batch_len = per_seed.front().batch_len;
    const std::uint64_t n_eff_total = batch_len * batches * seeds.size();
    const std::size_t total_batches = static_cast<std::size_t>(batches) * seeds.size();
    const double t_crit =
        total_batches > 1
            ? student_t_quantile(0.975, static_cast<double>(total_batches - 1))
            : 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
        TailEstimate& est = out[i];
        est.x = x_grid[i];
        est.batches = static_cast<int>(total_batches);
        est.burn_in = burn_in;
        est.n_effective = n_eff_total;
        std::vector<double> bm;
        bm.reserve(total_batches);
        std::uint64_t hits = 0;
        for (const auto& sc : per_seed) {
            for (int b = 0; b < batches; ++b) {
                const std::uint64_t h = sc.hits[static_cast<std::size_t>(b) * nx + i];
                hits += h;
                bm.push_back(static_cast<double>(h) / static_cast<double>(batch_len));
            }
        }
        est.hits = hits;
        est.p_hat = static_cast<double>(hits) / static_cast<double>(n_eff_total);
        if (hits == 0) {
            est.no_hits = true;
            est.ci_low = 0.0;
            // one-sided 95% bound treating post-burn-in samples as the budget
            est.ci_high = 1.0 - std::pow(0.05, 1.0 / static_cast<double>(n_eff_total));
            continue;
        }
        const double mean = std::accumulate(bm.begin(), bm.end(), 0.0) / bm.size();
        double ss = 0.0;
        for (double v : bm) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / (bm.size() - 1));
        const double half = t_crit * sd / std::sqrt(static_cast<double>(bm.size()));
        est.ci_low = std::max(0.0, est.p_hat - half);
        est.ci_high = std::min(1.0, est.p_hat + half);
    }
    return out;
}

inline std::uint64_t default_bigjump_window(double x, double a_hat,
                                            std::uint64_t cap = 1000000) {
    const double w = std::ceil(10.0 * x / a_hat);
    if (!(w > 0.0)) return 1;
    return std::min<std::uint64_t>(cap, static_cast<std::uint64_t>(w));
}

struct BigJumpReport {
    double x = 0.0;
    std::uint64_t window = 0;
    std::uint64_t conditioning_events = 0;
    std::uint64_t matched_events = 0;
    double frequency = std::numeric_limits<double>::quiet_NaN();
    double a_hat = 0.0;  // auxiliary spacing (k+1)(a-h)
    double slope = 0.0;  // threshold slope a_hat - b (auxiliary walk drift)
    bool no_events = true;
    // matched lag tuples per event when tracing is enabled
    std::vector<std::vector<std::uint64_t>> trace;
};

// Conditional frequency of the s-k big-jump pattern: among arrivals n with
// D_n > x, the fraction for which s-k distinct lags l <= window satisfy
// sigma_{n-l} > x + l*(a_hat - b), a_hat = (k+1)(a-h). The threshold line
// climbs at the drift of the auxiliary walk sum(sigma_j - a_hat): a jump of
// that size lifts the walk maximum above x, which is the single-big-jump
// event for the order-statistic majorant. Scanned forward over one path with
// a service-time ring buffer. Windows default to the per-x rule; pass
// explicit_windows to override.
inline std::vector<BigJumpReport> bigjump_scan(const QueueConfig& cfg,
                                               std::vector<double> xs, double h,
                                               std::uint64_t n, std::uint64_t burn_in,
                                               std::uint64_t seed,
                                               std::uint64_t window_cap = 1000000,
                                               bool trace = false,
                                               std::span<const std::uint64_t> explicit_windows = {}) {
    if (cfg.interarrival.family() != Family::Deterministic)
        throw std::invalid_argument("big-jump scan requires deterministic interarrival times");
    if (!classify(cfg.service).base.irv)
        throw std::invalid_argument(
            "big-jump scan requires an intermediate regularly varying service family");
    if (cfg.integer_rho() || !cfg.stable())
        throw std::invalid_argument("big-jump scan requires k < rho < k+1");
    std::sort(xs.begin(), xs.end());
    if (!explicit_windows.empty() && explicit_windows.size() != xs.size())
        throw std::invalid_argument("explicit windows must match the x grid");
    const auto [h_lo, h_hi] = h_interval(cfg);
    if (!(h > h_lo && h < h_hi))
        throw std::invalid_argument("h outside the admissible spacing interval");
    const double a_hat = (cfg.k() + 1.0) * (cfg.a() - h);
    const double slope = a_hat - cfg.b();  // positive by the admissible h range
    const int jumps = cfg.s - cfg.k();
    std::vector<BigJumpReport> reports(xs.size());
    std::vector<std::uint64_t> windows(xs.size());
    std::uint64_t ring_len = 1;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        reports[i].x = xs[i];
        reports[i].a_hat = a_hat;
        reports[i].slope = slope;
        windows[i] = explicit_windows.empty() ? default_bigjump_window(xs[i], a_hat, window_cap)
                                              : explicit_windows[i];
        reports[i].window = windows[i];
        ring_len = std::max<std::uint64_t>(ring_len, windows[i]);
    }
    std::vector<double> ring(ring_len, 0.0);
    const double x_min = xs.empty() ? std::numeric_limits<double>::infinity() : xs.front();
    drive_kw(cfg, n, std::vector<double>(cfg.s, 0.0), seed,
             [&](std::uint64_t n_idx, double d, double sigma, double) {
                 if (n_idx > burn_in && n_idx > ring_len && d > x_min) {
                     for (std::size_t i = 0; i < xs.size() && d > xs[i]; ++i) {
                         BigJumpReport& rep = reports[i];
                         ++rep.conditioning_events;
                         int found = 0;
                         std::vector<std::uint64_t> lags;
                         for (std::uint64_t lag = 1; lag <= windows[i]; ++lag) {
                             const double past = ring[(n_idx - lag) % ring_len];
                             if (past > xs[i] + static_cast<double>(lag) * slope) {
                                 ++found;
                                 if (trace) lags.push_back(lag);
                                 if (found == jumps) break;
                             }
                         }
                         if (found == jumps) {
                             ++rep.matched_events;
                             if (trace) rep.trace.push_back(std::move(lags));
                         }
                     }
                 }
                 ring[n_idx % ring_len] = sigma;
             });
    for (auto& rep : reports) {
        rep.no_events = rep.conditioning_events == 0;
        if (!rep.no_events)
            rep.frequency = static_cast<double>(rep.matched_events) /
                            static_cast<double>(rep.conditioning_events);
    }
    return reports;
}

inline BigJumpReport bigjump_frequency(const QueueConfig& cfg, double x,
                                       std::uint64_t window, double h, std::uint64_t n,
                                       std::uint64_t burn_in, std::uint64_t seed,
                                       bool trace = false) {
    if (window == 0) {
        // empty window matches nothing by construction
        const std::uint64_t one = 1;
        auto reports = bigjump_scan(cfg, {x}, h, n, burn_in, seed, 1, false, {&one, 1});
        BigJumpReport rep = reports.front();
        rep.window = 0;
        rep.matched_events = 0;
        rep.frequency = rep.no_events ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        return rep;
    }
    auto reports = bigjump_scan(cfg, {x}, h, n, burn_in, seed, window, trace, {&window, 1});
    return reports.front();
}

struct HillEstimate {
    std::size_t m = 0;
    double alpha_hat = 0.0;
    std::size_t samples_used = 0;
};

// Hill estimator over the top m order statistics of a descending-sorted
// sample: alpha_hat = 1 / mean(log(X_(i)/X_(m+1))).
inline HillEstimate hill_index(std::span<const double> samples_desc, std::size_t m) {
    if (m < 2) throw std::invalid_argument("hill estimator requires m >= 2");
    if (samples_desc.size() < m + 1)
        throw std::invalid_argument("hill estimator requires at least m+1 samples");
    for (std::size_t i = 1; i < samples_desc.size(); ++i)
        if (samples_desc[i] > samples_desc[i - 1])
            throw std::invalid_argument("hill estimator expects descending-sorted samples");
    const double pivot = samples_desc[m];
    if (!(pivot > 0.0))
        throw std::invalid_argument("hill estimator requires strictly positive top statistics");
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += std::log(samples_desc[i] / pivot);
    if (!(acc > 0.0))
        throw std::invalid_argument("hill estimator degenerate: tied top statistics");
    HillEstimate est;
    est.m = m;
    est.samples_used = samples_desc.size();
    est.alpha_hat = static_cast<double>(m) / acc;
    return est;
}

struct MomentPrefix {
    std::uint64_t n = 0;
    double value = 0.0;
};

struct MomentStability {
    double gamma = 0.0;
    std::vector<MomentPrefix> prefixes;
    std::vector<double> ratios;  // successive prefix-value ratios
    bool stabilizing = false;
    double tol = 0.2;
};

namespace detail {

inline MomentStability moment_stability_from_prefixes(double gamma,
                                                      std::vector<MomentPrefix> prefixes,
                                                      double tol) {
    MomentStability out;
    out.gamma = gamma;
    out.tol = tol;
    out.prefixes = std::move(prefixes);
    out.stabilizing = true;
    for (std::size_t i = 1; i < out.prefixes.size(); ++i) {
        const double prev = out.prefixes[i - 1].value;
        const double cur = out.prefixes[i].value;
        double ratio;
        if (prev == 0.0 && cur == 0.0)
            ratio = 1.0;
        else if (prev == 0.0)
            ratio = std::numeric_limits<double>::infinity();
        else
            ratio = cur / prev;
        out.ratios.push_back(ratio);
        if (!(std::fabs(ratio - 1.0) <= tol)) out.stabilizing = false;
    }
    return out;
}

inline std::vector<std::uint64_t> prefix_marks(std::uint64_t n, int grid_points) {
    std::vector<std::uint64_t> marks;
    for (int g = grid_points - 1; g >= 0; --g) {
        const std::uint64_t mark = n >> g;
        if (mark == 0) continue;
        if (marks.empty() || mark != marks.back()) marks.push_back(mark);
    }
    return marks;
}

}  // namespace detail

// Empirical moment (1/n) sum D_i^gamma over nested prefixes n/2^j, ..., n.
// Stabilizing iff every successive prefix ratio is within tol of 1.
inline MomentStability empirical_moment(std::span<const double> samples, double gamma,
                                        int grid_points = 8, double tol = 0.2) {
    if (!(gamma > 0.0)) throw std::invalid_argument("empirical moment requires gamma > 0");
    if (samples.empty()) throw std::invalid_argument("empirical moment requires samples");
    const auto marks = detail::prefix_marks(samples.size(), grid_points);
    std::vector<MomentPrefix> prefixes;
    double acc = 0.0;
    std::size_t next_mark = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        acc += std::pow(samples[i], gamma);
        if (next_mark < marks.size() && i + 1 == marks[next_mark]) {
            prefixes.push_back({marks[next_mark], acc / static_cast<double>(marks[next_mark])});
            ++next_mark;
        }
    }
    return detail::moment_stability_from_prefixes(gamma, std::move(prefixes), tol);
}

// Streaming variant over a simulated path: all gammas in one pass, without
// retaining the delays.
inline std::vector<MomentStability> empirical_moment_path(
    const QueueConfig& cfg, std::span<const double> gammas, std::uint64_t n_samples,
    std::uint64_t burn_in, std::uint64_t seed, int grid_points = 8, double tol = 0.2) {
    if (!cfg.stable())
        throw std::invalid_argument("stationary estimation requires rho < s");
    const auto marks = detail::prefix_marks(n_samples, grid_points);
    std::vector<double> acc(gammas.size(), 0.0);
    std::vector<std::vector<MomentPrefix>> prefixes(gammas.size());
    std::size_t next_mark = 0;
    drive_kw(cfg, burn_in + n_samples, std::vector<double>(cfg.s, 0.0), seed,
             [&](std::uint64_t n_idx, double d, double, double) {
                 if (n_idx <= burn_in) return;
                 const std::uint64_t j = n_idx - burn_in;
                 for (std::size_t g = 0; g < gammas.size(); ++g)
                     acc[g] += std::pow(d, gammas[g]);
                 if (next_mark < marks.size() && j == marks[next_mark]) {
                     for (std::size_t g = 0; g < gammas.size(); ++g)
                         prefixes[g].push_back({j, acc[g] / static_cast<double>(j)});
                     ++next_mark;
                 }
             });
    std::vector<MomentStability> out;
    out.reserve(gammas.size());
    for (std::size_t g = 0; g < gammas.size(); ++g)
        out.push_back(detail::moment_stability_from_prefixes(gammas[g], std::move(prefixes[g]), tol));
    return out;
}

struct ExceedanceProfile {
    std::vector<double> t_grid;
    std::vector<std::uint64_t> exceedances;
    std::vector<double> frequency;
    std::uint64_t events = 0;
    bool fit_ok = false;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    std::size_t fit_points = 0;
    std::uint64_t min_fit_count = 50;
};

// Exceedance frequencies of D_n - U_{n,(k+1)} over a t grid, with a least
// squares fit of log-frequency against t over the points backed by at least
// min_fit_count exceedances.
inline ExceedanceProfile majorant_exceedance_profile(const QueueConfig& cfg, double h,
                                                     std::vector<double> t_grid,
                                                     std::uint64_t n, std::uint64_t burn_in,
                                                     std::uint64_t seed,
                                                     std::uint64_t min_fit_count = 50) {
    std::sort(t_grid.begin(), t_grid.end());
    ExceedanceProfile prof;
    prof.t_grid = t_grid;
    prof.exceedances.assign(t_grid.size(), 0);
    prof.min_fit_count = min_fit_count;
    drive_majorant(cfg, h, burn_in + n, seed,
                   [&](std::uint64_t n_idx, double d, double u_order,
                       const std::vector<double>&, int) {
                       if (n_idx <= burn_in) return;
                       ++prof.events;
                       const double diff = d - u_order;
                       for (std::size_t i = 0; i < prof.t_grid.size() && diff > prof.t_grid[i]; ++i)
                           ++prof.exceedances[i];
                   });
    prof.frequency.resize(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        prof.frequency[i] = prof.events
                                ? static_cast<double>(prof.exceedances[i]) /
                                      static_cast<double>(prof.events)
                                : 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (prof.exceedances[i] < min_fit_count) continue;
        const double y = std::log(prof.frequency[i]);
        sx += t_grid[i];
        sy += y;
        sxx += t_grid[i] * t_grid[i];
        sxy += t_grid[i] * y;
        ++used;
    }
    prof.fit_points = used;
    if (used >= 2) {
        const double denom = used * sxx - sx * sx;
        if (denom > 0.0) {
            prof.slope = (used * sxy - sx * sy) / denom;
            prof.intercept = (sy - prof.slope * sx) / used;
            prof.fit_ok = true;
        }
    }
    return prof;
}

struct QkResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

// Exact enumeration of sum over i1<...<is of q_{i1}...q_{is} against
// (1/s!)(q_s + q_{s+1} + ... + q_L)^s, with both sides truncated at L.
inline QkResult lemma_qk_bruteforce(std::span<const double> q, int s) {
    const int len = static_cast<int>(q.size());
    if (s < 1 || s > 4) throw std::invalid_argument("qk enumeration supports s in {1..4}");
    if (len < s || len > 25)
        throw std::invalid_argument("qk enumeration supports s <= L <= 25");
    for (int i = 0; i < len; ++i) {
        if (!(q[i] > 0.0)) throw std::invalid_argument("qk requires positive terms");
        if (i > 0 && q[i] > q[i - 1])
            throw std::invalid_argument("qk requires a nonincreasing sequence");
    }
    QkResult res;
    // ordered-subset enumeration, s <= 4
    for (int i1 = 0; i1 < len; ++i1) {
        if (s == 1) {
            res.lhs += q[i1];
            continue;
        }
        for (int i2 = i1 + 1; i2 < len; ++i2) {
            if (s == 2) {
                res.lhs += q[i1] * q[i2];
                continue;
            }
            for (int i3 = i2 + 1; i3 < len; ++i3) {
                if (s == 3) {
                    res.lhs += q[i1] * q[i2] * q[i3];
                    continue;
                }
                for (int i4 = i3 + 1; i4 < len; ++i4)
                    res.lhs += q[i1] * q[i2] * q[i3] * q[i4];
            }
        }
    }
    double tail_sum = 0.0;
    for (int j = s - 1; j < len; ++j) tail_sum += q[j];  // q_s onward, 1-based
    res.rhs = std::pow(tail_sum, s) / factorial(s);
    res.holds = res.lhs >= res.rhs;
    return res;
}

struct VerdictRow {
    double x = 0.0;
    double p_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    double slack = 2.0;
    std::uint64_t hits = 0;
    std::uint64_t n_effective = 0;
    bool powered = false;
    bool pass = false;
};

// Confronts estimates with a bound band using CI endpoints conservatively:
// lower/slack <= ci_high and ci_low <= upper*slack. A no-hit point passes the
// lower check only when the run had no power to see it (lower * n < 3).
inline std::vector<VerdictRow> sandwich_verdict(std::span<const TailEstimate> estimates,
                                                std::span<const double> lower,
                                                std::span<const double> upper,
                                                double slack = 2.0,
                                                double power_hits = 30.0) {
    if (estimates.size() != lower.size() || estimates.size() != upper.size())
        throw std::invalid_argument("sandwich verdict needs matching grids");
    if (!(slack >= 1.0)) throw std::invalid_argument("slack must be >= 1");
    std::vector<VerdictRow> rows(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const TailEstimate& est = estimates[i];
        VerdictRow& row = rows[i];
        row.x = est.x;
        row.p_hat = est.p_hat;
        row.ci_low = est.ci_low;
        row.ci_high = est.ci_high;
        row.lower = std::isnan(lower[i]) ? 0.0 : lower[i];
        row.upper = std::isnan(upper[i]) ? std::numeric_limits<double>::infinity() : upper[i];
        row.slack = slack;
        row.hits = est.hits;
        row.n_effective = est.n_effective;
        row.powered = row.lower * static_cast<double>(est.n_effective) >= power_hits;
        bool lower_ok;
        if (est.hits == 0)
            lower_ok = row.lower * static_cast<double>(est.n_effective) < 3.0;
        else
            lower_ok = est.ci_high >= row.lower / slack;
        const bool upper_ok = est.ci_low <= row.upper * slack;
        row.pass = lower_ok && upper_ok;
    }
    return rows;
}

}  // namespace qtail
