#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qtail/dist.hpp"
#include "qtail/rng.hpp"

namespace qtail {

// Stream ids used to derive per-consumer substreams from one run seed.
inline constexpr std::uint64_t kServiceStream = 1;
inline constexpr std::uint64_t kArrivalStream = 2;
inline constexpr std::uint64_t kArrivalStreamAlt = 3;
inline constexpr std::uint64_t kAuxServiceStreamBase = 16;

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Single fused one-server update. Coupled systems and the s=1 reduction all
// go through this exact expression, so pathwise comparisons are bit-exact.
inline double lindley_step(double d, double sigma, double tau) {
    return positive_part(d + sigma - tau);
}

// Orders coordinates nondecreasingly (the R operator). Accepts any reals.
inline std::vector<double> r_sort(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// Sorted residual-workload state: 0 <= w[0] <= ... <= w[s-1].
struct WorkloadVector {
    std::vector<double> w;

    explicit WorkloadVector(std::size_t s) : w(s, 0.0) {
        if (s == 0) throw std::invalid_argument("workload vector needs s >= 1");
    }
    explicit WorkloadVector(std::vector<double> values) : w(std::move(values)) {
        if (w.empty()) throw std::invalid_argument("workload vector needs s >= 1");
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!(w[i] >= 0.0))
                throw std::invalid_argument("workload coordinates must be nonnegative");
            if (i > 0 && w[i] < w[i - 1])
                throw std::invalid_argument("workload coordinates must be nondecreasing");
        }
    }

    std::size_t servers() const { return w.size(); }
    double delay() const { return w.front(); }
};

// In-place workload recursion step: the arriving customer feeds the least
// loaded server, every server pays tau, order is restored by insertion (the
// shifted suffix is already sorted).
inline void kw_step_inplace(std::vector<double>& w, double sigma, double tau) {
    const std::size_t s = w.size();
    const double fed = lindley_step(w[0], sigma, tau);
    for (std::size_t i = 0; i + 1 < s; ++i) w[i] = positive_part(w[i + 1] - tau);
    std::size_t pos = s - 1;
    while (pos > 0 && w[pos - 1] > fed) {
        w[pos] = w[pos - 1];
        --pos;
    }
    w[pos] = fed;
}

inline WorkloadVector kw_step(const WorkloadVector& w, double sigma, double tau) {
    if (!(sigma >= 0.0 && tau >= 0.0))
        throw std::invalid_argument("kw_step requires sigma, tau >= 0");
    std::vector<double> next = w.w;
    kw_step_inplace(next, sigma, tau);
    return WorkloadVector(std::move(next));
}

struct QueueConfig {
    int s;
    Distribution interarrival;
    Distribution service;

    QueueConfig(int servers, Distribution inter, Distribution serv)
        : s(servers), interarrival(std::move(inter)), service(std::move(serv)) {
        if (s < 1) throw std::invalid_argument("queue requires s >= 1");
        if (!(interarrival.mean() > 0.0))
            throw std::invalid_argument("interarrival mean must be positive");
    }

    double a() const { return interarrival.mean(); }
    double b() const { return service.mean(); }
    double rho() const { return b() / a(); }
    int k() const { return static_cast<int>(std::floor(rho())); }
    bool stable() const { return rho() < static_cast<double>(s); }
    bool integer_rho() const {
        const double r = rho();
        return r == std::floor(r);
    }
};

// Admissible auxiliary spacing parameters: h in (k/(k+1)*(a - b/(k+1)), a - b/(k+1)).
inline std::pair<double, double> h_interval(double a, double b, int k) {
    const double hi = a - b / (k + 1.0);
    if (!(hi > 0.0))
        throw std::invalid_argument("majorant spacing requires rho < k+1");
    return {hi * k / (k + 1.0), hi};
}

inline std::pair<double, double> h_interval(const QueueConfig& cfg) {
    return h_interval(cfg.a(), cfg.b(), cfg.k());
}

// Numerically safest default: the interval midpoint.
inline double default_h(const QueueConfig& cfg) {
    auto [lo, hi] = h_interval(cfg);
    return 0.5 * (lo + hi);
}

// Drives the sorted workload recursion. visit(n, delay, sigma_n, tau_next) is
// called for n = 1..steps, where delay is the waiting time of arrival n and
// (sigma_n, tau_next) advance the state to arrival n+1. Per step exactly one
// uniform is drawn from each of the service and arrival substreams.
template <class Visitor>
inline void drive_kw(const QueueConfig& cfg, std::uint64_t steps,
                     std::span<const double> init, std::uint64_t seed,
                     Visitor&& visit) {
    if (init.size() != static_cast<std::size_t>(cfg.s))
        throw std::invalid_argument("init size must equal s");
    std::vector<double> w(init.begin(), init.end());
    Rng service_rng(seed, kServiceStream);
    Rng arrival_rng(seed, kArrivalStream);
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const double d = w[0];
        const double sigma = cfg.service.sample(service_rng);
        const double tau = cfg.interarrival.sample(arrival_rng);
        visit(n, d, sigma, tau);
        kw_step_inplace(w, sigma, tau);
    }
}

struct CaptureOptions {
    bool workloads = false;
    bool assignments = false;
    bool draws = false;
};

struct PathRecord {
    int s = 1;
    std::uint64_t seed = 0;
    std::vector<double> delays;     // d_n = min workload seen by arrival n
    std::vector<double> workloads;  // row-major steps x s when captured
    std::vector<int> assignments;   // i_n (0-based) when captured
    std::vector<double> sigmas;
    std::vector<double> taus;
};

// Unsorted line workloads with the first-minimum tie break: the arriving
// customer joins line i_n = min{i : V_ni = min_j V_nj}.
inline int argmin_first(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

inline PathRecord simulate_path(const QueueConfig& cfg, std::uint64_t steps,
                                std::span<const double> init, std::uint64_t seed,
                                CaptureOptions opts = {}) {
    if (steps < 1) throw std::invalid_argument("simulate_path requires n >= 1");
    PathRecord rec;
    rec.s = cfg.s;
    rec.seed = seed;
    rec.delays.reserve(steps);
    if (!opts.assignments) {
        if (init.size() != static_cast<std::size_t>(cfg.s))
            throw std::invalid_argument("init size must equal s");
        if (opts.workloads) rec.workloads.reserve(steps * cfg.s);
        std::vector<double> w(init.begin(), init.end());
        Rng service_rng(seed, kServiceStream);
        Rng arrival_rng(seed, kArrivalStream);
        for (std::uint64_t n = 1; n <= steps; ++n) {
            rec.delays.push_back(w[0]);
            if (opts.workloads)
                rec.workloads.insert(rec.workloads.end(), w.begin(), w.end());
            const double sigma = cfg.service.sample(service_rng);
            const double tau = cfg.interarrival.sample(arrival_rng);
            if (opts.draws) {
                rec.sigmas.push_back(sigma);
                rec.taus.push_back(tau);
            }
            kw_step_inplace(w, sigma, tau);
        }
        return rec;
    }
    // Assignment capture tracks the raw line vector. The produced delays agree
    // bit-exactly with the sorted engine: both update the same value multiset.
    if (init.size() != static_cast<std::size_t>(cfg.s))
        throw std::invalid_argument("init size must equal s");
    std::vector<double> v(init.begin(), init.end());
    Rng service_rng(seed, kServiceStream);
    Rng arrival_rng(seed, kArrivalStream);
    std::vector<double> sorted;
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const int in = argmin_first(v);
        rec.delays.push_back(v[in]);
        rec.assignments.push_back(in);
        if (opts.workloads) {
            sorted.assign(v.begin(), v.end());
            std::sort(sorted.begin(), sorted.end());
            rec.workloads.insert(rec.workloads.end(), sorted.begin(), sorted.end());
        }
        const double sigma = cfg.service.sample(service_rng);
        const double tau = cfg.interarrival.sample(arrival_rng);
        if (opts.draws) {
            rec.sigmas.push_back(sigma);
            rec.taus.push_back(tau);
        }
        v[in] = lindley_step(v[in], sigma, tau);
        for (int i = 0; i < cfg.s; ++i)
            if (i != in) v[i] = positive_part(v[i] - tau);
    }
    return rec;
}

// Snaps a draw onto the dyadic grid 2^-20, capped at 2^10. On this lattice
// every value the workload recursion can reach over ~1e6 steps is exactly
// representable, so +, - and max incur no rounding and pathwise inequalities
// hold exactly, not just up to ulps.
inline double dyadic_clip(double x) {
    constexpr double kGrid = 1048576.0;  // 2^20
    if (x > 1024.0) x = 1024.0;
    if (x < 0.0) x = 0.0;
    return std::floor(x * kGrid) / kGrid;
}

// Two systems sharing service draws, with interarrival streams tilde and hat.
// Tracks M_n = (M_{n-1} + xi_n)^+, xi_n = tau_hat_{n+1} - tau_tilde_{n+1}, and
// the pathwise contract d_tilde_n <= d_hat_n + M_{n-1}. With exact_draws the
// inputs are snapped to the dyadic lattice and the contract is exact.
struct CoupledComparisonRecord {
    std::vector<double> d_tilde;
    std::vector<double> d_hat;
    std::vector<double> m_prev;  // M_{n-1} aligned with the delays
    std::uint64_t steps = 0;
    std::uint64_t violations = 0;
};

inline CoupledComparisonRecord coupled_comparison(int s, const Distribution& service,
                                                  const Distribution& arrivals_tilde,
                                                  const Distribution& arrivals_hat,
                                                  std::uint64_t steps, std::uint64_t seed,
                                                  bool keep_paths = true,
                                                  bool exact_draws = false,
                                                  bool common_arrival_stream = false) {
    if (s < 1) throw std::invalid_argument("coupled_comparison requires s >= 1");
    CoupledComparisonRecord rec;
    rec.steps = steps;
    if (keep_paths) {
        rec.d_tilde.reserve(steps);
        rec.d_hat.reserve(steps);
        rec.m_prev.reserve(steps);
    }
    std::vector<double> w_tilde(s, 0.0), w_hat(s, 0.0);
    Rng service_rng(seed, kServiceStream);
    Rng tilde_rng(seed, kArrivalStream);
    // common_arrival_stream feeds both systems the same uniforms, so equal
    // interarrival laws produce literally identical sequences
    Rng hat_rng(seed, common_arrival_stream ? kArrivalStream : kArrivalStreamAlt);
    double m = 0.0;
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const double dt = w_tilde[0];
        const double dh = w_hat[0];
        if (dt > dh + m) ++rec.violations;
        if (keep_paths) {
            rec.d_tilde.push_back(dt);
            rec.d_hat.push_back(dh);
            rec.m_prev.push_back(m);
        }
        double sigma = service.sample(service_rng);
        double tau_tilde = arrivals_tilde.sample(tilde_rng);
        double tau_hat = arrivals_hat.sample(hat_rng);
        if (exact_draws) {
            sigma = dyadic_clip(sigma);
            tau_tilde = dyadic_clip(tau_tilde);
            tau_hat = dyadic_clip(tau_hat);
        }
        m = positive_part(m + (tau_hat - tau_tilde));
        kw_step_inplace(w_tilde, sigma, tau_tilde);
        kw_step_inplace(w_hat, sigma, tau_hat);
    }
    return rec;
}

// Joint construction of the s-server system (deterministic interarrivals a)
// and s auxiliary single-server queues with deterministic spacing
// (k+1)(a - h). Queue i receives stream sigma_{n,i}; the s-server system
// consumes sigma_{n,i_n} where i_n is its own first-minimum assignment.
// visit(n, delay, u_order, u, i_n) with u_order the (k+1)-th order statistic
// of (U_{n,1..s}).
template <class Visitor>
inline void drive_majorant(const QueueConfig& cfg, double h, std::uint64_t steps,
                           std::uint64_t seed, Visitor&& visit) {
    if (cfg.interarrival.family() != Family::Deterministic)
        throw std::invalid_argument("majorant construction requires deterministic interarrival times");
    if (!(cfg.b() > 0.0))
        throw std::invalid_argument("majorant construction requires positive service mean");
    const auto [h_lo, h_hi] = h_interval(cfg);
    if (!(h > h_lo && h < h_hi))
        throw std::invalid_argument("h outside the admissible spacing interval");
    const int s = cfg.s;
    const int k = cfg.k();
    const double spacing = (k + 1.0) * (cfg.a() - h);
    std::vector<Rng> aux_rngs;
    aux_rngs.reserve(s);
    for (int i = 0; i < s; ++i) aux_rngs.emplace_back(seed, kAuxServiceStreamBase + i);
    Rng arrival_rng(seed, kArrivalStream);
    std::vector<double> v(s, 0.0), u(s, 0.0), sig(s, 0.0), scratch(s, 0.0);
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const int in = argmin_first(v);
        const double d = v[in];
        scratch = u;
        std::nth_element(scratch.begin(), scratch.begin() + k, scratch.end());
        const double u_order = scratch[k];
        visit(n, d, u_order, u, in);
        for (int i = 0; i < s; ++i) sig[i] = cfg.service.sample(aux_rngs[i]);
        const double tau = cfg.interarrival.sample(arrival_rng);
        v[in] = lindley_step(v[in], sig[in], tau);
        for (int i = 0; i < s; ++i) {
            if (i != in) v[i] = positive_part(v[i] - tau);
            u[i] = lindley_step(u[i], sig[i], spacing);
        }
    }
}

struct MajorantRecord {
    std::vector<double> delays;
    std::vector<double> u_order;    // (k+1)-th order statistic per step
    std::vector<double> u;          // row-major steps x s
    std::vector<int> assignments;
    double h = 0.0;
    double spacing = 0.0;
};

inline MajorantRecord majorant_coupled_path(const QueueConfig& cfg, double h,
                                            std::uint64_t steps, std::uint64_t seed) {
    MajorantRecord rec;
    rec.h = h;
    rec.spacing = (cfg.k() + 1.0) * (cfg.a() - h);
    rec.delays.reserve(steps);
    rec.u_order.reserve(steps);
    rec.u.reserve(steps * cfg.s);
    rec.assignments.reserve(steps);
    drive_majorant(cfg, h, steps, seed,
                   [&](std::uint64_t, double d, double uo, const std::vector<double>& u, int in) {
                       rec.delays.push_back(d);
                       rec.u_order.push_back(uo);
                       rec.u.insert(rec.u.end(), u.begin(), u.end());
                       rec.assignments.push_back(in);
                   });
    return rec;
}

struct DriftResult {
    double w_min_over_n = 0.0;
    double w_max_over_n = 0.0;
    std::uint64_t n = 0;
};

// Scaled extreme workload coordinates of an overloaded system; both converge
// to (b - s a) / s.
inline DriftResult unstable_drift(const QueueConfig& cfg, std::uint64_t steps,
                                  std::uint64_t seed) {
    if (!(cfg.rho() > static_cast<double>(cfg.s)))
        throw std::invalid_argument("unstable_drift requires rho > s");
    if (steps < 1) throw std::invalid_argument("unstable_drift requires n >= 1");
    std::vector<double> w(cfg.s, 0.0);
    Rng service_rng(seed, kServiceStream);
    Rng arrival_rng(seed, kArrivalStream);
    for (std::uint64_t n = 1; n <= steps; ++n) {
        const double sigma = cfg.service.sample(service_rng);
        const double tau = cfg.interarrival.sample(arrival_rng);
        kw_step_inplace(w, sigma, tau);
    }
    DriftResult res;
    res.n = steps;
    res.w_min_over_n = w.front() / static_cast<double>(steps);
    res.w_max_over_n = w.back() / static_cast<double>(steps);
    return res;
}

}  // namespace qtail
