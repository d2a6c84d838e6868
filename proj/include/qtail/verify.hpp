#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qtail/bounds.hpp"
#include "qtail/estimate.hpp"
#include "qtail/queue.hpp"
#include "qtail/rng.hpp"

namespace qtail {

struct SuiteResult {
    std::string name;
    std::uint64_t checked = 0;
    std::uint64_t violations = 0;
    double max_abs_dev = 0.0;
    bool pass = false;
    std::string detail;
};

// Composite-Simpson reference integrator over geometric panels, independent of
// the adaptive Gauss-Kronrod code path. Used as the quadrature oracle.
// breakpoint marks a kink or jump of the integrand (e.g. the end of a flat
// tail segment); the grid is aligned to it so panels stay smooth.
inline double simpson_oracle_to_inf(const std::function<double(double)>& f, double lo,
                                    double breakpoint = std::nan(""),
                                    int points_per_panel = 1024, int max_panels = 120) {
    auto simpson = [&](double a, double b) {
        const int n = points_per_panel;  // even
        const double h = (b - a) / n;
        double acc = f(a) + f(b);
        for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
        return acc * h / 3.0;
    };
    double total = 0.0;
    double left = lo;
    if (!std::isnan(breakpoint) && breakpoint > lo) {
        // evaluate just inside the kink; the jump (if any) sits at its right edge
        const double eps = 1e-9 * (1.0 + std::fabs(breakpoint));
        const double inner = std::max(breakpoint - eps, lo);
        total += simpson(lo, inner) + f(inner) * (breakpoint - inner);
        left = breakpoint;
    }
    double width = 1.0;
    double prev = 0.0;
    for (int p = 0; p < max_panels; ++p) {
        const double val = simpson(left, left + width);
        total += val;
        const double av = std::fabs(val);
        if (p > 0 && av < 1e-17 * (std::fabs(total) + 1e-300)) break;
        if (p > 0 && av < prev) {
            const double ratio = prev > 0.0 ? av / prev : 0.0;
            if (ratio < 0.5 && av < 1e-14 * (std::fabs(total) + 1e-300)) {
                total += av * ratio / (1.0 - ratio);
                break;
            }
        }
        prev = av;
        left += width;
        width *= 2.0;
    }
    return total;
}

inline double simpson_oracle(const std::function<double(double)>& f, double lo,
                             double hi, int points = 4096) {
    const double h = (hi - lo) / points;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < points; ++i) acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

namespace detail {

inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.uniform01();
}

inline Distribution random_service(Rng& rng) {
    switch (rng.next() % 5) {
        case 0: return Distribution::pareto(uniform_in(rng, 1.2, 4.0), uniform_in(rng, 0.2, 3.0));
        case 1: return Distribution::weibull(uniform_in(rng, 0.3, 1.0), uniform_in(rng, 0.2, 3.0));
        case 2: return Distribution::lognormal(uniform_in(rng, -1.0, 1.0), uniform_in(rng, 0.2, 1.5));
        case 3: return Distribution::exponential(uniform_in(rng, 0.2, 3.0));
        default: return Distribution::deterministic(uniform_in(rng, 0.0, 3.0));
    }
}

inline Distribution random_arrivals(Rng& rng) {
    switch (rng.next() % 3) {
        case 0: return Distribution::deterministic(uniform_in(rng, 0.3, 3.0));
        case 1: return Distribution::exponential(uniform_in(rng, 0.3, 3.0));
        default: return Distribution::weibull(uniform_in(rng, 0.4, 1.0), uniform_in(rng, 0.3, 3.0));
    }
}

}  // namespace detail

// Pathwise comparison contract d_tilde_n <= d_hat_n + M_{n-1}: zero tolerance.
// Draws are snapped to the dyadic lattice so the inequality is checked in
// exact arithmetic.
inline SuiteResult verify_coupling(std::uint64_t n_configs, std::uint64_t steps_per_config,
                                   std::uint64_t seed) {
    SuiteResult res;
    res.name = "coupling";
    Rng meta(seed, 777);
    for (std::uint64_t c = 0; c < n_configs; ++c) {
        const int s = 1 + static_cast<int>(meta.next() % 4);
        const Distribution service = detail::random_service(meta);
        const Distribution tilde = detail::random_arrivals(meta);
        const Distribution hat = detail::random_arrivals(meta);
        const std::uint64_t run_seed = seed * 1000003ULL + c;
        const auto rec = coupled_comparison(s, service, tilde, hat, steps_per_config,
                                            run_seed, false, true);
        res.checked += rec.steps;
        if (rec.violations > 0 && res.violations == 0)
            res.detail = "first violation: seed " + std::to_string(run_seed) + ", s=" +
                         std::to_string(s) + ", service " + service.describe() +
                         ", arrivals " + tilde.describe() + " vs " + hat.describe() + "; ";
        res.violations += rec.violations;
    }
    res.pass = res.violations == 0;
    res.detail += std::to_string(res.violations) + " violations over " +
                  std::to_string(res.checked) + " coupled steps";
    return res;
}

// Monotonicity of the workload recursion in the initial state, the service
// times and the interarrival times, plus the decreasing-increment property.
// Inputs live on the dyadic lattice, so every comparison is exact.
inline SuiteResult verify_monotonicity(std::uint64_t n_paths, std::uint64_t seed) {
    SuiteResult res;
    res.name = "monotonicity";
    Rng meta(seed, 778);
    for (std::uint64_t p = 0; p < n_paths; ++p) {
        const int s = 1 + static_cast<int>(meta.next() % 4);
        const int len = 16 + static_cast<int>(meta.next() % 241);
        std::vector<double> sigma(len), tau(len), sigma_hi(len), tau_lo(len);
        for (int i = 0; i < len; ++i) {
            sigma[i] = dyadic_clip(detail::uniform_in(meta, 0.0, 4.0));
            tau[i] = dyadic_clip(detail::uniform_in(meta, 0.0, 3.0));
            sigma_hi[i] = sigma[i] + dyadic_clip(detail::uniform_in(meta, 0.0, 2.0));
            tau_lo[i] = dyadic_clip(tau[i] * meta.uniform01());
        }
        // dominated initial states: hi = lo + nonnegative bumps, re-sorted
        // (order statistics preserve coordinatewise domination)
        std::vector<double> lo_init(s), hi_init(s);
        double acc = 0.0;
        for (int i = 0; i < s; ++i) {
            acc += dyadic_clip(detail::uniform_in(meta, 0.0, 2.0));
            lo_init[i] = acc;
            hi_init[i] = acc + dyadic_clip(detail::uniform_in(meta, 0.0, 2.0));
        }
        std::sort(hi_init.begin(), hi_init.end());

        std::vector<double> w1 = lo_init, w2 = hi_init;
        std::vector<double> w_sig = lo_init, w_tau = lo_init;
        double prev_sum1 = 0.0, prev_sum2 = 0.0;
        for (int i = 0; i < s; ++i) {
            prev_sum1 += w1[i];
            prev_sum2 += w2[i];
        }
        for (int n = 0; n < len; ++n) {
            kw_step_inplace(w1, sigma[n], tau[n]);
            kw_step_inplace(w2, sigma[n], tau[n]);
            kw_step_inplace(w_sig, sigma_hi[n], tau[n]);
            kw_step_inplace(w_tau, sigma[n], tau_lo[n]);
            double sum1 = 0.0, sum2 = 0.0;
            for (int i = 0; i < s; ++i) {
                if (w1[i] > w2[i]) ++res.violations;       // initial-state monotonicity
                if (w1[i] > w_sig[i]) ++res.violations;    // service-time monotonicity
                if (w1[i] > w_tau[i]) ++res.violations;    // interarrival monotonicity
                sum1 += w1[i];
                sum2 += w2[i];
            }
            if (sum1 - prev_sum1 < sum2 - prev_sum2) ++res.violations;  // increment property
            prev_sum1 = sum1;
            prev_sum2 = sum2;
            res.checked += 4;
        }
        if (res.violations > 0 && res.detail.empty())
            res.detail = "first violation at path " + std::to_string(p) + " (seed " +
                         std::to_string(seed) + "); ";
    }
    res.pass = res.violations == 0;
    res.detail += std::to_string(res.violations) + " violations over " +
                  std::to_string(res.checked) + " coupled checks";
    return res;
}

// Exact combinatorial inequality on random nonincreasing positive sequences.
inline SuiteResult verify_qk(std::uint64_t n_sequences, std::uint64_t seed) {
    SuiteResult res;
    res.name = "qk";
    Rng meta(seed, 779);
    for (std::uint64_t i = 0; i < n_sequences; ++i) {
        const int s = 1 + static_cast<int>(meta.next() % 4);
        const int len = s + static_cast<int>(meta.next() % (25 - s));
        std::vector<double> q(len);
        double v = detail::uniform_in(meta, 0.5, 4.0);
        for (int j = 0; j < len; ++j) {
            q[j] = v;
            v *= detail::uniform_in(meta, 0.2, 1.0);  // geometric-ish decay
        }
        const QkResult r = lemma_qk_bruteforce(q, s);
        ++res.checked;
        if (!r.holds) {
            if (res.violations == 0)
                res.detail = "first violation: sequence " + std::to_string(i) + " (seed " +
                             std::to_string(seed) + "), s=" + std::to_string(s) + "; ";
            ++res.violations;
        }
    }
    res.pass = res.violations == 0;
    res.detail += std::to_string(res.checked - res.violations) + "/" +
                  std::to_string(res.checked) + " hold";
    return res;
}

namespace detail {

struct TwoPointLaw {
    double v0, v1, p0;  // value v0 with probability p0, else v1
};

// Exact enumeration of D_{n+1} from the single-server recursion against the
// running-maximum functional max(S_j, j <= n) on the same draw tree; the two
// must agree in distribution. Distributions are accumulated over all 4^n
// outcome sequences with shared prefixes.
inline bool lindley_enumeration_matches(const TwoPointLaw& sig, const TwoPointLaw& tau,
                                        int n, double tol, double* max_dev) {
    std::map<double, double> dist_d, dist_m;
    struct Frame {
        int depth;
        double d, s, max_s, prob;
    };
    std::vector<Frame> stack;
    stack.push_back({0, 0.0, 0.0, 0.0, 1.0});
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.depth == n) {
            dist_d[f.d] += f.prob;
            dist_m[f.max_s] += f.prob;
            continue;
        }
        for (int a = 0; a < 2; ++a) {
            const double sv = a == 0 ? sig.v0 : sig.v1;
            const double sp = a == 0 ? sig.p0 : 1.0 - sig.p0;
            for (int b = 0; b < 2; ++b) {
                const double tv = b == 0 ? tau.v0 : tau.v1;
                const double tp = b == 0 ? tau.p0 : 1.0 - tau.p0;
                Frame g;
                g.depth = f.depth + 1;
                g.d = lindley_step(f.d, sv, tv);
                g.s = f.s + (sv - tv);
                g.max_s = std::max(f.max_s, g.s);
                g.prob = f.prob * sp * tp;
                stack.push_back(g);
            }
        }
    }
    bool ok = dist_d.size() == dist_m.size();
    for (auto it_d = dist_d.begin(), it_m = dist_m.begin();
         ok && it_d != dist_d.end() && it_m != dist_m.end(); ++it_d, ++it_m) {
        if (it_d->first != it_m->first) {
            ok = false;
            break;
        }
        const double dev = std::fabs(it_d->second - it_m->second);
        if (max_dev && dev > *max_dev) *max_dev = dev;
        if (dev > tol) ok = false;
    }
    return ok;
}

}  // namespace detail

// Distributional identity between the single-server delay and the running
// maximum of the increment walk, by exact enumeration of two-point laws.
inline SuiteResult verify_lindley(int max_n) {
    SuiteResult res;
    res.name = "lindley";
    const detail::TwoPointLaw laws[][2] = {
        {{1.0, 4.0, 0.35}, {2.0, 3.0, 0.6}},
        {{0.0, 3.0, 0.5}, {1.0, 2.0, 0.25}},
        {{2.0, 7.0, 0.8}, {1.0, 5.0, 0.45}},
    };
    for (const auto& pair : laws) {
        for (int n = 1; n <= max_n; ++n) {
            ++res.checked;
            if (!detail::lindley_enumeration_matches(pair[0], pair[1], n, 1e-12,
                                                     &res.max_abs_dev))
                ++res.violations;
        }
    }
    res.pass = res.violations == 0;
    res.detail = std::to_string(res.checked - res.violations) + "/" +
                 std::to_string(res.checked) + " exact distribution matches, max prob dev " +
                 std::to_string(res.max_abs_dev);
    return res;
}

// Bitwise agreement of the s=1 workload step with the scalar recursion.
inline SuiteResult verify_reduction(std::uint64_t n_steps, std::uint64_t seed) {
    SuiteResult res;
    res.name = "reduction";
    Rng meta(seed, 780);
    std::vector<double> w(1, 0.0);
    double d = 0.0;
    for (std::uint64_t i = 0; i < n_steps; ++i) {
        if (meta.uniform01() < 0.01) {
            d = detail::uniform_in(meta, 0.0, 10.0);
            w[0] = d;
        }
        const double sigma = detail::uniform_in(meta, 0.0, 5.0);
        const double tau = detail::uniform_in(meta, 0.0, 4.0);
        kw_step_inplace(w, sigma, tau);
        d = lindley_step(d, sigma, tau);
        ++res.checked;
        if (w[0] != d) ++res.violations;
    }
    res.pass = res.violations == 0;
    res.detail = std::to_string(res.violations) + " mismatches over " +
                 std::to_string(res.checked) + " fuzzed steps";
    return res;
}

// Adaptive quadrature against closed forms and the Simpson oracle.
inline SuiteResult verify_quadrature() {
    SuiteResult res;
    res.name = "quadrature";
    auto record = [&](double got, double want, double tol) {
        ++res.checked;
        const double dev = std::fabs(got - want);
        res.max_abs_dev = std::max(res.max_abs_dev, dev);
        if (dev > tol) ++res.violations;
    };
    {
        auto q = integrate_to_inf([](double y) { return std::exp(-y); }, 0.0, 1e-10);
        record(q.value, 1.0, 1e-9);
    }
    {
        auto q = integrate([](double y) { return 3.0 * y * y; }, 0.0, 1.0, 1e-12);
        record(q.value, 1.0, 1e-10);
    }
    {
        // partial fractions: 4 ln 2 - 2
        auto q = integrate_to_inf(
            [](double z) { return 1.0 / ((1.0 + z) * (1.0 + 0.5 * z) * (1.0 + 0.5 * z)); },
            0.0, 1e-10);
        record(q.value, 4.0 * std::log(2.0) - 2.0, 1e-9);
    }
    {
        auto f = [](double y) { return std::exp(-0.3 * y) / (1.0 + y * y); };
        auto q = integrate_to_inf(f, 0.0, 1e-10);
        const double oracle = simpson_oracle_to_inf(f, 0.0);
        record(q.value, oracle, std::fabs(oracle) * 1e-8);
    }
    {
        auto f = [](double y) { return std::pow(1.0 + y, -2.5); };
        auto q = integrate_to_inf(f, 0.0, 1e-10);
        record(q.value, 1.0 / 1.5, 1e-9);
    }
    res.pass = res.violations == 0;
    res.detail = "max abs deviation " + std::to_string(res.max_abs_dev);
    return res;
}

// Residual tails against independent Simpson integration of the defining
// integral, across all families.
inline SuiteResult verify_residual(std::uint64_t points_per_family, std::uint64_t seed) {
    SuiteResult res;
    res.name = "residual";
    const Distribution fams[] = {
        Distribution::pareto(2.5, 0.6),  Distribution::pareto(3.0, 1.0),
        Distribution::pareto(1.5, 1.0),  Distribution::weibull(0.5, 1.0),
        Distribution::weibull(0.8, 2.0), Distribution::lognormal(0.0, 1.0),
        Distribution::lognormal(0.5, 0.5), Distribution::exponential(1.0),
        Distribution::exponential(0.25), Distribution::deterministic(3.0),
    };
    Rng meta(seed, 781);
    for (const auto& d : fams) {
        ResidualDistribution res_d(d);
        // spread test points over the bulk and moderately deep tail
        const double x_hi = d.family() == Family::Deterministic
                                ? d.mean()
                                : d.quantile_from_tail(1e-4);
        double kink = std::nan("");
        if (d.family() == Family::Pareto) kink = d.p2();
        if (d.family() == Family::Deterministic) kink = d.p1();
        for (std::uint64_t i = 0; i < points_per_family; ++i) {
            const double x = meta.uniform01() * x_hi;
            const double got = res_d.tail(x);
            const double bp = (!std::isnan(kink) && x < kink) ? kink : std::nan("");
            const double want =
                simpson_oracle_to_inf([&](double y) { return d.tail(y); }, x, bp) / d.mean();
            const double dev = std::fabs(got - std::min(1.0, std::max(0.0, want)));
            res.max_abs_dev = std::max(res.max_abs_dev, dev);
            ++res.checked;
            if (dev > 1e-8) ++res.violations;
        }
    }
    res.pass = res.violations == 0;
    res.detail = "max abs deviation vs quadrature oracle " + std::to_string(res.max_abs_dev);
    return res;
}

}  // namespace qtail
