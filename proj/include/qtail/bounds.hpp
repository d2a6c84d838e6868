#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtail/dist.hpp"
#include "qtail/quadrature.hpp"
#include "qtail/queue.hpp"

namespace qtail {

inline double binomial_coefficient(int n, int r) {
    if (r < 0 || r > n) return 0.0;
    double c = 1.0;
    for (int i = 0; i < r; ++i) c = c * (n - i) / (i + 1);
    return c;
}

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Single-server tail asymptotic: (rho/(1-rho)) * Bbar_r(x).
inline double singleserver_asymptotic(double x, double rho,
                                      const ResidualDistribution& res) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("single-server asymptotic requires rho < 1");
    return rho / (1.0 - rho) * res.tail(x);
}

// Theorem 5 constants multiplying Bbar_r^s(x): (rho^s/s!, (rho/(1-rho))^s).
inline std::pair<double, double> theorem5_constants(double rho, int s) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("Theorem 5 requires 0 < rho < 1");
    if (s < 1) throw std::invalid_argument("Theorem 5 requires s >= 1");
    return {std::pow(rho, s) / factorial(s), std::pow(rho / (1.0 - rho), s)};
}

// Theorem 6 lower form (asymptotic, o(1) dropped):
// (rho^{s-k}/(s-k)!) * Bbar_r^{s-k}( (rho+delta)/(rho-k) * x ).
inline double theorem6_lower(double x, double rho, int k, int s, double delta,
                             const ResidualDistribution& res) {
    if (!(rho > k)) throw std::invalid_argument("Theorem 6 lower requires rho > k");
    if (!(delta > 0.0)) throw std::invalid_argument("Theorem 6 lower requires delta > 0");
    if (k < 0 || k > s - 1) throw std::invalid_argument("Theorem 6 requires k in {0,...,s-1}");
    const int m = s - k;
    const double scale = (rho + delta) / (rho - k);
    return std::pow(rho, m) / factorial(m) * res.min_tail(m, scale * x);
}

// Theorem 6 upper form (asymptotic, o(1) dropped):
// C(s,k) * ((k+1)rho/(k+1-rho))^{s-k} * Bbar_r^{s-k}( x(1-delta) ).
inline double theorem6_upper(double x, double rho, int k, int s, double delta,
                             const ResidualDistribution& res) {
    if (!(rho < k + 1.0))
        throw std::invalid_argument("Theorem 6 upper requires rho < k+1");
    if (!(delta >= 0.0 && delta < 1.0))
        throw std::invalid_argument("Theorem 6 upper requires delta in [0,1)");
    if (k < 0 || k > s - 1) throw std::invalid_argument("Theorem 6 requires k in {0,...,s-1}");
    if (!classify(res.base()).residual.subexp)
        throw std::invalid_argument(
            "Theorem 6 upper requires a subexponential residual distribution");
    const int m = s - k;
    const double c = (k + 1.0) * rho / (k + 1.0 - rho);
    return binomial_coefficient(s, k) * std::pow(c, m) * res.min_tail(m, x * (1.0 - delta));
}

// Concrete order-exact band constants c1, c2 with c1 Bbar_r^{s-k}(x) <=
// P{D > x} <= c2 Bbar_r^{s-k}(x). For regularly varying residuals the
// argument scalings of Theorem 6 convert to exact constant factors; for other
// long-and-dominated families no exact conversion exists and the band is
// evaluated with the scaled arguments instead (constants_exact = false).
struct Corollary1Band {
    double c1 = 0.0;
    double c2 = 0.0;
    bool constants_exact = false;
    double delta_lower = 0.1;
    double delta_upper = 0.05;
};

inline Corollary1Band corollary1_constants(double rho, int k, int s,
                                           const ResidualDistribution& res,
                                           double delta_lower = 0.1,
                                           double delta_upper = 0.05) {
    const auto tags = classify(res.base());
    if (!tags.residual.long_dominated)
        throw std::invalid_argument(
            "order-exact band requires a long-tailed dominated-varying residual");
    if (!(rho > k && rho < k + 1.0))
        throw std::invalid_argument("order-exact band requires k < rho < k+1");
    Corollary1Band band;
    band.delta_lower = delta_lower;
    band.delta_upper = delta_upper;
    const int m = s - k;
    const double lower_const = std::pow(rho, m) / factorial(m);
    const double upper_const = binomial_coefficient(s, k) *
                               std::pow((k + 1.0) * rho / (k + 1.0 - rho), m);
    if (tags.residual.rv) {
        const double idx = tags.residual.rv_index;
        const double scale_lower = (rho + delta_lower) / (rho - k);
        band.c1 = lower_const * std::pow(scale_lower, -idx * m);
        band.c2 = upper_const * std::pow(1.0 - delta_upper, -idx * m);
        band.constants_exact = true;
    } else {
        band.c1 = lower_const;
        band.c2 = upper_const;
        band.constants_exact = false;
    }
    return band;
}

inline std::pair<double, double> corollary1_band(double x, double rho, int k, int s,
                                                 const ResidualDistribution& res,
                                                 double delta_lower = 0.1,
                                                 double delta_upper = 0.05) {
    const Corollary1Band band =
        corollary1_constants(rho, k, s, res, delta_lower, delta_upper);
    const int m = s - k;
    if (band.constants_exact) {
        const double base = res.min_tail(m, x);
        return {band.c1 * base, band.c2 * base};
    }
    // argument-scaled forms for non-RV families
    return {theorem6_lower(x, rho, k, s, delta_lower, res),
            theorem6_upper(x, rho, k, s, delta_upper, res)};
}

// Two-server asymptotic for rho < 1:
// (rho^2/(2-rho)) [ Bbar_r(x)^2 + int_0^inf Bbar_r(x+ya) Bbar(x+y(a-b)) dy ].
// The integral is evaluated in units of Bbar_r(x)^2 so the result keeps full
// relative precision far into the tail.
inline double theorem1_asymptotic(double x, double a, const Distribution& service,
                                  double abs_tol = 1e-10) {
    const double b = service.mean();
    const double rho = b / a;
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("two-server asymptotic requires rho < 1");
    ResidualDistribution res(service);
    if (!classify(service).residual.subexp)
        throw std::invalid_argument(
            "two-server asymptotic requires a subexponential residual distribution");
    const double brx = res.tail(x);
    if (brx <= 0.0) return 0.0;
    auto scaled = [&](double y) {
        return (res.tail(x + y * a) / brx) * (service.tail(x + y * (a - b)) / brx);
    };
    QuadratureResult q = integrate_to_inf(scaled, 0.0, abs_tol);
    if (!q.converged)
        throw QuadratureError("two-server asymptotic quadrature did not converge; achieved error " +
                              std::to_string(q.error));
    return rho * rho / (2.0 - rho) * brx * brx * (1.0 + q.value);
}

// Corollary constants sandwiching the two-server asymptotic over Bbar_r^2(x):
// ( rho^2(2+rho)/(2(2-rho)), rho^2/(2(1-rho)) ).
inline std::pair<double, double> theorem1_bound_constants(double rho) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("two-server constants require 0 < rho < 1");
    return {rho * rho * (2.0 + rho) / (2.0 * (2.0 - rho)),
            rho * rho / (2.0 * (1.0 - rho))};
}

// Exact constant for regularly varying service with index gamma > 1:
// c = (rho^2/(2-rho)) [ 1 + rho(gamma-1) int_0^inf dz / ((1+z)^{gamma-1}(1+z(1-rho))^gamma) ].
inline double theorem1_rv_constant(double gamma, double rho, double abs_tol = 1e-10) {
    if (!(gamma > 1.0)) throw std::invalid_argument("rv constant requires gamma > 1");
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("rv constant requires 0 < rho < 1");
    auto integrand = [&](double z) {
        return 1.0 / (std::pow(1.0 + z, gamma - 1.0) *
                      std::pow(1.0 + z * (1.0 - rho), gamma));
    };
    QuadratureResult q = integrate_to_inf(integrand, 0.0, abs_tol);
    if (!q.converged)
        throw QuadratureError("rv constant quadrature did not converge; achieved error " +
                              std::to_string(q.error));
    return rho * rho / (2.0 - rho) * (1.0 + rho * (gamma - 1.0) * q.value);
}

// Two-server bounds for 1 < rho < 2 (limsup/liminf constants, asymptotic):
// lower (rho/(2-rho)) Bbar_r((rho+delta)/(rho-1) x), upper (rho/(2-rho)) Bbar_r(2x).
inline std::pair<double, double> theorem2_bounds(double x, double rho, double delta,
                                                 const ResidualDistribution& res) {
    if (!(rho > 1.0 && rho < 2.0))
        throw std::invalid_argument("Theorem 2 requires 1 < rho < 2");
    if (!(delta > 0.0)) throw std::invalid_argument("Theorem 2 lower requires delta > 0");
    const double c = rho / (2.0 - rho);
    return {c * res.tail((rho + delta) / (rho - 1.0) * x), c * res.tail(2.0 * x)};
}

// Cross-check of the general bound against the two-server specialization at
// s=2, k=1: on the lower side the constants are directly comparable
// (rho vs rho/(2-rho)) and the general one must never be tighter.
struct S2ConsistencyRow {
    double rho = 0.0;
    double delta = 0.0;
    double general_lower_const = 0.0;
    double specialized_lower_const = 0.0;
    bool general_tighter = false;
};

inline std::vector<S2ConsistencyRow> theorem6_consistency_with_s2(
    std::span<const double> rhos, std::span<const double> deltas) {
    std::vector<S2ConsistencyRow> rows;
    for (double rho : rhos) {
        if (!(rho > 1.0 && rho < 2.0)) continue;
        for (double delta : deltas) {
            S2ConsistencyRow row;
            row.rho = rho;
            row.delta = delta;
            row.general_lower_const = rho;                 // rho^{s-k}/(s-k)! at s=2,k=1
            row.specialized_lower_const = rho / (2.0 - rho);
            row.general_tighter = row.general_lower_const > row.specialized_lower_const;
            rows.push_back(row);
        }
    }
    return rows;
}

// Distribution of M = sup(0, sum_j (sigma_j - (k+1)(a-h))), represented through
// its asymptotic tail Fbar(x) ~ b/((k+1)(a-h) - b) * Bbar_r(x).
struct MaxOfWalkTail {
    double drift = 0.0;  // (k+1)(a-h) - b, positive for admissible h
    double coeff = 0.0;  // b / drift
    double spacing = 0.0;

    double tail(double x, const ResidualDistribution& res) const {
        return coeff * res.tail(x);
    }
};

inline MaxOfWalkTail max_of_walk_tail(const QueueConfig& cfg, double h) {
    const auto [h_lo, h_hi] = h_interval(cfg);
    if (!(h > h_lo && h < h_hi))
        throw std::invalid_argument("h outside the admissible spacing interval");
    MaxOfWalkTail m;
    m.spacing = (cfg.k() + 1.0) * (cfg.a() - h);
    m.drift = m.spacing - cfg.b();
    m.coeff = cfg.b() / m.drift;
    return m;
}

// Upper bound with exponential correction:
// P{D > x+y} <= C(s,k) Fbar(x)^{s-k} + const * exp(-beta y).
// The pair (const, beta) is only known to exist; it is carried symbolically
// and never numerically invented.
struct Theorem7Upper {
    double x = 0.0;
    double y = 0.0;
    double first_term = 0.0;
    double fbar_x = 0.0;
    double binom = 0.0;
    MaxOfWalkTail walk;
    std::string correction = "+ const*exp(-beta*y), const and beta unspecified";
};

inline Theorem7Upper theorem7_upper_with_correction(double x, double y,
                                                    const QueueConfig& cfg, double h) {
    Theorem7Upper out;
    out.x = x;
    out.y = y;
    out.walk = max_of_walk_tail(cfg, h);
    ResidualDistribution res(cfg.service);
    out.fbar_x = out.walk.tail(x, res);
    out.binom = binomial_coefficient(cfg.s, cfg.k());
    out.first_term = out.binom * std::pow(out.fbar_x, cfg.s - cfg.k());
    return out;
}

enum class MomentVerdict { Finite, Infinite, Undecided };

inline const char* to_string(MomentVerdict v) {
    switch (v) {
        case MomentVerdict::Finite: return "finite";
        case MomentVerdict::Infinite: return "infinite";
        case MomentVerdict::Undecided: return "undecided";
    }
    return "?";
}

// E D^gamma < inf iff E(min of s-k residual draws)^gamma < inf. The min of
// s-k residuals has tail Bbar_r^{s-k}; per family this is decided exactly:
// pareto residual is regularly varying with index alpha-1, so the moment is
// finite iff gamma < (s-k)(alpha-1) (the boundary diverges for the pure power
// law); weibull/lognormal/exponential residuals have all moments.
inline MomentVerdict moment_condition(double gamma, const Distribution& service,
                                      int s, int k) {
    if (!(gamma > 0.0)) throw std::invalid_argument("moment condition requires gamma > 0");
    if (k < 0 || k > s - 1) throw std::invalid_argument("moment condition requires k in {0,...,s-1}");
    switch (service.family()) {
        case Family::Deterministic:
            throw std::invalid_argument(
                "moment condition requires service with unbounded support; deterministic rejected");
        case Family::Pareto: {
            const double order = (s - k) * (service.p1() - 1.0);
            return gamma < order ? MomentVerdict::Finite : MomentVerdict::Infinite;
        }
        case Family::Weibull:
        case Family::Lognormal:
        case Family::Exponential:
            return MomentVerdict::Finite;
    }
    return MomentVerdict::Undecided;
}

// One evaluated bound row; NaN marks an absent entry.
struct BoundRow {
    double x = 0.0;
    std::string theorem;
    double lower = std::numeric_limits<double>::quiet_NaN();
    double upper = std::numeric_limits<double>::quiet_NaN();
    double asymptotic = std::numeric_limits<double>::quiet_NaN();
};

struct BoundReport {
    int s = 1;
    int k = 0;
    double rho = 0.0;
    double delta_lower = 0.1;
    double delta_upper = 0.05;
    double h = 0.0;
    std::vector<BoundRow> rows;
    std::vector<std::string> notes;
};

// Evaluates every applicable bound family on the grid. Labels name the result
// each number came from; lower bounds hold without tail assumptions, upper
// bounds carry the subexponential-residual requirement.
inline BoundReport evaluate_bounds(const QueueConfig& cfg, std::span<const double> x_grid,
                                   double delta_lower = 0.1, double delta_upper = 0.05,
                                   double h = std::numeric_limits<double>::quiet_NaN()) {
    BoundReport report;
    report.s = cfg.s;
    report.rho = cfg.rho();
    report.k = cfg.k();
    report.delta_lower = delta_lower;
    report.delta_upper = delta_upper;
    if (!(cfg.b() > 0.0))
        throw std::invalid_argument("bound evaluation requires positive service mean");
    if (cfg.integer_rho())
        throw std::invalid_argument(
            "integer rho outside theorem hypotheses (bounds require k < rho < k+1)");
    if (std::isnan(h)) h = default_h(cfg);
    report.h = h;
    ResidualDistribution res(cfg.service);
    const auto tags = classify(cfg.service);
    const double rho = report.rho;
    const int s = report.s, k = report.k;
    const bool upper_ok = tags.residual.subexp;
    if (!upper_ok)
        report.notes.push_back(
            "residual not flagged subexponential: upper bounds omitted (lower bounds hold without restrictions)");
    else
        report.notes.push_back("lower bounds hold without restrictions on the service law");
    if (tags.residual.subexp && !tags.residual.long_dominated)
        report.notes.push_back(
            "upper and lower forms differ by more than a constant factor for this family; the sharp order is unknown");
    for (double x : x_grid) {
        {
            BoundRow row;
            row.x = x;
            row.theorem = "theorem6";
            row.lower = theorem6_lower(x, rho, k, s, delta_lower, res);
            if (upper_ok) row.upper = theorem6_upper(x, rho, k, s, delta_upper, res);
            report.rows.push_back(row);
        }
        if (rho < 1.0) {
            BoundRow row;
            row.x = x;
            row.theorem = "theorem5";
            const auto [cl, cu] = theorem5_constants(rho, s);
            const double base = res.min_tail(s, x);
            row.lower = cl * base;
            if (upper_ok) row.upper = cu * base;
            report.rows.push_back(row);
        }
        if (s == 1 && rho < 1.0) {
            BoundRow row;
            row.x = x;
            row.theorem = "wsingle";
            row.asymptotic = singleserver_asymptotic(x, rho, res);
            report.rows.push_back(row);
        }
        if (s == 2 && rho < 1.0 && upper_ok) {
            BoundRow row;
            row.x = x;
            row.theorem = "theorem1";
            const auto [cl, cu] = theorem1_bound_constants(rho);
            const double base = res.min_tail(2, x);
            row.lower = cl * base;
            row.upper = cu * base;
            row.asymptotic = theorem1_asymptotic(x, cfg.a(), cfg.service);
            report.rows.push_back(row);
        }
        if (s == 2 && rho > 1.0 && rho < 2.0 && upper_ok && tags.base.subexp) {
            BoundRow row;
            row.x = x;
            row.theorem = "theorem2";
            const auto [lo, up] = theorem2_bounds(x, rho, delta_lower, res);
            row.lower = lo;
            row.upper = up;
            if (tags.residual.irv && tags.base.subexp)
                row.asymptotic = rho / (2.0 - rho) * res.tail(rho / (rho - 1.0) * x);
            report.rows.push_back(row);
        }
        if (tags.residual.long_dominated) {
            BoundRow row;
            row.x = x;
            row.theorem = "corollary1";
            const auto [lo, up] =
                corollary1_band(x, rho, k, s, res, delta_lower, delta_upper);
            row.lower = lo;
            row.upper = up;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace qtail
