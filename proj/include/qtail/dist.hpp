#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "qtail/quadrature.hpp"
#include "qtail/rng.hpp"
#include "qtail/special.hpp"

namespace qtail {

enum class Family { Pareto, Weibull, Lognormal, Exponential, Deterministic };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Pareto: return "pareto";
        case Family::Weibull: return "weibull";
        case Family::Lognormal: return "lognormal";
        case Family::Exponential: return "exponential";
        case Family::Deterministic: return "deterministic";
    }
    return "?";
}

// Parametric service/interarrival law with exact tail, mean and
// inverse-transform sampler. Every sampler consumes exactly one uniform,
// so common-random-number couplings across systems stay aligned.
class Distribution {
public:
    static Distribution pareto(double alpha, double xm) {
        if (!(alpha > 1.0))
            throw std::invalid_argument("pareto requires alpha > 1 (finite mean)");
        if (!(xm > 0.0)) throw std::invalid_argument("pareto requires xm > 0");
        return Distribution(Family::Pareto, alpha, xm, alpha * xm / (alpha - 1.0));
    }
    static Distribution weibull(double shape, double scale) {
        if (!(shape > 0.0 && shape <= 1.0))
            throw std::invalid_argument("weibull requires shape in (0,1]");
        if (!(scale > 0.0)) throw std::invalid_argument("weibull requires scale > 0");
        return Distribution(Family::Weibull, shape, scale,
                            scale * std::tgamma(1.0 + 1.0 / shape));
    }
    static Distribution lognormal(double mu, double sigma2) {
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("lognormal requires sigma2 > 0");
        return Distribution(Family::Lognormal, mu, sigma2,
                            std::exp(mu + 0.5 * sigma2));
    }
    static Distribution exponential(double rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("exponential requires rate > 0");
        return Distribution(Family::Exponential, rate, 0.0, 1.0 / rate);
    }
    static Distribution deterministic(double value) {
        if (!(value >= 0.0))
            throw std::invalid_argument("deterministic requires value >= 0");
        return Distribution(Family::Deterministic, value, 0.0, value);
    }

    Family family() const { return family_; }
    double mean() const { return mean_; }
    double p1() const { return p1_; }
    double p2() const { return p2_; }

    // P{X > x}; right-continuous complement of the CDF, 1 for x < 0.
    double tail(double x) const {
        switch (family_) {
            case Family::Pareto:
                return x < p2_ ? 1.0 : std::pow(p2_ / x, p1_);
            case Family::Weibull:
                return x < 0.0 ? 1.0 : std::exp(-std::pow(x / p2_, p1_));
            case Family::Lognormal:
                if (x <= 0.0) return 1.0;
                return 0.5 * std::erfc((std::log(x) - p1_) /
                                       (std::sqrt(p2_) * 1.4142135623730951));
            case Family::Exponential:
                return x < 0.0 ? 1.0 : std::exp(-p1_ * x);
            case Family::Deterministic:
                return x < p1_ ? 1.0 : 0.0;
        }
        return 0.0;
    }

    // x such that tail(x) = u, for u in (0,1).
    double quantile_from_tail(double u) const {
        switch (family_) {
            case Family::Pareto:
                return p2_ * std::pow(u, -1.0 / p1_);
            case Family::Weibull:
                return p2_ * std::pow(-std::log(u), 1.0 / p1_);
            case Family::Lognormal:
                return std::exp(p1_ - std::sqrt(p2_) * normal_quantile(u));
            case Family::Exponential:
                return -std::log(u) / p1_;
            case Family::Deterministic:
                return p1_;
        }
        return 0.0;
    }

    double sample(Rng& rng) const { return quantile_from_tail(rng.uniform01()); }

    std::string describe() const {
        switch (family_) {
            case Family::Pareto:
                return "pareto(alpha=" + std::to_string(p1_) + ",xm=" + std::to_string(p2_) + ")";
            case Family::Weibull:
                return "weibull(shape=" + std::to_string(p1_) + ",scale=" + std::to_string(p2_) + ")";
            case Family::Lognormal:
                return "lognormal(mu=" + std::to_string(p1_) + ",sigma2=" + std::to_string(p2_) + ")";
            case Family::Exponential:
                return "exponential(rate=" + std::to_string(p1_) + ")";
            case Family::Deterministic:
                return "deterministic(" + std::to_string(p1_) + ")";
        }
        return "?";
    }

private:
    Distribution(Family f, double p1, double p2, double mean)
        : family_(f), p1_(p1), p2_(p2), mean_(mean) {}

    Family family_;
    double p1_;  // pareto: alpha. weibull: shape. lognormal: mu. exp: rate. det: value.
    double p2_;  // pareto: xm.    weibull: scale. lognormal: sigma2.
    double mean_;
};

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Residual (integrated-tail) distribution: tail_r(x) = (1/b) * int_x^inf Bbar.
// Closed forms for pareto/exponential/deterministic; adaptive quadrature of
// the defining integral otherwise.
class ResidualDistribution {
public:
    explicit ResidualDistribution(const Distribution& base) : base_(base) {
        if (!(base.mean() > 0.0))
            throw std::invalid_argument(
                "residual distribution requires a strictly positive mean");
    }

    const Distribution& base() const { return base_; }

    bool closed_form() const {
        switch (base_.family()) {
            case Family::Pareto:
            case Family::Exponential:
            case Family::Deterministic:
                return true;
            default:
                return false;
        }
    }

    double tail(double x) const {
        if (x <= 0.0) return 1.0;
        const double b = base_.mean();
        switch (base_.family()) {
            case Family::Pareto: {
                const double alpha = base_.p1();
                const double xm = base_.p2();
                if (x <= xm) return 1.0 - x / b;  // Bbar == 1 on [0, xm)
                return std::pow(xm / x, alpha - 1.0) / alpha;
            }
            case Family::Exponential:
                return std::exp(-base_.p1() * x);  // memoryless
            case Family::Deterministic: {
                const double v = base_.p1();
                return x >= v ? 0.0 : 1.0 - x / v;
            }
            default: {
                QuadratureResult q = integrate_to_inf(
                    [this](double y) { return base_.tail(y); }, x, 1e-10);
                if (!q.converged)
                    throw QuadratureError(
                        "residual tail quadrature did not converge; achieved error " +
                        std::to_string(q.error));
                double t = q.value / b;
                if (t < 0.0) t = 0.0;
                if (t > 1.0) t = 1.0;
                return t;
            }
        }
    }

    // x such that tail(x) = u. Closed-form inverse where available, monotone
    // bisection to 1e-10 probability tolerance otherwise.
    double quantile_from_tail(double u) const {
        if (!(u > 0.0 && u < 1.0))
            throw std::invalid_argument("residual quantile: u must lie in (0,1)");
        const double b = base_.mean();
        switch (base_.family()) {
            case Family::Pareto: {
                const double alpha = base_.p1();
                const double xm = base_.p2();
                if (u >= 1.0 / alpha) return b * (1.0 - u);  // linear branch on [0, xm]
                return xm * std::pow(alpha * u, -1.0 / (alpha - 1.0));
            }
            case Family::Exponential:
                return -std::log(u) / base_.p1();
            case Family::Deterministic:
                return base_.p1() * (1.0 - u);
            default: {
                double lo = 0.0;
                double hi = b > 1.0 ? b : 1.0;
                int guard = 0;
                while (tail(hi) > u) {
                    hi *= 2.0;
                    if (++guard > 200)
                        throw QuadratureError("residual inversion failed to bracket");
                }
                for (int i = 0; i < 200; ++i) {
                    const double mid = 0.5 * (lo + hi);
                    const double t = tail(mid);
                    if (std::fabs(t - u) <= 1e-10) return mid;
                    if (t > u)
                        lo = mid;
                    else
                        hi = mid;
                    if (hi - lo <= 1e-13 * (1.0 + hi)) break;
                }
                return 0.5 * (lo + hi);
            }
        }
    }

    double sample(Rng& rng) const { return quantile_from_tail(rng.uniform01()); }

    // Tail of min of m independent residual draws.
    double min_tail(int m, double x) const {
        if (m < 1) throw std::invalid_argument("min_tail requires m >= 1");
        const double t = tail(x);
        return m == 1 ? t : std::pow(t, m);
    }

private:
    Distribution base_;
};

// Asymptotic class membership is undecidable at runtime; it is recorded as
// static per-family metadata, for the base law and its residual separately.
struct TailClassFlags {
    bool rv = false;
    bool irv = false;
    bool long_dominated = false;  // membership in L-and-D
    bool subexp = false;
    double rv_index = std::nan("");  // set when rv is true
};

struct HeavyTailClassTags {
    TailClassFlags base;
    TailClassFlags residual;
};

inline HeavyTailClassTags classify(const Distribution& d) {
    HeavyTailClassTags tags;
    switch (d.family()) {
        case Family::Pareto: {
            const double alpha = d.p1();
            tags.base = {true, true, true, true, alpha};
            tags.residual = {true, true, true, true, alpha - 1.0};
            break;
        }
        case Family::Weibull:
            if (d.p1() < 1.0) {
                tags.base = {false, false, false, true, std::nan("")};
                tags.residual = {false, false, false, true, std::nan("")};
            }
            break;  // shape == 1 is exponential: no heavy-tail class
        case Family::Lognormal:
            tags.base = {false, false, false, true, std::nan("")};
            tags.residual = {false, false, false, true, std::nan("")};
            break;
        case Family::Exponential:
        case Family::Deterministic:
            break;
    }
    return tags;
}

}  // namespace qtail
