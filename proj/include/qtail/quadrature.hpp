#pragma once

#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace qtail {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;          // achieved error estimate
    bool converged = false;
    std::size_t evaluations = 0;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes and weights on [-1,1].
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
inline void gk15(F&& f, double a, double b, double& value, double& err,
                 std::size_t& evals) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = kGk15WeightsK[7] * fc;
    double resg = kGk15WeightsG[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kGk15Nodes[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        resk += kGk15WeightsK[j] * (f1 + f2);
        if (j % 2 == 1) resg += kGk15WeightsG[(j - 1) / 2] * (f1 + f2);
    }
    evals += 15;
    value = resk * h;
    err = std::fabs((resk - resg) * h);
}

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration on a finite interval.
template <class F>
inline QuadratureResult integrate(F&& f, double lo, double hi, double abs_tol,
                                  std::size_t max_intervals = 4000) {
    QuadratureResult res;
    if (lo == hi) {
        res.converged = true;
        return res;
    }
    std::priority_queue<detail::Segment> segs;
    double v, e;
    detail::gk15(f, lo, hi, v, e, res.evaluations);
    segs.push({lo, hi, v, e});
    double total_v = v, total_e = e;
    while (total_e > abs_tol && segs.size() < max_intervals) {
        detail::Segment worst = segs.top();
        segs.pop();
        total_v -= worst.value;
        total_e -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {  // interval at resolution limit
            total_v += worst.value;
            total_e += worst.error;
            segs.push(worst);
            break;
        }
        double v1, e1, v2, e2;
        detail::gk15(f, worst.a, mid, v1, e1, res.evaluations);
        detail::gk15(f, mid, worst.b, v2, e2, res.evaluations);
        segs.push({worst.a, mid, v1, e1});
        segs.push({mid, worst.b, v2, e2});
        total_v += v1 + v2;
        total_e += e1 + e2;
    }
    res.value = total_v;
    res.error = total_e;
    res.converged = total_e <= abs_tol;
    return res;
}

// Improper upper limit: geometric panels [lo, lo+1], [lo+1, lo+3], ... with a
// geometric-ratio remainder estimate once panel contributions decay. Suited to
// the monotone decaying tails integrated here.
template <class F>
inline QuadratureResult integrate_to_inf(F&& f, double lo, double abs_tol,
                                         int max_panels = 64) {
    QuadratureResult res;
    double left = lo;
    double width = 1.0;
    double prev_panel = 0.0;
    bool have_prev = false;
    int zero_run = 0;
    for (int p = 0; p < max_panels; ++p) {
        const double right = left + width;
        QuadratureResult panel = integrate(f, left, right, abs_tol * 0.25);
        res.evaluations += panel.evaluations;
        res.value += panel.value;
        res.error += panel.error;
        const double pv = std::fabs(panel.value);
        if (pv == 0.0) {
            if (++zero_run >= 2) {
                res.converged = res.error <= abs_tol;
                return res;
            }
        } else {
            zero_run = 0;
        }
        if (have_prev && pv < abs_tol * 0.25 && pv < prev_panel) {
            const double ratio = prev_panel > 0.0 ? pv / prev_panel : 0.0;
            if (ratio < 0.9) {
                const double remainder = pv * ratio / (1.0 - ratio);
                res.value += remainder;
                res.error += remainder + pv;
                res.converged = res.error <= abs_tol * 4.0 + 1e-300;
                return res;
            }
        }
        prev_panel = pv;
        have_prev = true;
        left = right;
        width *= 2.0;
    }
    res.converged = false;
    return res;
}

}  // namespace qtail
