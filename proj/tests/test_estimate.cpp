#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qtail/estimate.hpp"
#include "qtail/verify.hpp"

using namespace qtail;

TEST_CASE("hill estimator hand example") {
    const std::vector<double> s{std::exp(3.0), std::exp(2.0), std::exp(1.0)};
    const auto est = hill_index(s, 2);
    CHECK(est.alpha_hat == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(est.m == 2);
}

TEST_CASE("hill estimator recovers the generating index") {
    // exact inverse-transform pareto samples, ten seeds
    const Distribution pareto = Distribution::pareto(2.0, 1.0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed, 40);
        std::vector<double> draws(1000000);
        for (auto& v : draws) v = pareto.sample(rng);
        std::sort(draws.begin(), draws.end(), std::greater<double>());
        const auto est = hill_index(draws, 10000);
        CHECK(std::fabs(est.alpha_hat - 2.0) <= 0.15);
    }
}

TEST_CASE("hill estimator rejects degenerate input") {
    const std::vector<double> equal(10, 3.0);
    CHECK_THROWS_AS((void)hill_index(equal, 4), std::invalid_argument);
    const std::vector<double> unsorted{1.0, 5.0, 2.0};
    CHECK_THROWS_AS((void)hill_index(unsorted, 2), std::invalid_argument);
    const std::vector<double> zeros{1.0, 0.0, 0.0};
    CHECK_THROWS_AS((void)hill_index(zeros, 2), std::invalid_argument);
}

TEST_CASE("empirical moment stability flags") {
    // all-zero samples stabilize at zero
    const std::vector<double> zeros(4096, 0.0);
    const auto mz = empirical_moment(zeros, 1.5);
    CHECK(mz.stabilizing);
    CHECK(mz.prefixes.back().value == 0.0);

    const Distribution pareto = Distribution::pareto(2.0, 1.0);
    Rng rng(3, 41);
    std::vector<double> draws(1000000);
    for (auto& v : draws) v = pareto.sample(rng);
    // gamma = 0.5: finite moment alpha/(alpha-gamma) = 4/3
    const auto fin = empirical_moment(draws, 0.5);
    CHECK(fin.stabilizing);
    CHECK(fin.prefixes.back().value == doctest::Approx(2.0 / 1.5).epsilon(0.02));
    // gamma = 3: infinite moment
    const auto inf = empirical_moment(draws, 3.0);
    CHECK_FALSE(inf.stabilizing);
}

TEST_CASE("tail estimation on a zero-service system") {
    QueueConfig cfg(2, Distribution::exponential(1.0), Distribution::deterministic(0.0));
    const std::uint64_t seeds[] = {1};
    const auto est = estimate_tail(cfg, {0.5, 1.0, 2.0}, 200000, 1000, 16, seeds);
    for (const auto& e : est) {
        CHECK(e.p_hat == 0.0);
        CHECK(e.no_hits);
        CHECK(e.ci_low == 0.0);
        CHECK(e.ci_high > 0.0);
        CHECK(e.ci_high < 1e-4);
    }
}

TEST_CASE("tail estimation rejects invalid setups") {
    QueueConfig cfg(1, Distribution::exponential(0.5), Distribution::pareto(2.5, 0.6));
    const std::uint64_t seeds[] = {1};
    CHECK_THROWS_AS((void)estimate_tail(cfg, {1.0}, 1000, 10, 5, seeds),
                    std::invalid_argument);  // batches < 10
    CHECK_THROWS_AS((void)estimate_tail(cfg, {1.0}, 1000, 1000, 16, seeds),
                    std::invalid_argument);  // burn_in >= n
    QueueConfig unstable(1, Distribution::deterministic(1.0), Distribution::pareto(2.5, 1.0));
    CHECK_THROWS_AS((void)estimate_tail(unstable, {1.0}, 1000, 10, 16, seeds),
                    std::invalid_argument);
}

TEST_CASE("empirical tail is nonincreasing in x") {
    QueueConfig cfg(2, Distribution::exponential(0.5), Distribution::pareto(2.5, 0.6));
    const std::uint64_t seeds[] = {7};
    const auto est = estimate_tail(cfg, {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}, 400000, 10000, 16, seeds);
    for (std::size_t i = 1; i < est.size(); ++i) CHECK(est[i].p_hat <= est[i - 1].p_hat);
}

TEST_CASE("single-server estimates match a scalar-recursion reimplementation bitwise") {
    QueueConfig cfg(1, Distribution::exponential(0.5), Distribution::pareto(2.5, 0.6));
    const std::vector<double> grid{0.5, 2.0, 8.0};
    const std::uint64_t n = 300000, burn = 10000;
    const int batches = 16;
    const std::uint64_t seeds[] = {11};
    const auto est = estimate_tail(cfg, grid, n, burn, batches, seeds);

    // independent scalar path: same substream layout, same counting rule
    Rng service_rng(11, kServiceStream), arrival_rng(11, kArrivalStream);
    const std::uint64_t batch_len = (n - burn) / batches;
    const std::uint64_t total = burn + batch_len * batches;
    std::vector<std::uint64_t> hits(grid.size(), 0);
    double d = 0.0;
    for (std::uint64_t i = 1; i <= total; ++i) {
        if (i > burn)
            for (std::size_t j = 0; j < grid.size() && d > grid[j]; ++j) ++hits[j];
        const double sigma = cfg.service.sample(service_rng);
        const double tau = cfg.interarrival.sample(arrival_rng);
        d = lindley_step(d, sigma, tau);
    }
    for (std::size_t j = 0; j < grid.size(); ++j) {
        CHECK(est[j].hits == hits[j]);
        CHECK(est[j].p_hat ==
              static_cast<double>(hits[j]) / static_cast<double>(batch_len * batches));
    }
}

TEST_CASE("seed-parallel estimation is bitwise deterministic") {
    QueueConfig cfg(2, Distribution::exponential(0.5), Distribution::pareto(2.5, 0.6));
    const std::vector<double> grid{0.5, 2.0};
    const std::uint64_t seeds[] = {5, 6, 7};
    const auto serial = estimate_tail(cfg, grid, 200000, 10000, 16, seeds, 1);
    const auto parallel = estimate_tail(cfg, grid, 200000, 10000, 16, seeds, 2);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].hits == parallel[i].hits);
        CHECK(serial[i].p_hat == parallel[i].p_hat);
        CHECK(serial[i].ci_low == parallel[i].ci_low);
        CHECK(serial[i].ci_high == parallel[i].ci_high);
    }
}

TEST_CASE("disjoint seeds agree within joint confidence intervals") {
    QueueConfig cfg(1, Distribution::exponential(0.5), Distribution::pareto(2.5, 0.6));
    ResidualDistribution res(cfg.service);
    const double x = res.quantile_from_tail(0.02);  // prediction ~2e-2
    const std::uint64_t s1[] = {101}, s2[] = {202};
    const auto a = estimate_tail(cfg, {x}, 600000, 20000, 32, s1);
    const auto b = estimate_tail(cfg, {x}, 600000, 20000, 32, s2);
    const double gap = std::fabs(a[0].p_hat - b[0].p_hat);
    const double joint = (a[0].ci_high - a[0].ci_low) / 2 + (b[0].ci_high - b[0].ci_low) / 2;
    CHECK(gap <= joint);
}

TEST_CASE("sandwich verdict rules") {
    TailEstimate mid;
    mid.x = 1.0;
    mid.p_hat = 0.5;
    mid.ci_low = 0.45;
    mid.ci_high = 0.55;
    mid.hits = 500;
    mid.n_effective = 1000;
    const double lo = 0.4, up = 0.6;
    const auto rows = sandwich_verdict({&mid, 1}, {&lo, 1}, {&up, 1}, 1.0);
    CHECK(rows[0].pass);
    CHECK(rows[0].powered);

    TailEstimate miss;  // powered lower bound with zero hits must fail
    miss.x = 1.0;
    miss.p_hat = 0.0;
    miss.hits = 0;
    miss.n_effective = 1000;
    miss.ci_low = 0.0;
    miss.ci_high = 0.003;
    const double lo2 = 10.0 / 1000.0, up2 = 1.0;
    const auto rows2 = sandwich_verdict({&miss, 1}, {&lo2, 1}, {&up2, 1}, 1.0);
    CHECK_FALSE(rows2[0].pass);

    TailEstimate weak;  // unpowered no-hit point passes the lower check
    weak.x = 1.0;
    weak.p_hat = 0.0;
    weak.hits = 0;
    weak.n_effective = 1000;
    weak.ci_low = 0.0;
    weak.ci_high = 0.003;
    const double lo3 = 2.0 / 1000.0, up3 = 1.0;
    const auto rows3 = sandwich_verdict({&weak, 1}, {&lo3, 1}, {&up3, 1}, 1.0);
    CHECK(rows3[0].pass);
    CHECK_FALSE(rows3[0].powered);
}

TEST_CASE("qk inequality hand example and fuzzing") {
    const std::vector<double> q{1.0, 0.5, 0.25, 0.125};
    const auto r = lemma_qk_bruteforce(q, 2);
    // full pair enumeration: 35/32; tail sum from the second element: 49/128
    CHECK(r.lhs == doctest::Approx(35.0 / 32.0).epsilon(1e-14));
    CHECK(r.rhs == doctest::Approx(49.0 / 128.0).epsilon(1e-14));
    CHECK(r.holds);

    const std::vector<double> single{1.0};
    const auto r1 = lemma_qk_bruteforce(single, 1);
    CHECK(r1.lhs == 1.0);
    CHECK(r1.rhs == 1.0);  // equality at a single term
    CHECK(r1.holds);

    const std::vector<double> bad{0.5, 1.0};
    CHECK_THROWS_AS((void)lemma_qk_bruteforce(bad, 2), std::invalid_argument);

    CHECK(verify_qk(1000, 17).pass);
}

namespace {
QueueConfig bigjump_config() {
    return QueueConfig(2, Distribution::deterministic(1.0), Distribution::pareto(3.0, 1.0));
}
}  // namespace

TEST_CASE("big-jump scan base cases") {
    const auto cfg = bigjump_config();
    const double h = default_h(cfg);
    // zero window matches nothing
    const auto r0 = bigjump_frequency(cfg, 6.0, 0, h, 400000, 20000, 3);
    CHECK(r0.matched_events == 0);
    CHECK_FALSE(r0.no_events);
    CHECK(r0.frequency == 0.0);
    // unreachable threshold: no conditioning events
    const auto rbig = bigjump_frequency(cfg, 1e9, 100, h, 100000, 1000, 3);
    CHECK(rbig.no_events);
    CHECK(std::isnan(rbig.frequency));
    // class and interarrival preconditions
    QueueConfig weib(2, Distribution::deterministic(1.0), Distribution::weibull(0.5, 1.0));
    CHECK_THROWS_AS((void)bigjump_frequency(weib, 5.0, 10, 0.1, 1000, 10, 1),
                    std::invalid_argument);
    QueueConfig rand_arr(2, Distribution::exponential(1.0), Distribution::pareto(3.0, 1.5));
    CHECK_THROWS_AS((void)bigjump_frequency(rand_arr, 5.0, 10, 0.2, 1000, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("big-jump frequency is nondecreasing in the window") {
    const auto cfg = bigjump_config();
    const double h = default_h(cfg);
    double prev = -1.0;
    std::uint64_t cond = 0;
    for (std::uint64_t window : {5, 25, 125, 600}) {
        const auto r = bigjump_frequency(cfg, 8.0, window, h, 2000000, 100000, 5);
        REQUIRE_FALSE(r.no_events);
        if (cond) CHECK(r.conditioning_events == cond);  // same path, same events
        cond = r.conditioning_events;
        CHECK(r.frequency >= prev);
        prev = r.frequency;
    }
    CHECK(prev > 0.5);
}

TEST_CASE("big-jump trace records the matching lags") {
    const auto cfg = bigjump_config();
    const double h = default_h(cfg);
    const auto r = bigjump_frequency(cfg, 6.0, 400, h, 500000, 20000, 5, true);
    REQUIRE(r.matched_events > 0);
    REQUIRE(r.trace.size() == r.matched_events);
    const double a_hat = r.a_hat;
    CHECK(a_hat == doctest::Approx(1.625));
    for (const auto& lags : r.trace) {
        CHECK(lags.size() == 1);  // s-k = 1 jump for this config
        CHECK(lags[0] >= 1);
        CHECK(lags[0] <= 400);
    }
}

TEST_CASE("below full load the parallel majorant is pathwise, zero overshoot") {
    // k = 0: every auxiliary queue receives a superset of its line's work at a
    // tighter spacing, so D_n <= min U_{n,i} holds exactly, step by step
    QueueConfig cfg(2, Distribution::deterministic(2.0), Distribution::pareto(2.5, 0.6));
    REQUIRE(cfg.k() == 0);
    const auto prof = majorant_exceedance_profile(cfg, default_h(cfg), {0.0}, 400000, 0, 9);
    CHECK(prof.exceedances[0] == 0);
}

TEST_CASE("majorant exceedance profile decays") {
    const auto cfg = bigjump_config();
    const double h = default_h(cfg);
    std::vector<double> t_grid{0.0};
    for (double t = 0.05; t <= 51.3; t *= 2.0) t_grid.push_back(t);
    const auto prof = majorant_exceedance_profile(cfg, h, t_grid, 1500000, 100000, 7);
    CHECK(prof.events == 1500000);
    for (std::size_t i = 1; i < prof.frequency.size(); ++i)
        CHECK(prof.frequency[i] <= prof.frequency[i - 1]);
    REQUIRE(prof.fit_ok);
    CHECK(prof.slope < 0.0);
    // overshoots vanish at large offsets
    CHECK(prof.frequency.back() == 0.0);
}
