#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qtail/quadrature.hpp"
#include "qtail/verify.hpp"

using namespace qtail;

TEST_CASE("finite intervals against closed forms") {
    auto q = integrate([](double y) { return 3.0 * y * y; }, 0.0, 1.0, 1e-12);
    CHECK(q.converged);
    CHECK(q.value == doctest::Approx(1.0).epsilon(1e-12));

    q = integrate([](double y) { return std::sin(y); }, 0.0, M_PI, 1e-12);
    CHECK(q.value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("improper integrals against closed forms") {
    auto q = integrate_to_inf([](double y) { return std::exp(-y); }, 0.0, 1e-10);
    CHECK(q.converged);
    CHECK(q.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(q.error <= 4e-10);

    // partial fractions: 4 ln 2 - 2
    q = integrate_to_inf(
        [](double z) { return 1.0 / ((1.0 + z) * (1.0 + 0.5 * z) * (1.0 + 0.5 * z)); },
        0.0, 1e-10);
    CHECK(q.value == doctest::Approx(0.77258872223978124).epsilon(1e-10));

    // power tail with non-integer exponent
    q = integrate_to_inf([](double y) { return std::pow(1.0 + y, -2.5); }, 0.0, 1e-10);
    CHECK(q.value == doctest::Approx(1.0 / 1.5).epsilon(1e-10));

    // shifted lower limit
    q = integrate_to_inf([](double y) { return std::exp(-2.0 * y); }, 3.0, 1e-12);
    CHECK(q.value == doctest::Approx(0.5 * std::exp(-6.0)).epsilon(1e-9));
}

TEST_CASE("agrees with the independent simpson oracle on smooth integrands") {
    auto f1 = [](double y) { return std::exp(-0.3 * y) / (1.0 + y * y); };
    auto f2 = [](double y) { return std::pow(1.0 + 0.7 * y, -3.2); };
    for (auto f : {std::function<double(double)>(f1), std::function<double(double)>(f2)}) {
        const double got = integrate_to_inf(f, 0.0, 1e-11).value;
        const double want = simpson_oracle_to_inf(f, 0.0);
        CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("budget exhaustion is reported, not hidden") {
    // rapidly oscillating integrand with a tiny interval budget
    auto q = integrate([](double y) { return std::sin(500.0 * y * y); }, 0.0, 20.0,
                       1e-14, 8);
    CHECK_FALSE(q.converged);
    CHECK(q.error > 1e-14);
}

TEST_CASE("zero integrand terminates immediately") {
    auto q = integrate_to_inf([](double) { return 0.0; }, 5.0, 1e-12);
    CHECK(q.converged);
    CHECK(q.value == 0.0);
}

TEST_CASE("verify suite passes") {
    const auto res = verify_quadrature();
    CHECK(res.pass);
    CHECK(res.violations == 0);
}
