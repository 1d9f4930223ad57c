#include "maturix/error.hpp"
#include "maturix/rate_schedule.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maturix;

namespace {

// central difference of the primitive against the value
void check_primitive(const RateSchedule& r, double lo, double hi) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(lo, hi);
    for (int k = 0; k < 50; ++k) {
        const double t = u(gen);
        bool near_bp = false;
        for (double b : r.breakpoints()) near_bp |= std::abs(t - b) < 1e-3;
        if (near_bp) continue;
        const double h = 1e-5;
        const double fd = (r.primitive(t + h) - r.primitive(t - h)) / (2 * h);
        CHECK(fd == doctest::Approx(r(t)).epsilon(1e-6).scale(1.0));
    }
}

}  // namespace

TEST_CASE("default schedule is zero") {
    RateSchedule r;
    CHECK(r(-5.0) == 0.0);
    CHECK(r(7.0) == 0.0);
    CHECK(r.integral(0.0, 3.0) == 0.0);
}

TEST_CASE("constant with support") {
    const auto r = RateSchedule::constant(2.0, 1.0);
    CHECK(r(0.5) == 0.0);
    CHECK(r(1.0) == 2.0);
    CHECK(r.integral(0.0, 3.0) == doctest::Approx(4.0));
    CHECK_FALSE(r.is_constant());
    CHECK(RateSchedule::constant(2.0).is_constant());
}

TEST_CASE("piecewise constant integral") {
    const auto r = RateSchedule::piecewise_constant({0.0, 1.0}, {1.0, 2.0});
    CHECK(r(0.5) == 1.0);
    CHECK(r(1.5) == 2.0);
    CHECK(r(-0.1) == 0.0);
    CHECK(r.integral(0.0, 2.0) == doctest::Approx(3.0).epsilon(1e-14));
    check_primitive(r, 0.0, 3.0);
}

TEST_CASE("piecewise exponential primitive") {
    const auto r = RateSchedule::piecewise_exponential({0.0, 2.0, 5.0}, {1.0, 3.0, 0.5}, {-0.5, 0.2, 0.0});
    CHECK(r(1.0) == doctest::Approx(std::exp(-0.5)));
    CHECK(r(3.0) == doctest::Approx(3.0 * std::exp(0.2)));
    // closed form over [0, 6]
    const double exact = (1 - std::exp(-1.0)) / 0.5 + 3.0 * (std::exp(0.6) - 1) / 0.2 + 0.5;
    CHECK(r.integral(0.0, 6.0) == doctest::Approx(exact).epsilon(1e-13));
    check_primitive(r, 0.0, 8.0);
}

TEST_CASE("tabulated interpolation and quadrature integral") {
    const auto r = RateSchedule::tabulated({0.0, 1.0, 3.0}, {0.0, 2.0, 0.0});
    CHECK(r(0.5) == doctest::Approx(1.0));
    CHECK(r(2.0) == doctest::Approx(1.0));
    CHECK(r(10.0) == doctest::Approx(0.0));
    CHECK(r.integral(0.0, 3.0) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("custom without primitive falls back to quadrature") {
    const auto r = RateSchedule::custom([](double t) { return t * t; });
    CHECK_FALSE(r.has_primitive());
    CHECK(r.integral(0.0, 3.0) == doctest::Approx(9.0).epsilon(1e-10));
}

TEST_CASE("sum, scale and shift") {
    const auto a = RateSchedule::piecewise_constant({0.0, 1.0}, {1.0, 2.0});
    const auto b = RateSchedule::constant(0.5);
    const auto s = a + b;
    CHECK(s(0.5) == doctest::Approx(1.5));
    CHECK(s(-1.0) == doctest::Approx(0.5));
    CHECK(a.scaled(3.0)(1.5) == doctest::Approx(6.0));
    const auto sh = a.shifted(2.0);
    CHECK(sh(2.5) == doctest::Approx(1.0));
    CHECK(sh(3.5) == doctest::Approx(2.0));
    CHECK(sh(1.5) == 0.0);
    CHECK(sh.integral(2.0, 4.0) == doctest::Approx(3.0));
}
