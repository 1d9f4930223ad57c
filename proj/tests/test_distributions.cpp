#include "maturix/distributions.hpp"
#include "maturix/error.hpp"
#include "maturix/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

using namespace maturix;

namespace {

double choose(unsigned n, unsigned k) {
    double c = 1.0;
    for (unsigned i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

// direct convolution sum
double convolution(unsigned m, double a, double b, std::size_t k) {
    double s = 0.0;
    for (unsigned j = 0; j <= std::min<std::size_t>(m, k); ++j) {
        const std::size_t r = k - j;
        double pois = std::exp(-b);
        for (std::size_t i = 1; i <= r; ++i) pois *= b / i;
        s += choose(m, j) * std::pow(a, j) * std::pow(1 - a, m - j) * pois;
    }
    return s;
}

}  // namespace

TEST_CASE("pmf special cases") {
    CHECK(BinomialPoissonLaw(0, 1.0, 1.0).pmf(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    const BinomialPoissonLaw bern(1, 0.5, 0.0);
    CHECK(bern.pmf(0) == doctest::Approx(0.5));
    CHECK(bern.pmf(1) == doctest::Approx(0.5));
    CHECK(bern.pmf(2) == 0.0);
    CHECK(BinomialPoissonLaw(2, 0.5, 1.0).pmf(0) == doctest::Approx(0.25 * std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("pmf matches the convolution oracle") {
    for (auto [m, a, b] : {std::tuple{5u, 0.3, 2.0}, {12u, 0.9, 0.1}, {0u, 0.5, 7.5}, {40u, 0.05, 30.0}}) {
        const BinomialPoissonLaw law(m, a, b);
        double total = 0.0;
        for (std::size_t k = 0; k <= law.tail_bound(); ++k) {
            CHECK(law.pmf(k) == doctest::Approx(convolution(m, a, b, k)).epsilon(1e-10).scale(1e-300));
            total += law.pmf(k);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("moments") {
    const BinomialPoissonLaw law(3, 0.5, 2.0);
    CHECK(law.mean() == 3.5);
    CHECK(law.variance() == 2.75);
    const auto p = law.pmf_vector();
    double mean = 0.0, second = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        mean += k * p[k];
        second += double(k) * k * p[k];
    }
    CHECK(mean == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(second - mean * mean == doctest::Approx(2.75).epsilon(1e-11));
    CHECK(BinomialPoissonLaw(4, 1.0, 0.0).variance() == 0.0);
}

TEST_CASE("invalid laws") {
    CHECK_THROWS_AS(BinomialPoissonLaw(1, 1.5, 0.0), InvalidArgument);
    CHECK_THROWS_AS(BinomialPoissonLaw(1, 0.5, -1.0), InvalidArgument);
}

TEST_CASE("Poisson mixture is Poisson") {
    for (auto [c, a, b] : {std::tuple{2.0, 1.0, 0.0}, {2.0, std::exp(-3.0), 2.0 * (1 - std::exp(-3.0))},
                          {10.0, 0.3, 1.7}}) {
        for (std::size_t k = 0; k < 40; ++k) {
            CHECK(std::abs(poisson_mixture_pmf(k, c, a, b) - poisson_pmf(k, c * a + b)) < 1e-10);
        }
    }
}

TEST_CASE("empirical pmf and total variation") {
    const std::vector<unsigned> zeros(10, 0);
    const auto d0 = empirical_pmf(zeros);
    REQUIRE(d0.size() == 1);
    CHECK(d0[0] == 1.0);
    const std::vector<unsigned> half{0, 1, 0, 1};
    const auto h = empirical_pmf(half);
    CHECK(h == std::vector<double>{0.5, 0.5});
    CHECK(total_variation(h, h) == 0.0);
    const std::vector<double> delta0{1.0}, delta1{0.0, 1.0};
    CHECK(total_variation(delta0, delta1) == 1.0);
    // missing mass goes to one extra bin: |0.3 - 0| + |0.2 - 0.5|
    const std::vector<double> p{0.5, 0.3}, q{0.5};
    CHECK(total_variation(p, q) == doctest::Approx(0.3));

    RngStream rng(5, 0);
    std::poisson_distribution<unsigned> pois(3.0);
    std::vector<unsigned> xs(100000);
    for (auto& x : xs) x = pois(rng);
    const auto emp = empirical_pmf(xs);
    for (std::size_t k = 0; k < 10; ++k) {
        const double p = poisson_pmf(k, 3.0);
        CHECK(std::abs(emp[k] - p) < 4.0 * std::sqrt(p * (1 - p) / xs.size()) + 1e-12);
    }
}

TEST_CASE("chi-square p-values over repeated seeds") {
    const BinomialPoissonLaw law(4, 0.4, 2.5);
    std::size_t passed = 0;
    const std::size_t seeds = 100;
    for (std::size_t s = 0; s < seeds; ++s) {
        RngStream rng(77, s);
        std::binomial_distribution<unsigned> bin(4, 0.4);
        std::poisson_distribution<unsigned> pois(2.5);
        std::vector<unsigned> xs(100000);
        for (auto& x : xs) x = bin(rng) + pois(rng);
        const auto r = chi_square_gof(xs, law);
        CHECK(r.degrees_of_freedom + 1 == r.bins);
        if (r.p_value > 0.001) ++passed;
    }
    CHECK(passed >= 99);

    // a wrong law is rejected
    RngStream rng(1, 0);
    std::poisson_distribution<unsigned> pois(3.3);
    std::vector<unsigned> xs(100000);
    for (auto& x : xs) x = pois(rng);
    CHECK(chi_square_gof(xs, BinomialPoissonLaw(0, 1.0, 3.0)).p_value < 1e-6);
}
