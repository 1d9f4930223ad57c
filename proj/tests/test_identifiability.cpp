#include "maturix/error.hpp"
#include "maturix/identifiability.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maturix;

namespace {

KillingField smooth_field() {
    return KillingField([](double t, double x) { return (1.0 + 0.5 * std::sin(t)) * (1.0 - x) * 0.8; }, {});
}

ContinuousModel generic_model() {
    const auto lam = RateSchedule::custom([](double t) { return 2.0 + std::sin(0.7 * t); });
    const auto mu = RateSchedule::custom([](double t) { return 0.5 + 0.2 * std::cos(t); });
    return ContinuousModel::make(0.8, lam, mu, smooth_field());
}

std::vector<std::pair<double, double>> random_pairs(std::size_t count, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 6.0), d(0.0, 4.0);
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double s = u(gen);
        out.emplace_back(s, s + d(gen));
    }
    return out;
}

}  // namespace

TEST_CASE("effective input rate") {
    const auto none = ContinuousModel::make(1.0, RateSchedule::constant(3.0), RateSchedule::constant(1.0),
                                            KillingField());
    CHECK(effective_input_rate(none, 2.0) == 3.0);
    const auto empty = ContinuousModel::make(1.0, RateSchedule(), RateSchedule::constant(1.0), smooth_field());
    CHECK(effective_input_rate(empty, 2.0) == 0.0);

    const auto q = RateSchedule::custom([](double t) { return std::exp(-0.3 * t) * (2.0 + std::sin(t)); });
    const auto model = ContinuousModel::partial_killing(0.5, RateSchedule::constant(4.0), RateSchedule::constant(1.0),
                                                        1.2, 0.35, q);
    for (double t : {0.0, 1.7, 6.0}) {
        // exposure int_0^{delta tau} gamma q(t + w) dw by a fine trapezoid
        const std::size_t panels = 200000;
        const double reach = 0.35 / 0.5, h = reach / panels;
        double e = 0.5 * (q(t) + q(t + reach));
        for (std::size_t i = 1; i < panels; ++i) e += q(t + i * h);
        e *= 1.2 * h;
        CHECK(effective_input_rate(model, t) == doctest::Approx(4.0 * std::exp(-e)).epsilon(1e-8));
    }
}

TEST_CASE("theta transform") {
    const auto model = generic_model();
    const auto same = theta_transform(model, 1.0);
    for (double t : {0.0, 2.0, 5.0}) CHECK(effective_input_rate(same, t) == doctest::Approx(effective_input_rate(model, t)));

    const auto unit = ContinuousModel::make(1.0, RateSchedule::constant(1.0), RateSchedule::constant(1.0),
                                            KillingField());
    const auto doubled = theta_transform(unit, 2.0);
    CHECK(doubled.lambda()(0.0) == 2.0);
    CHECK(effective_input_rate(doubled, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    const auto tripled = theta_transform(model, 3.0);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 20; ++i) {
        const double t = u(gen);
        CHECK(effective_input_rate(tripled, t) == doctest::Approx(effective_input_rate(model, t)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(theta_transform(model, 0.0), InvalidArgument);
    CHECK_THROWS_AS(theta_transform(model, 0.5), InvalidArgument);
}

TEST_CASE("unit-input normalization") {
    const auto one = ContinuousModel::make(0.8, RateSchedule::constant(1.0), RateSchedule::constant(1.0),
                                           smooth_field());
    const auto n1 = normalize_unit_input(one);
    for (double t : {0.5, 3.0})
        for (double x : {0.0, 0.4, 0.9}) CHECK(n1.g()(t, x) == doctest::Approx(one.g()(t, x)).epsilon(1e-14));

    const double theta = 3.5, rho = 0.8;
    const auto flat = ContinuousModel::make(rho, RateSchedule::constant(theta), RateSchedule::constant(1.0),
                                            KillingField());
    const auto nf = normalize_unit_input(flat);
    CHECK(nf.lambda()(7.0) == 1.0);
    CHECK(nf.g()(2.0, 0.3) == doctest::Approx(-rho * std::log(theta)));
    CHECK(effective_input_rate(nf, 2.0) == doctest::Approx(theta).epsilon(1e-10));

    const auto model = generic_model();
    const auto normalized = normalize_unit_input(model);
    for (auto [s, t] : random_pairs(10, 4)) {
        CHECK(alpha(normalized, s, t) == alpha(model, s, t));
        CHECK(beta(normalized, s, t) == doctest::Approx(beta(model, s, t)).epsilon(1e-8));
    }

    const auto vanishing = ContinuousModel::make(1.0, RateSchedule::custom([](double t) { return t; }),
                                                 RateSchedule::constant(1.0), KillingField());
    CHECK_THROWS_AS(effective_input_rate(normalize_unit_input(vanishing), -2.0), InvalidArgument);
}

TEST_CASE("killing split") {
    const auto model = generic_model();
    const auto identity = split_killing(model, KillingField());
    for (auto [s, t] : random_pairs(5, 6)) {
        CHECK(beta(identity, s, t) == doctest::Approx(beta(model, s, t)).epsilon(1e-10));
    }

    // the whole killing merged into the input
    const auto merged = split_killing(model, model.g());
    for (double t : {0.0, 1.0, 4.0}) {
        CHECK(merged.g()(t, 0.5) == doctest::Approx(0.0).scale(1.0));
        CHECK(merged.lambda()(t) == doctest::Approx(effective_input_rate(model, t)).epsilon(1e-10));
        CHECK(survival_probability(merged, t) == doctest::Approx(1.0));
    }

    const KillingField half([](double t, double x) { return 0.4 * (1.0 + 0.5 * std::sin(t)) * (1.0 - x); }, {});
    const auto split = split_killing(model, half);
    for (auto [s, t] : random_pairs(10, 8)) {
        CHECK(alpha(split, s, t) == alpha(model, s, t));
        CHECK(beta(split, s, t) == doctest::Approx(beta(model, s, t)).epsilon(1e-8));
    }

    const KillingField too_much = KillingField::constant(5.0);
    CHECK_THROWS_AS(beta(split_killing(model, too_much), 0.0, 2.0), InvalidArgument);
}
