#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace maturix {

/// Convolution B(m, alpha) * P(beta): the number of survivors among m
/// independent particles plus an independent Poisson immigration.
struct BinomialPoissonLaw {
    unsigned m = 0;
    double alpha = 1.0;
    double beta = 0.0;

    BinomialPoissonLaw() = default;
    BinomialPoissonLaw(unsigned m, double alpha, double beta);

    double pmf(std::size_t k) const;
    double mean() const { return m * alpha + beta; }
    double variance() const { return m * alpha * (1.0 - alpha) + beta; }

    /// Support bound m + beta + 12 sqrt(beta + 1) + 20; the mass beyond it is below 1e-12.
    std::size_t tail_bound() const;
    /// pmf(0..tail_bound()).
    std::vector<double> pmf_vector() const;
};

/// P(c) pmf at k, computed in log space.
double poisson_pmf(std::size_t k, double mean);

/// pmf at k of the mixture over m ~ P(c) of B(m, alpha) * P(beta).
/// Sums the mixture directly (it should equal P(c alpha + beta)).
double poisson_mixture_pmf(std::size_t k, double c, double alpha, double beta);

/// Normalized histogram of nonnegative integer samples.
std::vector<double> empirical_pmf(std::span<const unsigned> samples);

/// 0.5 * sum |p_i - q_i|. Missing mass (1 - sum) of each vector is folded
/// into one extra bin so truncated vectors compare correctly.
double total_variation(std::span<const double> p, std::span<const double> q);

struct ChiSquareResult {
    double statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
    std::size_t bins = 0;
};

/// Pearson goodness of fit of integer samples against a law. Adjacent
/// cells are merged left to right until every expected count is at least 5;
/// the last cell absorbs the upper tail.
ChiSquareResult chi_square_gof(std::span<const unsigned> samples, const BinomialPoissonLaw& law);

/// Same test against an explicit pmf vector (the tail beyond it is merged
/// into the last cell).
ChiSquareResult chi_square_gof(std::span<const unsigned> samples, std::span<const double> pmf);

}  // namespace maturix
