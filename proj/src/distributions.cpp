#include "maturix/distributions.hpp"

#include "maturix/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maturix {
namespace {

double log_choose(unsigned n, unsigned k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log of the Binomial(m, alpha) pmf at j; -inf outside the support.
double log_binomial(unsigned m, double alpha, unsigned j) {
    if (j > m) return -INFINITY;
    if (alpha <= 0.0) return j == 0 ? 0.0 : -INFINITY;
    if (alpha >= 1.0) return j == m ? 0.0 : -INFINITY;
    return log_choose(m, j) + j * std::log(alpha) + (m - j) * std::log1p(-alpha);
}

double log_poisson(std::size_t k, double mean) {
    if (mean <= 0.0) return k == 0 ? 0.0 : -INFINITY;
    return -mean + static_cast<double>(k) * std::log(mean) - std::lgamma(static_cast<double>(k) + 1.0);
}

}  // namespace

BinomialPoissonLaw::BinomialPoissonLaw(unsigned m_, double alpha_, double beta_) : m(m_), alpha(alpha_), beta(beta_) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("BinomialPoissonLaw: alpha must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("BinomialPoissonLaw: beta must be >= 0");
}

double BinomialPoissonLaw::pmf(std::size_t k) const {
    const unsigned top = static_cast<unsigned>(std::min<std::size_t>(m, k));
    double s = 0.0;
    for (unsigned j = 0; j <= top; ++j) {
        const double lp = log_binomial(m, alpha, j) + log_poisson(k - j, beta);
        if (lp > -INFINITY) s += std::exp(lp);
    }
    return s;
}

std::size_t BinomialPoissonLaw::tail_bound() const {
    return static_cast<std::size_t>(std::ceil(m + beta + 12.0 * std::sqrt(beta + 1.0) + 20.0));
}

std::vector<double> BinomialPoissonLaw::pmf_vector() const {
    std::vector<double> p(tail_bound() + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = pmf(k);
    return p;
}

double poisson_pmf(std::size_t k, double mean) {
    if (!(mean >= 0.0)) throw InvalidArgument("poisson_pmf: mean must be >= 0");
    return std::exp(log_poisson(k, mean));
}

double poisson_mixture_pmf(std::size_t k, double c, double alpha, double beta) {
    if (!(c >= 0.0)) throw InvalidArgument("poisson_mixture_pmf: c must be >= 0");
    const auto upper = static_cast<unsigned>(std::ceil(c + 12.0 * std::sqrt(c + 1.0) + 20.0));
    double s = 0.0;
    for (unsigned m = 0; m <= upper; ++m) {
        const double w = poisson_pmf(m, c);
        if (w == 0.0) continue;
        s += w * BinomialPoissonLaw(m, alpha, beta).pmf(k);
    }
    return s;
}

std::vector<double> empirical_pmf(std::span<const unsigned> samples) {
    if (samples.empty()) throw InvalidArgument("empirical_pmf: no samples");
    const unsigned top = *std::max_element(samples.begin(), samples.end());
    std::vector<double> p(top + 1, 0.0);
    for (unsigned s : samples) p[s] += 1.0;
    for (double& v : p) v /= static_cast<double>(samples.size());
    return p;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    const std::size_t n = std::max(p.size(), q.size());
    double d = 0.0;
    double mass_p = 0.0;
    double mass_q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        if (a < 0.0 || b < 0.0) throw InvalidArgument("total_variation: negative probability");
        d += std::abs(a - b);
        mass_p += a;
        mass_q += b;
    }
    d += std::abs(std::max(0.0, 1.0 - mass_p) - std::max(0.0, 1.0 - mass_q));
    return 0.5 * d;
}

ChiSquareResult chi_square_gof(std::span<const unsigned> samples, std::span<const double> pmf) {
    if (samples.empty()) throw InvalidArgument("chi_square_gof: no samples");
    const double n = static_cast<double>(samples.size());

    std::vector<double> observed(pmf.size(), 0.0);
    for (unsigned s : samples) observed[std::min<std::size_t>(s, pmf.size() - 1)] += 1.0;
    std::vector<double> expected(pmf.begin(), pmf.end());
    // The last entry stands for the whole upper tail.
    const double head = std::accumulate(expected.begin(), expected.end() - 1, 0.0);
    expected.back() = std::max(0.0, 1.0 - head);
    for (double& e : expected) e *= n;

    std::vector<double> cell_obs;
    std::vector<double> cell_exp;
    double acc_o = 0.0;
    double acc_e = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k) {
        acc_o += observed[k];
        acc_e += expected[k];
        if (acc_e >= 5.0) {
            cell_obs.push_back(acc_o);
            cell_exp.push_back(acc_e);
            acc_o = acc_e = 0.0;
        }
    }
    if (acc_e > 0.0 || acc_o > 0.0) {
        if (cell_exp.empty()) {
            cell_obs.push_back(acc_o);
            cell_exp.push_back(acc_e);
        } else {
            cell_obs.back() += acc_o;
            cell_exp.back() += acc_e;
        }
    }
    if (cell_exp.size() < 2) throw InvalidArgument("chi_square_gof: degenerate binning (fewer than two cells)");

    ChiSquareResult r;
    for (std::size_t c = 0; c < cell_exp.size(); ++c) {
        const double d = cell_obs[c] - cell_exp[c];
        r.statistic += d * d / cell_exp[c];
    }
    r.bins = cell_exp.size();
    r.degrees_of_freedom = cell_exp.size() - 1;
    r.p_value = boost::math::gamma_q(0.5 * static_cast<double>(r.degrees_of_freedom), 0.5 * r.statistic);
    return r;
}

ChiSquareResult chi_square_gof(std::span<const unsigned> samples, const BinomialPoissonLaw& law) {
    const unsigned top = *std::max_element(samples.begin(), samples.end());
    auto pmf = law.pmf_vector();
    // Keep every observed value inside the explicit range.
    for (std::size_t k = pmf.size(); k <= top + 1; ++k) pmf.push_back(law.pmf(k));
    return chi_square_gof(samples, pmf);
}

}  // namespace maturix
