#pragma once

#include "maturix/distributions.hpp"
#include "maturix/quadrature.hpp"
#include "maturix/rate_schedule.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace maturix {

/// Killing rate during maturation, g(t, x) for x in [0, 1).
///
/// `time_breakpoints` are times where g may fail to be smooth in t;
/// `space_breakpoints` are maturation stages in (0, 1) where it may jump in x.
class KillingField {
public:
    using Function = std::function<double(double t, double x)>;

    /// g == 0.
    KillingField();
    KillingField(Function rate, std::vector<double> time_breakpoints, std::vector<double> space_breakpoints = {});

    static KillingField constant(double rate);

    double operator()(double t, double x) const { return rate_(t, x); }
    const std::vector<double>& time_breakpoints() const { return time_breakpoints_; }
    const std::vector<double>& space_breakpoints() const { return space_breakpoints_; }
    bool is_zero() const { return zero_; }

private:
    Function rate_;
    std::vector<double> time_breakpoints_;
    std::vector<double> space_breakpoints_;
    bool zero_ = false;
};

/// The separable profile g(t, x) = gamma * q(t) * 1{x < delta}.
struct PartialKilling {
    double gamma = 0.0;
    double delta = 0.0;
    RateSchedule q;
};

/// Continuous maturation model: input intensity lambda, maturation speed rho
/// (lag tau = 1 / rho), killing g during maturation and mu after it.
///
/// Immutable once built; the factories validate the parameters.
class ContinuousModel {
public:
    /// General killing field.
    static ContinuousModel make(double rho, RateSchedule lambda, RateSchedule mu, KillingField g,
                                bool amplification = false);

    /// Separable killing gamma * q(t) on maturation stages [0, delta).
    static ContinuousModel partial_killing(double rho, RateSchedule lambda, RateSchedule mu, double gamma,
                                           double delta, RateSchedule q, bool amplification = false);

    double rho() const { return rho_; }
    double tau() const { return 1.0 / rho_; }
    const RateSchedule& lambda() const { return lambda_; }
    const RateSchedule& mu() const { return mu_; }
    const KillingField& g() const { return g_; }
    const std::optional<PartialKilling>& profile() const { return profile_; }
    /// Negative killing values ("amplification" of the input) are permitted.
    bool amplification() const { return amplification_; }

private:
    ContinuousModel() = default;

    double rho_ = 1.0;
    RateSchedule lambda_;
    RateSchedule mu_;
    KillingField g_;
    std::optional<PartialKilling> profile_;
    bool amplification_ = false;
};

struct ExplicitOptions {
    double tol = 1e-10;        // outer quadrature tolerance
    double inner_tol = 1e-11;  // inner (maturation-path) quadrature tolerance
};

/// tau = 1 / rho.
double maturation_lag(const ContinuousModel& model);

/// Time integral of g along the maturation path started at T:
/// int_0^tau g(T + w, rho w) dw. Uses the exact primitive of q for the
/// separable profile when available.
double killing_exposure(const ContinuousModel& model, double start, const ExplicitOptions& options = {});

/// Same integral always evaluated by quadrature of the general field.
double killing_exposure_quadrature(const ContinuousModel& model, double start, const ExplicitOptions& options = {});

/// p(T) = exp(-int_0^tau g(T + w, rho w) dw).
double survival_probability(const ContinuousModel& model, double start, const ExplicitOptions& options = {});

/// alpha(s, t) = exp(-int_s^t mu).
double alpha(const ContinuousModel& model, double s, double t);

/// beta(s, t) = int_{s-tau}^{t-tau} lambda(u) p(u) alpha(u + tau, t) du, with the
/// maturation-path integral inside p done by quadrature as well.
double beta(const ContinuousModel& model, double s, double t, const ExplicitOptions& options = {});

/// beta for the separable profile with constant lambda and mu:
/// lambda int_{s-tau}^{t-tau} exp(-mu (t - tau - u) - gamma int_0^{delta tau} q(u + w) dw) du.
/// The inner integral uses q's exact primitive when available.
double beta_partial_killing(const ContinuousModel& model, double s, double t, const ExplicitOptions& options = {});

/// E(N_t | N_s = m) = m alpha(s, t) + beta(s, t).
double mean_count(const ContinuousModel& model, double s, double t, double m, const ExplicitOptions& options = {});

/// Law of N_t given N_s = m: B(m, alpha(s, t)) * P(beta(s, t)).
BinomialPoissonLaw occupation_law(const ContinuousModel& model, double s, double t, unsigned m,
                                  const ExplicitOptions& options = {});

/// Mean output started from the drug-free Poisson(lambda/mu) equilibrium at 0:
/// (lambda/mu) alpha(0, t) + beta(0, t), evaluated through the separable
/// closed reduction. Requires constant lambda, mu and the separable profile.
double q_infinity(const ContinuousModel& model, double t, const ExplicitOptions& options = {});

/// q_infinity at every time of a sorted grid, accumulating the outer integral
/// from one grid point to the next.
std::vector<double> q_infinity_curve(const ContinuousModel& model, const std::vector<double>& times,
                                     const ExplicitOptions& options = {});

}  // namespace maturix
