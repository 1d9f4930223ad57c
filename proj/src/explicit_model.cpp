#include "maturix/explicit_model.hpp"

#include "maturix/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace maturix {

KillingField::KillingField() : rate_([](double, double) { return 0.0; }), zero_(true) {}

KillingField::KillingField(Function rate, std::vector<double> time_breakpoints,
                           std::vector<double> space_breakpoints)
    : rate_(std::move(rate)),
      time_breakpoints_(std::move(time_breakpoints)),
      space_breakpoints_(std::move(space_breakpoints)) {
    if (!rate_) throw InvalidArgument("KillingField: empty rate function");
    for (double x : space_breakpoints_) {
        if (!(x > 0.0 && x < 1.0)) throw InvalidArgument("KillingField: space breakpoints must lie in (0, 1)");
    }
    std::sort(time_breakpoints_.begin(), time_breakpoints_.end());
    std::sort(space_breakpoints_.begin(), space_breakpoints_.end());
}

KillingField KillingField::constant(double rate) {
    if (rate == 0.0) return KillingField();
    return KillingField([rate](double, double) { return rate; }, {});
}

ContinuousModel ContinuousModel::make(double rho, RateSchedule lambda, RateSchedule mu, KillingField g,
                                      bool amplification) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("maturation speed rho must be positive");
    if (lambda.kind() == RateSchedule::Kind::constant && lambda.constant_value() < 0.0) {
        throw InvalidArgument("input intensity lambda must be nonnegative");
    }
    if (mu.kind() == RateSchedule::Kind::constant && mu.constant_value() < 0.0) {
        throw InvalidArgument("post-maturation killing mu must be nonnegative");
    }
    ContinuousModel m;
    m.rho_ = rho;
    m.lambda_ = std::move(lambda);
    m.mu_ = std::move(mu);
    m.g_ = std::move(g);
    m.amplification_ = amplification;
    return m;
}

ContinuousModel ContinuousModel::partial_killing(double rho, RateSchedule lambda, RateSchedule mu, double gamma,
                                                 double delta, RateSchedule q, bool amplification) {
    if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in [0, 1)");
    if (!std::isfinite(gamma) || (gamma < 0.0 && !amplification)) {
        throw InvalidArgument("gamma must be nonnegative (negative only with amplification)");
    }
    KillingField g;
    if (gamma != 0.0 && delta > 0.0) {
        auto qs = std::make_shared<const RateSchedule>(q);
        g = KillingField([qs, gamma, delta](double t, double x) { return x < delta ? gamma * (*qs)(t) : 0.0; },
                         q.breakpoints(), std::vector<double>{delta});
    }
    ContinuousModel m = make(rho, std::move(lambda), std::move(mu), std::move(g), amplification);
    m.profile_ = PartialKilling{gamma, delta, std::move(q)};
    return m;
}

double maturation_lag(const ContinuousModel& model) { return model.tau(); }

double killing_exposure_quadrature(const ContinuousModel& model, double start, const ExplicitOptions& options) {
    const KillingField& g = model.g();
    if (g.is_zero()) return 0.0;
    const double tau = model.tau();
    const double rho = model.rho();
    std::vector<double> bps;
    bps.reserve(g.time_breakpoints().size() + g.space_breakpoints().size());
    for (double b : g.time_breakpoints()) bps.push_back(b - start);
    for (double x : g.space_breakpoints()) bps.push_back(x * tau);
    QuadratureOptions q;
    q.tol = options.inner_tol;
    return integrate_adaptive([&](double w) { return g(start + w, std::min(rho * w, 1.0)); }, 0.0, tau, bps, q)
        .value;
}

namespace {

// gamma * int_u^{u + delta tau} q for the separable profile.
double partial_exposure(const PartialKilling& p, double tau, double u, double inner_tol) {
    if (p.gamma == 0.0 || p.delta == 0.0) return 0.0;
    const double len = p.delta * tau;
    if (p.q.has_primitive()) return p.gamma * (p.q.primitive(u + len) - p.q.primitive(u));
    return p.gamma * p.q.integral(u, u + len, inner_tol);
}

void require_valid_exposure(const ContinuousModel& model, double exposure) {
    if (exposure < -1e-12 && !model.amplification()) {
        throw InvalidArgument("negative killing integral; set the amplification flag to allow it");
    }
}

// Points where the outer integrand of beta may have a kink.
std::vector<double> outer_breakpoints(const ContinuousModel& model) {
    const double tau = model.tau();
    std::vector<double> bps = model.lambda().breakpoints();
    for (double b : model.mu().breakpoints()) bps.push_back(b - tau);
    std::vector<double> stages{0.0, 1.0};
    stages.insert(stages.end(), model.g().space_breakpoints().begin(), model.g().space_breakpoints().end());
    for (double b : model.g().time_breakpoints()) {
        for (double x : stages) bps.push_back(b - x * tau);
    }
    return bps;
}

const PartialKilling& require_profile(const ContinuousModel& model, const char* what) {
    if (!model.profile()) throw InvalidArgument(std::string(what) + ": model has no separable killing profile");
    return *model.profile();
}

void require_constant_rates(const ContinuousModel& model, const char* what) {
    if (model.lambda().kind() != RateSchedule::Kind::constant) {
        throw InvalidArgument(std::string(what) + ": lambda must be constant");
    }
    if (!model.mu().is_constant()) throw InvalidArgument(std::string(what) + ": mu must be constant");
}

}  // namespace

double killing_exposure(const ContinuousModel& model, double start, const ExplicitOptions& options) {
    if (model.profile()) return partial_exposure(*model.profile(), model.tau(), start, options.inner_tol);
    return killing_exposure_quadrature(model, start, options);
}

double survival_probability(const ContinuousModel& model, double start, const ExplicitOptions& options) {
    const double e = killing_exposure(model, start, options);
    require_valid_exposure(model, e);
    return std::exp(-e);
}

double alpha(const ContinuousModel& model, double s, double t) {
    if (!(t >= s)) throw InvalidArgument("alpha: requires t >= s");
    if (s == t) return 1.0;
    return std::exp(-model.mu().integral(s, t));
}

double beta(const ContinuousModel& model, double s, double t, const ExplicitOptions& options) {
    if (!(t >= s)) throw InvalidArgument("beta: requires t >= s");
    const double tau = model.tau();
    const double lo = std::max(s - tau, model.lambda().support_start());
    const double hi = t - tau;
    if (lo >= hi) return 0.0;
    const auto integrand = [&](double u) {
        const double lam = model.lambda()(u);
        if (lam == 0.0) return 0.0;
        const double e = killing_exposure_quadrature(model, u, options);
        require_valid_exposure(model, e);
        return lam * std::exp(-e) * alpha(model, u + tau, t);
    };
    QuadratureOptions q;
    q.tol = options.tol;
    return integrate_adaptive(integrand, lo, hi, outer_breakpoints(model), q).value;
}

double beta_partial_killing(const ContinuousModel& model, double s, double t, const ExplicitOptions& options) {
    if (!(t >= s)) throw InvalidArgument("beta_partial_killing: requires t >= s");
    const PartialKilling& p = require_profile(model, "beta_partial_killing");
    require_constant_rates(model, "beta_partial_killing");
    const double tau = model.tau();
    const double lam = model.lambda().constant_value();
    const double mu = model.mu().constant_value();
    const double lo = std::max(s - tau, model.lambda().support_start());
    const double hi = t - tau;
    if (lo >= hi || lam == 0.0) return 0.0;

    std::vector<double> bps;
    for (double b : p.q.breakpoints()) {
        bps.push_back(b);
        bps.push_back(b - p.delta * tau);
    }
    const auto integrand = [&](double u) {
        const double e = partial_exposure(p, tau, u, options.inner_tol);
        require_valid_exposure(model, e);
        return std::exp(-mu * (hi - u) - e);
    };
    QuadratureOptions q;
    q.tol = options.tol;
    return lam * integrate_adaptive(integrand, lo, hi, bps, q).value;
}

double mean_count(const ContinuousModel& model, double s, double t, double m, const ExplicitOptions& options) {
    if (!(m >= 0.0)) throw InvalidArgument("mean_count: m must be nonnegative");
    return m * alpha(model, s, t) + beta(model, s, t, options);
}

BinomialPoissonLaw occupation_law(const ContinuousModel& model, double s, double t, unsigned m,
                                  const ExplicitOptions& options) {
    return BinomialPoissonLaw(m, alpha(model, s, t), beta(model, s, t, options));
}

double q_infinity(const ContinuousModel& model, double t, const ExplicitOptions& options) {
    require_profile(model, "q_infinity");
    require_constant_rates(model, "q_infinity");
    if (!(t >= 0.0)) throw InvalidArgument("q_infinity: requires t >= 0");
    const double lam = model.lambda().constant_value();
    const double mu = model.mu().constant_value();
    if (!(mu > 0.0)) throw InvalidArgument("q_infinity: mu must be positive");
    return lam / mu * std::exp(-mu * t) + beta_partial_killing(model, 0.0, t, options);
}

std::vector<double> q_infinity_curve(const ContinuousModel& model, const std::vector<double>& times,
                                     const ExplicitOptions& options) {
    const PartialKilling& p = require_profile(model, "q_infinity_curve");
    require_constant_rates(model, "q_infinity_curve");
    const double lam = model.lambda().constant_value();
    const double mu = model.mu().constant_value();
    if (!(mu > 0.0)) throw InvalidArgument("q_infinity_curve: mu must be positive");
    const double tau = model.tau();
    const double support = model.lambda().support_start();

    std::vector<double> bps;
    for (double b : p.q.breakpoints()) {
        bps.push_back(b);
        bps.push_back(b - p.delta * tau);
    }
    QuadratureOptions q;
    q.tol = options.tol;

    std::vector<double> out;
    out.reserve(times.size());
    double previous = 0.0;
    double accumulated = 0.0;  // int_{-tau}^{previous - tau} exp(-mu (previous - tau - u) - E(u)) du
    for (double t : times) {
        if (!(t >= previous)) throw InvalidArgument("q_infinity_curve: times must be sorted and >= 0");
        const double lo = std::max(previous - tau, support);
        const double hi = t - tau;
        double piece = 0.0;
        if (lo < hi && lam != 0.0) {
            piece = integrate_adaptive(
                        [&](double u) {
                            const double e = partial_exposure(p, tau, u, options.inner_tol);
                            require_valid_exposure(model, e);
                            return std::exp(-mu * (hi - u) - e);
                        },
                        lo, hi, bps, q)
                        .value;
        }
        accumulated = accumulated * std::exp(-mu * (t - previous)) + piece;
        previous = t;
        out.push_back(lam / mu * std::exp(-mu * t) + lam * accumulated);
    }
    return out;
}

}  // namespace maturix
