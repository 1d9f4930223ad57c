#include "maturix/identifiability.hpp"

#include "maturix/error.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace maturix {

double effective_input_rate(const ContinuousModel& model, double t, const ExplicitOptions& options) {
    const double lam = model.lambda()(t);
    if (lam == 0.0) return 0.0;
    return lam * survival_probability(model, t, options);
}

ModelQuadruple theta_transform(const ContinuousModel& model, double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidArgument("theta_transform: theta must be positive");
    if (theta < 1.0 && !model.amplification()) {
        throw InvalidArgument("theta_transform: theta < 1 can make the killing negative; "
                              "enable amplification on the model");
    }
    if (theta == 1.0) return model;
    const double shift = model.rho() * std::log(theta);
    const KillingField g = model.g();
    KillingField shifted([g, shift](double t, double x) { return g(t, x) + shift; }, g.time_breakpoints(),
                         g.space_breakpoints());
    return ContinuousModel::make(model.rho(), model.lambda().scaled(theta), model.mu(), std::move(shifted),
                                 model.amplification());
}

ModelQuadruple normalize_unit_input(const ContinuousModel& model) {
    const KillingField g = model.g();
    const RateSchedule lambda = model.lambda();
    const double rho = model.rho();
    auto field = [g, lambda, rho](double v, double y) {
        const double u = v - y / rho;
        const double lam = lambda(u);
        if (!(lam > 0.0)) {
            throw InvalidArgument("normalize_unit_input: lambda must be positive, got " + std::to_string(lam) +
                                  " at t = " + std::to_string(u));
        }
        return g(v, y) - rho * std::log(lam);
    };
    std::vector<double> time_bps = g.time_breakpoints();
    time_bps.insert(time_bps.end(), lambda.breakpoints().begin(), lambda.breakpoints().end());
    if (std::isfinite(lambda.support_start())) time_bps.push_back(lambda.support_start());
    return ContinuousModel::make(rho, RateSchedule::constant(1.0), model.mu(),
                                 KillingField(std::move(field), std::move(time_bps), g.space_breakpoints()), true);
}

ModelQuadruple split_killing(const ContinuousModel& model, const KillingField& g1, const ExplicitOptions& options) {
    if (g1.is_zero()) return model;
    const KillingField g = model.g();
    const bool amplification = model.amplification();

    auto remainder = [g, g1, amplification](double t, double x) {
        const double a = g(t, x);
        const double b = g1(t, x);
        if (!amplification && b > a + 1e-14 * std::max(1.0, std::abs(a))) {
            throw InvalidArgument("split_killing: g1 exceeds g at (t, x) = (" + std::to_string(t) + ", " +
                                  std::to_string(x) + ")");
        }
        return a - b;
    };
    std::vector<double> time_bps = g.time_breakpoints();
    time_bps.insert(time_bps.end(), g1.time_breakpoints().begin(), g1.time_breakpoints().end());
    std::vector<double> space_bps = g.space_breakpoints();
    space_bps.insert(space_bps.end(), g1.space_breakpoints().begin(), g1.space_breakpoints().end());

    // lambda_{g1} = lambda * p_{g1}, where p_{g1} is the survival under g1 alone.
    auto carrier = std::make_shared<const ContinuousModel>(
        ContinuousModel::make(model.rho(), RateSchedule::constant(1.0), RateSchedule(), g1, amplification));
    const RateSchedule lambda = model.lambda();
    const double tau = model.tau();
    auto compound = [carrier, lambda, options](double t) {
        const double lam = lambda(t);
        if (lam == 0.0) return 0.0;
        return lam * survival_probability(*carrier, t, options);
    };
    std::vector<double> lambda_bps = lambda.breakpoints();
    std::vector<double> stages{0.0, 1.0};
    stages.insert(stages.end(), g1.space_breakpoints().begin(), g1.space_breakpoints().end());
    for (double b : g1.time_breakpoints()) {
        for (double x : stages) lambda_bps.push_back(b - x * tau);
    }
    RateSchedule new_lambda =
        RateSchedule::custom(std::move(compound), std::move(lambda_bps), {}, lambda.support_start());
    return ContinuousModel::make(model.rho(), std::move(new_lambda), model.mu(),
                                 KillingField(std::move(remainder), std::move(time_bps), std::move(space_bps)),
                                 amplification);
}

}  // namespace maturix
