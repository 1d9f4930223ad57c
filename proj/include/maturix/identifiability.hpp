#pragma once

#include "maturix/explicit_model.hpp"

namespace maturix {

/// The quadruple (tau, mu, g, lambda); a ContinuousModel carries exactly these.
using ModelQuadruple = ContinuousModel;

/// lambda_g(t) = lambda(t) p(t).
double effective_input_rate(const ContinuousModel& model, double t, const ExplicitOptions& options = {});

/// (tau, mu, g + rho log theta, theta lambda). Defined for any theta > 0;
/// theta < 1 may make the killing negative and requires the amplification
/// flag on the input model.
ModelQuadruple theta_transform(const ContinuousModel& model, double theta);

/// (tau, mu, G, 1) with G(v, y) = g(v, y) - rho log lambda(v - y / rho).
///
/// G is negative wherever lambda > e^{g tau}, so the result always carries
/// the amplification flag. Evaluating G where lambda <= 0 throws
/// InvalidArgument.
ModelQuadruple normalize_unit_input(const ContinuousModel& model);

/// (tau, mu, g - g1, lambda_{g1}) with
/// lambda_{g1}(t) = lambda(t) exp(-int_0^tau g1(t + w, rho w) dw).
/// Evaluating the remainder where g1 > g throws InvalidArgument (unless the
/// model permits amplification).
ModelQuadruple split_killing(const ContinuousModel& model, const KillingField& g1,
                             const ExplicitOptions& options = {});

}  // namespace maturix
