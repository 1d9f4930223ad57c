#pragma once

#include <functional>
#include <span>
#include <vector>

namespace maturix {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // sum of per-panel |I_2n - I_n| estimates
    std::size_t evaluations = 0;
};

struct QuadratureOptions {
    double tol = 1e-9;
    // Relative floor for the absolute acceptance test, as a fraction of tol.
    double abs_floor = 1e-3;
    int max_level = 10;       // largest rule has 2^max_level + 1 nodes
    int max_bisections = 24;  // recursion depth once the largest rule fails
};

/// Clenshaw-Curtis quadrature of f over [a, b].
///
/// The interval is first split at every breakpoint lying strictly inside
/// (a, b). On each panel the rule is doubled (reusing the previous nodes)
/// until two successive estimates agree to `tol`, relative to the panel
/// value, with an absolute floor of tol * abs_floor scaled by the panel's
/// share of [a, b]. A panel that fails at the largest rule is bisected.
///
/// Throws QuadratureError when a panel cannot be resolved; the exception
/// carries the achieved error estimate.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    std::span<const double> breakpoints = {},
                                    const QuadratureOptions& options = {});

/// Convenience overload returning only the value.
double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints = {}, double tol = 1e-9);

/// Sorted, de-duplicated copy of the points strictly inside (a, b).
std::vector<double> interior_points(std::span<const double> points, double a, double b);

}  // namespace maturix
