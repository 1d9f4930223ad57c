#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace maturix {

struct LeastSquaresOptions {
    std::size_t max_iterations = 200;
    double relative_step = 1e-6;   // central-difference step, relative to max(1, |x|)
    double tol = 1e-14;            // stop when the relative decrease of |r|^2 falls below this
};

struct LeastSquaresResult {
    std::vector<double> x;
    double value = 0.0;  // |r(x)|^2
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Levenberg-Marquardt on |r(x)|^2 with a central-difference Jacobian and
/// Marquardt diagonal scaling. A residual vector with non-finite entries
/// counts as a failed trial step.
LeastSquaresResult levenberg_marquardt(const std::function<Eigen::VectorXd(const std::vector<double>&)>& residuals,
                                       std::vector<double> x0, const LeastSquaresOptions& options = {});

}  // namespace maturix
