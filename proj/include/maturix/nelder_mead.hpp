#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace maturix {

struct NelderMeadOptions {
    std::size_t max_iterations = 2000;
    double simplex_tol = 1e-8;  // max vertex distance from the best vertex (infinity norm)
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Unconstrained Nelder-Mead minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). Non-finite
/// objective values are treated as +inf. Converged when the simplex
/// diameter drops below simplex_tol, or when every vertex has the same value.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

}  // namespace maturix
