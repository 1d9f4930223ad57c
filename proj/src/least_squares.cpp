#include "maturix/least_squares.hpp"

#include "maturix/error.hpp"

#include <cmath>
#include <limits>

namespace maturix {

LeastSquaresResult levenberg_marquardt(const std::function<Eigen::VectorXd(const std::vector<double>&)>& residuals,
                                       std::vector<double> x0, const LeastSquaresOptions& options) {
    const std::size_t d = x0.size();
    if (d == 0) throw InvalidArgument("levenberg_marquardt: empty parameter vector");
    LeastSquaresResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        return residuals(x);
    };
    auto norm2 = [](const Eigen::VectorXd& r) {
        return r.allFinite() ? r.squaredNorm() : std::numeric_limits<double>::infinity();
    };

    std::vector<double> x = std::move(x0);
    Eigen::VectorXd r = eval(x);
    double f = norm2(r);
    if (!std::isfinite(f)) throw NumericFailure("levenberg_marquardt: non-finite residuals at the start");
    const auto m = r.size();
    const auto dd = static_cast<Eigen::Index>(d);
    double damping = 1e-3;
    Eigen::MatrixXd jac(m, dd);
    std::vector<double> trial(d);

    for (; res.iterations < options.max_iterations; ++res.iterations) {
        bool jacobian_ok = true;
        for (std::size_t k = 0; k < d && jacobian_ok; ++k) {
            const double h = options.relative_step * std::max(1.0, std::abs(x[k]));
            trial = x;
            trial[k] = x[k] + h;
            const Eigen::VectorXd up = eval(trial);
            trial[k] = x[k] - h;
            const Eigen::VectorXd down = eval(trial);
            if (!up.allFinite() || !down.allFinite()) {
                jacobian_ok = false;
                break;
            }
            jac.col(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * h);
        }
        if (!jacobian_ok) break;

        // Column scaling as in Marquardt's method; solved through QR of the
        // augmented system because J^T J squares the condition number.
        Eigen::VectorXd scale(dd);
        for (Eigen::Index k = 0; k < dd; ++k) scale[k] = std::max(jac.col(k).norm(), 1e-300);
        bool accepted = false;
        Eigen::MatrixXd aug(m + dd, dd);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + dd);
        rhs.head(m) = -r;
        while (damping < 1e16) {
            aug.topRows(m) = jac;
            aug.bottomRows(dd) = (std::sqrt(damping) * scale).asDiagonal();
            const Eigen::VectorXd step = aug.colPivHouseholderQr().solve(rhs);
            if (!step.allFinite()) {
                damping *= 4.0;
                continue;
            }
            for (std::size_t k = 0; k < d; ++k) trial[k] = x[k] + step[static_cast<Eigen::Index>(k)];
            const Eigen::VectorXd rt = eval(trial);
            const double ft = norm2(rt);
            if (ft < f) {
                const double decrease = f - ft;
                x = trial;
                r = rt;
                f = ft;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (decrease <= options.tol * ft || f == 0.0) res.converged = true;
                break;
            }
            damping *= 4.0;
        }
        if (!accepted) {
            res.converged = true;  // no descent direction left at this resolution
            break;
        }
        if (res.converged) break;
    }
    res.x = std::move(x);
    res.value = f;
    return res;
}

}  // namespace maturix
