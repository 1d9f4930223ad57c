#include "maturix/nelder_mead.hpp"

#include "maturix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace maturix {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
    const std::size_t d = x0.size();
    if (d == 0) throw InvalidArgument("nelder_mead: empty parameter vector");
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> pts(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += options.initial_step;
    std::vector<double> vals(d + 1);
    for (std::size_t i = 0; i <= d; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(d + 1);
    std::vector<double> centroid(d), xr(d), xe(d), xc(d);
    auto at = [&](const std::vector<double>& c, const std::vector<double>& w, double coef, std::vector<double>& out) {
        for (std::size_t k = 0; k < d; ++k) out[k] = c[k] + coef * (w[k] - c[k]);
    };

    for (; res.iterations < options.max_iterations; ++res.iterations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[d - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= d; ++i) {
            for (std::size_t k = 0; k < d; ++k) diameter = std::max(diameter, std::abs(pts[i][k] - pts[best][k]));
        }
        if (diameter < options.simplex_tol || vals[worst] == vals[best]) {
            res.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < d; ++k) centroid[k] += pts[i][k];
        }
        for (auto& c : centroid) c /= static_cast<double>(d);

        at(centroid, pts[worst], -1.0, xr);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            at(centroid, pts[worst], -2.0, xe);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        // Contraction, outside or inside.
        const bool outside = fr < vals[worst];
        at(centroid, outside ? xr : pts[worst], 0.5, xc);
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            at(pts[best], pts[i], 0.5, pts[i]);
            vals[i] = eval(pts[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.value = vals[best];
    return res;
}

}  // namespace maturix
