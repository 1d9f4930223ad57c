#include "maturix/quadrature.hpp"

#include "maturix/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace maturix {
namespace {

constexpr int kMinLevel = 2;
constexpr int kMaxLevel = 11;

// Clenshaw-Curtis weights on [-1, 1] for N = 2^level, nodes cos(k pi / N).
std::vector<double> clenshaw_curtis_weights(int level) {
    const int n = 1 << level;
    std::vector<double> w(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double theta = std::numbers::pi * k / n;
        double s = 1.0;
        for (int j = 1; j <= n / 2; ++j) {
            const double b = (2 * j == n) ? 1.0 : 2.0;
            s -= b / (4.0 * j * j - 1.0) * std::cos(2.0 * j * theta);
        }
        w[k] = ((k == 0 || k == n) ? 1.0 : 2.0) * s / n;
    }
    return w;
}

const std::vector<double>& weights(int level) {
    static const auto table = [] {
        std::array<std::vector<double>, kMaxLevel + 1> t;
        for (int l = 1; l <= kMaxLevel; ++l) t[l] = clenshaw_curtis_weights(l);
        return t;
    }();
    return table[level];
}

struct Panel {
    double value;
    double error;
    bool converged;
};

class PanelIntegrator {
public:
    PanelIntegrator(const std::function<double(double)>& f, const QuadratureOptions& opt,
                    double total_length)
        : f_(f), opt_(opt), total_length_(total_length),
          max_level_(std::clamp(opt.max_level, kMinLevel + 1, kMaxLevel)) {}

    std::size_t evaluations() const { return evaluations_; }

    void integrate(double a, double b, int depth, QuadratureResult& out) {
        const Panel p = single(a, b);
        if (p.converged) {
            out.value += p.value;
            out.error += p.error;
            return;
        }
        if (depth >= opt_.max_bisections) {
            throw QuadratureError("quadrature did not converge on [" + std::to_string(a) + ", " +
                                      std::to_string(b) + "]",
                                  out.error + p.error);
        }
        const double mid = 0.5 * (a + b);
        integrate(a, mid, depth + 1, out);
        integrate(mid, b, depth + 1, out);
    }

private:
    double eval(double x) {
        ++evaluations_;
        const double y = f_(x);
        if (!std::isfinite(y)) {
            throw NumericFailure("non-finite integrand value at " + std::to_string(x));
        }
        return y;
    }

    Panel single(double a, double b) {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        if (half == 0.0) return {0.0, 0.0, true};
        // Endpoints are evaluated just inside the panel so that jumps located
        // on a breakpoint contribute their one-sided limits.
        const double inset =
            std::max(2.0 * half * 1e-12,
                     8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)));
        const double left = std::min(a + inset, mid);
        const double right = std::max(b - inset, mid);

        const double floor =
            opt_.tol * opt_.abs_floor * (total_length_ > 0.0 ? (b - a) / total_length_ : 1.0);

        int level = kMinLevel;
        int n = 1 << level;
        std::vector<double> values(n + 1);
        for (int k = 0; k <= n; ++k) {
            values[k] = node_value(k, n, mid, half, left, right);
        }
        double previous = apply(values, level) * half;
        double diff = std::numeric_limits<double>::infinity();
        while (level < max_level_) {
            ++level;
            n = 1 << level;
            std::vector<double> next(n + 1);
            for (int k = 0; k <= n; ++k) {
                next[k] = (k % 2 == 0) ? values[k / 2] : node_value(k, n, mid, half, left, right);
            }
            values = std::move(next);
            const double current = apply(values, level) * half;
            diff = std::abs(current - previous);
            if (diff <= std::max(opt_.tol * std::abs(current), floor)) {
                return {current, diff, true};
            }
            previous = current;
        }
        return {previous, diff, false};
    }

    double node_value(int k, int n, double mid, double half, double left, double right) {
        if (k == 0) return eval(right);
        if (k == n) return eval(left);
        return eval(mid + half * std::cos(std::numbers::pi * k / n));
    }

    static double apply(const std::vector<double>& values, int level) {
        const auto& w = weights(level);
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += w[k] * values[k];
        return s;
    }

    const std::function<double(double)>& f_;
    const QuadratureOptions& opt_;
    double total_length_;
    int max_level_;
    std::size_t evaluations_ = 0;
};

}  // namespace

std::vector<double> interior_points(std::span<const double> points, double a, double b) {
    std::vector<double> out;
    for (double p : points) {
        if (p > a && p < b) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    std::span<const double> breakpoints,
                                    const QuadratureOptions& options) {
    if (!(a <= b)) throw InvalidArgument("integrate_adaptive: requires a <= b");
    if (!(options.tol > 0.0)) throw InvalidArgument("integrate_adaptive: tol must be positive");
    QuadratureResult result;
    if (a == b) return result;
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw InvalidArgument("integrate_adaptive: bounds must be finite");
    }

    PanelIntegrator panel(f, options, b - a);
    double lo = a;
    for (double bp : interior_points(breakpoints, a, b)) {
        panel.integrate(lo, bp, 0, result);
        lo = bp;
    }
    panel.integrate(lo, b, 0, result);
    result.evaluations = panel.evaluations();
    return result;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints, double tol) {
    QuadratureOptions opt;
    opt.tol = tol;
    return integrate_adaptive(f, a, b, breakpoints, opt).value;
}

}  // namespace maturix
