#pragma once

// Dormand-Prince 5(4) with step rejection and 4th-order dense output
// (coefficients from Hairer, Norsett & Wanner, "Solving ODEs I").

#include "maturix/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace maturix::detail {

struct DenseStep {
    double t_old;
    double h;
    Eigen::VectorXd r1, r2, r3, r4, r5;

    Eigen::VectorXd at(double t) const {
        const double s = (t - t_old) / h;
        const double s1 = 1.0 - s;
        return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }
};

/// Dense output of the step just accepted, built on first use.
template <class Solver>
class DenseView {
public:
    explicit DenseView(Solver& solver) : solver_(solver) {}
    Eigen::VectorXd at(double t) const { return solver_.dense().at(t); }

private:
    Solver& solver_;
};

struct Dopri5Settings {
    double rtol = 1e-8;
    double atol = 1e-8;
    double initial_step = 0.0;
    double max_step = 0.0;
    std::size_t max_steps = 10'000'000;
};

template <class Rhs>
class Dopri5 {
public:
    Dopri5(Rhs rhs, std::size_t n, Dopri5Settings settings) : rhs_(std::move(rhs)), settings_(settings) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y1_, &err_}) v->resize(n);
    }

    std::size_t accepted() const { return accepted_; }

    /// Interpolant of the step being reported; valid inside on_step only.
    const DenseStep& dense() {
        if (!dense_ready_) {
            if (!y_old_) throw NumericFailure("dense output requested outside a step callback");
            dense_output(t_old_, h_old_, *y_old_, dense_);
            dense_ready_ = true;
        }
        return dense_;
    }
    std::size_t rejected() const { return rejected_; }

    /// Advance y from t0 to t1 (one smooth segment). Calls
    /// on_step(const DenseView&, double t_new, const Eigen::VectorXd& y_new) after every accepted step.
    template <class OnStep>
    void advance(double t0, double t1, Eigen::VectorXd& y, OnStep&& on_step) {
        if (t1 <= t0) return;
        double t = t0;
        rhs_(t, y, k1_);
        if (h_ <= 0.0) h_ = initial_step(t, t1, y);
        const double span = t1 - t0;
        while (t < t1) {
            if (accepted_ + rejected_ >= settings_.max_steps) {
                throw NumericFailure("ODE integration exceeded the maximum number of steps");
            }
            double h = std::min(h_, settings_.max_step > 0.0 ? settings_.max_step : h_);
            bool last = false;
            if (t + h >= t1 || t1 - (t + h) < 1e-12 * span) {
                h = t1 - t;
                last = true;
            }
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
                throw StepSizeUnderflow("step size underflow at t = " + std::to_string(t) +
                                            " (system too stiff for the explicit integrator)",
                                        t);
            }
            const double e = step(t, h, y);
            if (e <= 1.0) {
                const double t_new = last ? t1 : t + h;
                if (!y1_.allFinite()) throw NumericFailure("non-finite state at t = " + std::to_string(t_new));
                ++accepted_;
                y_old_ = &y;
                t_old_ = t;
                h_old_ = h;
                dense_ready_ = false;
                on_step(DenseView<Dopri5>(*this), t_new, static_cast<const Eigen::VectorXd&>(y1_));
                y_old_ = nullptr;
                t = t_new;
                y.swap(y1_);
                k1_.swap(k7_);
                const double fac = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
                h_ = h * fac;
            } else {
                ++rejected_;
                const double fac = std::isfinite(e) ? std::clamp(0.9 * std::pow(e, -0.2), 0.2, 1.0) : 0.2;
                h_ = h * fac;
            }
        }
    }

private:
    // One trial step; returns the scaled error norm (NaN counts as failure).
    double step(double t, double h, const Eigen::VectorXd& y) {
        constexpr double a21 = 1.0 / 5.0;
        constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                         a54 = -212.0 / 729.0;
        constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                         a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                         a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
        constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                         e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

        tmp_ = y + h * a21 * k1_;
        rhs_(t + h / 5.0, tmp_, k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        rhs_(t + 3.0 * h / 10.0, tmp_, k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs_(t + 4.0 * h / 5.0, tmp_, k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs_(t + 8.0 * h / 9.0, tmp_, k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs_(t + h, tmp_, k6_);
        y1_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
        rhs_(t + h, y1_, k7_);
        err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

        double sum = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = settings_.atol + settings_.rtol * std::max(std::abs(y[i]), std::abs(y1_[i]));
            const double r = err_[i] / sc;
            sum += r * r;
        }
        const double e = std::sqrt(sum / static_cast<double>(std::max<Eigen::Index>(1, y.size())));
        return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    }

    void dense_output(double t, double h, const Eigen::VectorXd& y, DenseStep& d) const {
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        d.t_old = t;
        d.h = h;
        d.r1 = y;
        d.r2 = y1_ - y;
        d.r3 = h * k1_ - d.r2;
        d.r4 = d.r2 - h * k7_ - d.r3;
        d.r5 = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
    }

    double initial_step(double t, double t1, const Eigen::VectorXd& y) {
        if (settings_.initial_step > 0.0) return settings_.initial_step;
        auto norm = [&](const Eigen::VectorXd& v) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const double sc = settings_.atol + settings_.rtol * std::abs(y[i]);
                s += (v[i] / sc) * (v[i] / sc);
            }
            return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(1, v.size())));
        };
        const double d0 = norm(y);
        const double d1 = norm(k1_);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t1 - t);
        tmp_ = y + h0 * k1_;
        rhs_(t + h0, tmp_, k2_);
        const double d2 = norm(k2_ - k1_) / h0;
        const double m = std::max(d1, d2);
        const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
        return std::min(100.0 * h0, h1);
    }

    Rhs rhs_;
    Dopri5Settings settings_;
    double h_ = 0.0;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;
    Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y1_, err_;
    DenseStep dense_{};
    bool dense_ready_ = false;
    const Eigen::VectorXd* y_old_ = nullptr;
    double t_old_ = 0.0;
    double h_old_ = 0.0;
};

}  // namespace maturix::detail
