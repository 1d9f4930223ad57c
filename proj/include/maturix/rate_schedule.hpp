#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace maturix {

/// A scalar rate as a function of time.
///
/// Rates are piecewise smooth: `breakpoints()` lists every time where the
/// function or one of its derivatives may jump. Before `support_start()`
/// the rate is identically zero (this is how a production that starts at
/// t = 0 is encoded). Schedules may carry an exact antiderivative, in which
/// case `integral()` is closed-form; otherwise it falls back to quadrature.
///
/// Schedules are immutable values and safe to share between threads.
class RateSchedule {
public:
    enum class Kind { constant, piecewise_exponential, tabulated, composite };
    using Function = std::function<double(double)>;

    static constexpr double unbounded_past = -std::numeric_limits<double>::infinity();

    /// Identically zero.
    RateSchedule();

    static RateSchedule constant(double value, double support_start = unbounded_past);

    /// Segment k covers [starts[k], starts[k+1]) (the last one extends to
    /// +inf) with value amplitudes[k] * exp(exponents[k] * (t - starts[k])).
    /// The support starts at starts.front().
    static RateSchedule piecewise_exponential(std::vector<double> starts,
                                              std::vector<double> amplitudes,
                                              std::vector<double> exponents);

    static RateSchedule piecewise_constant(std::vector<double> starts, std::vector<double> values);

    /// Linear interpolation through (times[k], values[k]), held constant
    /// outside the table.
    static RateSchedule tabulated(std::vector<double> times, std::vector<double> values);

    /// Arbitrary function. `primitive`, when given, must satisfy
    /// primitive' = value on [support_start, +inf).
    static RateSchedule custom(Function value, std::vector<double> breakpoints = {},
                               Function primitive = {}, double support_start = unbounded_past);

    double operator()(double t) const { return t < support_start_ ? 0.0 : value_(t); }
    double value(double t) const { return (*this)(t); }

    Kind kind() const { return kind_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    double support_start() const { return support_start_; }

    bool is_constant() const { return kind_ == Kind::constant && !std::isfinite(support_start_); }
    /// Only meaningful when is_constant().
    double constant_value() const { return constant_value_; }

    bool has_primitive() const { return static_cast<bool>(primitive_); }
    /// Antiderivative on [support_start, +inf); requires has_primitive().
    double primitive(double t) const;

    /// Integral over [a, b] (a <= b); exact when a primitive is available.
    double integral(double a, double b, double tol = 1e-11) const;

    /// Sum of two schedules (kind composite).
    RateSchedule operator+(const RateSchedule& other) const;
    /// factor * r(t).
    RateSchedule scaled(double factor) const;
    /// r(t - delay): the whole profile moved later by `delay`.
    RateSchedule shifted(double delay) const;

private:
    Kind kind_ = Kind::constant;
    Function value_;
    Function primitive_;
    std::vector<double> breakpoints_;
    double support_start_ = unbounded_past;
    double constant_value_ = 0.0;
};

}  // namespace maturix
