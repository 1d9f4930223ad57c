#include "maturix/rate_schedule.hpp"

#include "maturix/error.hpp"
#include "maturix/quadrature.hpp"

#include <algorithm>
#include <memory>

namespace maturix {
namespace {

void require_increasing(const std::vector<double>& t, const char* what) {
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k])) throw InvalidArgument(std::string(what) + ": non-finite time");
        if (k > 0 && !(t[k] > t[k - 1])) {
            throw InvalidArgument(std::string(what) + ": times must be strictly increasing");
        }
    }
}

std::vector<double> merged(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

// a * (exp(r x) - 1) / r, continuous at r = 0.
double exp_segment_integral(double a, double r, double x) {
    if (r == 0.0) return a * x;
    return a * std::expm1(r * x) / r;
}

}  // namespace

RateSchedule::RateSchedule()
    : kind_(Kind::constant),
      value_([](double) { return 0.0; }),
      primitive_([](double) { return 0.0; }) {}

RateSchedule RateSchedule::constant(double value, double support_start) {
    if (!std::isfinite(value)) throw InvalidArgument("constant rate must be finite");
    if (std::isnan(support_start) || support_start == std::numeric_limits<double>::infinity()) {
        throw InvalidArgument("invalid support start");
    }
    RateSchedule r;
    r.kind_ = Kind::constant;
    r.constant_value_ = value;
    r.value_ = [value](double) { return value; };
    r.primitive_ = [value](double t) { return value * t; };
    r.support_start_ = support_start;
    if (std::isfinite(support_start)) r.breakpoints_ = {support_start};
    return r;
}

RateSchedule RateSchedule::piecewise_exponential(std::vector<double> starts,
                                                 std::vector<double> amplitudes,
                                                 std::vector<double> exponents) {
    if (starts.empty() || starts.size() != amplitudes.size() || starts.size() != exponents.size()) {
        throw InvalidArgument("piecewise_exponential: mismatched segment arrays");
    }
    require_increasing(starts, "piecewise_exponential");
    // Cumulative integral at the start of each segment.
    std::vector<double> cumulative(starts.size(), 0.0);
    for (std::size_t k = 1; k < starts.size(); ++k) {
        cumulative[k] = cumulative[k - 1] +
                        exp_segment_integral(amplitudes[k - 1], exponents[k - 1], starts[k] - starts[k - 1]);
    }
    struct Data {
        std::vector<double> s, a, r, c;
        std::size_t segment(double t) const {
            auto it = std::upper_bound(s.begin(), s.end(), t);
            return it == s.begin() ? 0 : static_cast<std::size_t>(it - s.begin()) - 1;
        }
    };
    auto d = std::make_shared<const Data>(Data{starts, amplitudes, exponents, cumulative});

    RateSchedule r;
    r.kind_ = Kind::piecewise_exponential;
    r.value_ = [d](double t) {
        const auto k = d->segment(t);
        return d->a[k] * std::exp(d->r[k] * (t - d->s[k]));
    };
    r.primitive_ = [d](double t) {
        const auto k = d->segment(t);
        return d->c[k] + exp_segment_integral(d->a[k], d->r[k], t - d->s[k]);
    };
    r.support_start_ = starts.front();
    r.breakpoints_ = starts;
    return r;
}

RateSchedule RateSchedule::piecewise_constant(std::vector<double> starts, std::vector<double> values) {
    std::vector<double> zeros(starts.size(), 0.0);
    return piecewise_exponential(std::move(starts), std::move(values), std::move(zeros));
}

RateSchedule RateSchedule::tabulated(std::vector<double> times, std::vector<double> values) {
    if (times.empty() || times.size() != values.size()) {
        throw InvalidArgument("tabulated: mismatched table");
    }
    require_increasing(times, "tabulated");
    std::vector<double> cumulative(times.size(), 0.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
        cumulative[k] = cumulative[k - 1] + 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    struct Data {
        std::vector<double> t, v, c;
    };
    auto d = std::make_shared<const Data>(Data{times, values, cumulative});

    RateSchedule r;
    r.kind_ = Kind::tabulated;
    r.value_ = [d](double t) {
        if (t <= d->t.front()) return d->v.front();
        if (t >= d->t.back()) return d->v.back();
        const auto k = static_cast<std::size_t>(std::upper_bound(d->t.begin(), d->t.end(), t) - d->t.begin()) - 1;
        const double w = (t - d->t[k]) / (d->t[k + 1] - d->t[k]);
        return d->v[k] + w * (d->v[k + 1] - d->v[k]);
    };
    r.primitive_ = [d](double t) {
        if (t <= d->t.front()) return d->v.front() * (t - d->t.front());
        if (t >= d->t.back()) return d->c.back() + d->v.back() * (t - d->t.back());
        const auto k = static_cast<std::size_t>(std::upper_bound(d->t.begin(), d->t.end(), t) - d->t.begin()) - 1;
        const double dt = t - d->t[k];
        const double slope = (d->v[k + 1] - d->v[k]) / (d->t[k + 1] - d->t[k]);
        return d->c[k] + d->v[k] * dt + 0.5 * slope * dt * dt;
    };
    r.breakpoints_ = times;
    return r;
}

RateSchedule RateSchedule::custom(Function value, std::vector<double> breakpoints, Function primitive,
                                  double support_start) {
    if (!value) throw InvalidArgument("custom schedule needs a value function");
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    RateSchedule r;
    r.kind_ = Kind::composite;
    r.value_ = std::move(value);
    r.primitive_ = std::move(primitive);
    r.support_start_ = support_start;
    if (std::isfinite(support_start)) breakpoints = merged(std::move(breakpoints), {support_start});
    r.breakpoints_ = std::move(breakpoints);
    return r;
}

double RateSchedule::primitive(double t) const {
    if (!primitive_) throw InvalidArgument("schedule has no exact primitive");
    return primitive_(std::max(t, support_start_));
}

double RateSchedule::integral(double a, double b, double tol) const {
    if (a == b) return 0.0;
    if (a > b) return -integral(b, a, tol);
    if (primitive_) return primitive(b) - primitive(a);
    a = std::max(a, support_start_);
    if (a >= b) return 0.0;
    QuadratureOptions opt;
    opt.tol = tol;
    return integrate_adaptive([this](double t) { return (*this)(t); }, a, b, breakpoints_, opt).value;
}

RateSchedule RateSchedule::operator+(const RateSchedule& other) const {
    RateSchedule r;
    r.kind_ = Kind::composite;
    auto lhs = std::make_shared<const RateSchedule>(*this);
    auto rhs = std::make_shared<const RateSchedule>(other);
    r.value_ = [lhs, rhs](double t) { return (*lhs)(t) + (*rhs)(t); };
    if (has_primitive() && other.has_primitive()) {
        r.primitive_ = [lhs, rhs](double t) { return lhs->primitive(t) + rhs->primitive(t); };
    }
    r.support_start_ = std::min(support_start_, other.support_start_);
    r.breakpoints_ = merged(breakpoints_, other.breakpoints_);
    return r;
}

RateSchedule RateSchedule::scaled(double factor) const {
    if (!std::isfinite(factor)) throw InvalidArgument("scale factor must be finite");
    RateSchedule r = *this;
    if (kind_ == Kind::constant) {
        return constant(constant_value_ * factor, support_start_);
    }
    auto base = std::make_shared<const RateSchedule>(*this);
    r.kind_ = Kind::composite;
    r.value_ = [base, factor](double t) { return factor * (*base)(t); };
    if (has_primitive()) {
        r.primitive_ = [base, factor](double t) { return factor * base->primitive(t); };
    }
    return r;
}

RateSchedule RateSchedule::shifted(double delay) const {
    if (!std::isfinite(delay)) throw InvalidArgument("delay must be finite");
    if (kind_ == Kind::constant) {
        return constant(constant_value_, support_start_ + delay);
    }
    auto base = std::make_shared<const RateSchedule>(*this);
    RateSchedule r;
    r.kind_ = Kind::composite;
    r.value_ = [base, delay](double t) { return (*base)(t - delay); };
    if (has_primitive()) {
        r.primitive_ = [base, delay](double t) { return base->primitive(t - delay); };
    }
    r.support_start_ = support_start_ + delay;
    r.breakpoints_ = breakpoints_;
    for (double& b : r.breakpoints_) b += delay;
    return r;
}

}  // namespace maturix
