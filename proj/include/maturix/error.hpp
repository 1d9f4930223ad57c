#pragma once

#include <stdexcept>
#include <string>

namespace maturix {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, dimension mismatch, malformed files.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (non-finite state, unbounded intensity, ...).
class NumericFailure : public Error {
public:
    using Error::Error;
};

/// Quadrature did not reach the requested tolerance.
class QuadratureError : public NumericFailure {
public:
    QuadratureError(const std::string& what, double achieved_error)
        : NumericFailure(what), achieved_error_(achieved_error) {}

    double achieved_error() const noexcept { return achieved_error_; }

private:
    double achieved_error_;
};

/// The adaptive ODE integrator shrank its step below the representable
/// resolution, usually a sign of stiffness the explicit method cannot handle.
class StepSizeUnderflow : public NumericFailure {
public:
    StepSizeUnderflow(const std::string& what, double time)
        : NumericFailure(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace maturix
