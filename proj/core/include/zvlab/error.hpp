#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace zvlab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain an operation accepts.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A user-supplied field returned a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// A discretization produced non-finite values (divergence, overflow).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Requested storage exceeds the configured memory budget.
class SizingError : public Error {
public:
    using Error::Error;
};

/// A point fell outside the tabulated domain of a grid object.
class ExtrapolationError : public Error {
public:
    using Error::Error;
};

/// Fixed-point inversion of the Zvonkin map did not converge.
class InversionError : public Error {
public:
    InversionError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The lambda search did not reach the requested gradient bound.
class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what,
                     std::vector<std::pair<double, double>> trace)
        : Error(what), trace_(std::move(trace)) {}
    const std::vector<std::pair<double, double>>& trace() const noexcept { return trace_; }

private:
    std::vector<std::pair<double, double>> trace_;
};

/// No usable samples remained for an estimator.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Bad command line or configuration.
class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace zvlab
