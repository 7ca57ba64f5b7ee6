#pragma once

#include <stdexcept>
#include <string>

namespace semiwave {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (non-positive step,
/// negative potential, grid mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Requested lattice exceeds the configured site budget.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or unsupported solver configuration.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Iterative eigensolver ran out of budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double worst_residual)
        : Error(what), worst_residual_(worst_residual) {}

    double worst_residual() const { return worst_residual_; }

private:
    double worst_residual_;
};

/// Non-finite state produced by the time integrator.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t mode)
        : Error(what), mode_(mode) {}

    std::size_t mode() const { return mode_; }

private:
    std::size_t mode_;
};

/// A reference expansion cannot meet its accuracy budget.
class AccuracyError : public Error {
public:
    using Error::Error;
};

/// A regularised propagation speed lost strict positivity.
class CertificateError : public Error {
public:
    using Error::Error;
};

}  // namespace semiwave
