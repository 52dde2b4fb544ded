#pragma once

#include <stdexcept>
#include <string>

namespace icins {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad argument, out-of-range time).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A market quantity is undefined because a loading vanishes (b_r, sigma_I or sigma_S == 0).
class DegenerateMarketError : public Error {
public:
    using Error::Error;
};

/// Scenario or configuration fails validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Configuration text could not be parsed; carries the 1-based source line (0 if unknown).
class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& message, int line)
        : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A numerical scheme failed irrecoverably (e.g. a jump factor left its domain).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace icins
