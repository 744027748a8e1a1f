#pragma once

#include <stdexcept>
#include <string>

namespace basincert {

// Bad input: malformed config, malformed expression, inconsistent
// dimensions. The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime numerical failure: divergence, domain errors, caps hit.
// The CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Expression syntax/semantic error with a 1-based character position.
struct ParseError : ConfigError {
    int position;
    ParseError(const std::string& msg, int pos)
        : ConfigError(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

// Domain error during expression evaluation (log of nonpositive, sqrt of
// negative, division by zero, non-finite result).
struct EvalError : NumericalError {
    using NumericalError::NumericalError;
};

// Jacobian numerically singular; for averaged fields this usually signals
// a non-isolated zero (a curve of zeros instead of a hyperbolic point).
struct SingularJacobianError : NumericalError {
    using NumericalError::NumericalError;
};

// Original-form system whose unperturbed flow is not T-periodic.
struct NotPeriodicError : ConfigError {
    using ConfigError::ConfigError;
};

// An operation's stated precondition does not hold (e.g. local_basin at a
// zero that is not asymptotically stable).
struct PreconditionError : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace basincert
