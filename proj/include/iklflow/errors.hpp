#pragma once

#include <stdexcept>
#include <string>

namespace iklflow {

/// Bad arguments: dimension mismatch, negative time, malformed values.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A Target was asked for something it does not expose (score, sampler, ...).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration (e.g. injection = 0 with beta > 0).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Config file could not be parsed; message carries the field path.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver stopped above tolerance. Residual is attached.
struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string &msg, double res)
        : std::runtime_error(msg), residual(res) {}
};

/// Non-finite value encountered where a finite one is required.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problem size outside the supported range of a brute-force oracle.
struct ScaleError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// pi puts mass on an atom where mu has none.
struct AbsoluteContinuityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace iklflow
