#pragma once

#include <stdexcept>
#include <string>

namespace polaron {

// Exception hierarchy used across the library. Each condition the numerical
// routines can reject gets its own type so callers (and the CLI) can map
// failures to exit codes without string matching.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Input function is identically zero; nothing to normalize.
struct AllZeroError : Error {
    using Error::Error;
};

// NaN or infinity found where finite values are required.
struct NonFiniteError : Error {
    using Error::Error;
};

// Shell integrals disagree with a direct reference quadrature (debug check).
struct GridTooCoarseError : Error {
    using Error::Error;
};

// Iterative routine exhausted its iteration budget.
struct NoConvergenceError : Error {
    using Error::Error;
};

// Logarithmic derivative requested for a function with nonpositive values.
struct NonPositivePsiError : Error {
    using Error::Error;
};

// Unregularized pair potential evaluated at coincident points.
struct SingularPairError : Error {
    using Error::Error;
};

// Attempt to move the pinned lattice node.
struct PinnedNodeError : Error {
    using Error::Error;
};

// Statistic requested from too few samples.
struct InsufficientSamplesError : Error {
    using Error::Error;
};

// Two-sample operation on samples taken at different lags.
struct LagMismatchError : Error {
    using Error::Error;
};

// Requested lag exceeds the available trajectory span.
struct LagTooLongError : Error {
    using Error::Error;
};

// Rescaled lattice of one run does not match the other run's lattice.
struct LatticeMismatchError : Error {
    using Error::Error;
};

// Required input file absent.
struct MissingInputError : Error {
    using Error::Error;
};

} // namespace polaron
