#pragma once

#include <stdexcept>
#include <string>

namespace ralqr {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent matrix/vector dimensions or malformed inputs.
struct DimensionError : Error {
    using Error::Error;
};

// A parameter is outside its valid range (N_b < 2, epsilon <= 0, ...).
struct InvalidParameter : Error {
    using Error::Error;
};

// The regressor gram matrix is rank deficient: the data do not excite
// every direction of the parameter space.
struct InsufficientExcitation : Error {
    InsufficientExcitation(const std::string& what, double condition_estimate,
                           int replicate_index = -1)
        : Error(what), condition(condition_estimate), replicate(replicate_index) {}

    double condition;   // lambda_max / lambda_min of the gram matrix (inf if singular)
    int replicate;      // bootstrap replicate that failed, -1 outside the bootstrap
};

// The nominal pair (A, B) admits no stabilizing static gain.
struct NotStabilizable : Error {
    using Error::Error;
};

// The multiplicative-noise system admits no mean-square stabilizing gain
// at the requested noise level; value iteration diverged.
struct MeanSquareUnstabilizable : Error {
    using Error::Error;
};

// Operation called on an object that is not in a state to accept it.
struct UsageError : Error {
    using Error::Error;
};

// Bad or inconsistent configuration file content.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem failures while reading inputs or writing results.
struct IoError : Error {
    using Error::Error;
};

}  // namespace ralqr
