#pragma once

#include <stdexcept>
#include <string>

namespace mrac {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration detected before any stepping.
struct ConfigError : Error {
    using Error::Error;
};

/// A numerical operation produced a non-finite or unusable result.
struct NumericError : Error {
    using Error::Error;
};

/// Simulation state or weights left the representable range.
struct DivergenceError : NumericError {
    DivergenceError(const std::string& what, long step)
        : NumericError(what + " (step " + std::to_string(step) + ")"), step(step) {}
    long step;
};

/// A stateful signal was sampled backwards in time.
struct OrderingError : Error {
    using Error::Error;
};

/// Critic H_uu fell below the floor that keeps the greedy policy defined.
struct SingularCriticError : NumericError {
    using NumericError::NumericError;
};

/// Rollout cost grew without bound (non-stabilizing gains).
struct UnboundedCostError : NumericError {
    using NumericError::NumericError;
};

}  // namespace mrac
