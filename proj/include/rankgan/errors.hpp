#pragma once

#include <stdexcept>
#include <string>

namespace rankgan {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/axis mismatches between tensors or images.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid argument values (probabilities out of range, empty lists, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Bad configuration files or config values.
struct ConfigError : Error {
    using Error::Error;
};

// Weak-supervision firewall violation (reading hidden boxes).
struct SupervisionError : Error {
    using Error::Error;
};

// Unknown category or missing lookup key.
struct LookupError : Error {
    using Error::Error;
};

// Scene placement could not be satisfied.
struct GenerationError : Error {
    using Error::Error;
};

// backward() called twice on a graph without a fresh forward pass.
struct StaleGraphError : Error {
    using Error::Error;
};

// Non-finite gradients or mismatched optimizer state.
struct OptimizerError : Error {
    using Error::Error;
};

// Values outside a function's mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct CorruptionError : IoError {
    using IoError::IoError;
};

struct VersionError : IoError {
    using IoError::IoError;
};

}  // namespace rankgan
