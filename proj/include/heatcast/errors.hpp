#pragma once

#include <stdexcept>
#include <string>

namespace heatcast {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BoundsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A (year, t) pair is missing or duplicated in a climatology input.
struct IncompleteDatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyRegionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Requested exceedance level has floor(p*N) < 1 pooled samples.
struct LevelTooExtremeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite activation or gradient.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsplittableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A CLI verb was invoked before the verb that produces its input artifact.
struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace heatcast
