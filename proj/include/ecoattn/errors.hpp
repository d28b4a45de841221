#pragma once

#include <stdexcept>
#include <string>

namespace ecoattn {

/// Dimension or bit-width mismatch between operands.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument value.
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numeric degeneracy: non-finite values or vanishing denominators.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation invoked on an object in the wrong state.
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input data (e.g. a target matrix that must be symmetric).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem or serialization failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ecoattn
