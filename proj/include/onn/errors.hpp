#pragma once

#include <stdexcept>
#include <string>

namespace onn {

// Structurally invalid input from the caller (bad shapes, bad ranges, bad ids).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension violations. Messages carry the offending dims.
struct DimensionError : InputError {
    using InputError::InputError;
};

// Non-finite values where finite arithmetic was required (overflow, divergence).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and format problems.
struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace onn
