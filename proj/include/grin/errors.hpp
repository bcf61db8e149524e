#pragma once

#include <stdexcept>
#include <string>

namespace grin {

// Base class for all library errors.
struct GrinError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/matrix dimensions.
struct ShapeError : GrinError {
  using GrinError::GrinError;
};

// Operation called in the wrong train/infer mode.
struct ModeError : GrinError {
  using GrinError::GrinError;
};

// Tape used out of order (e.g. backward without a forward pass).
struct StateError : GrinError {
  using GrinError::GrinError;
};

// Malformed checkpoint or other serialized file.
struct FormatError : GrinError {
  using GrinError::GrinError;
};

// Training aborted (non-finite loss or gradient).
struct TrainError : GrinError {
  int step = -1;
  TrainError(const std::string& msg, int at_step) : GrinError(msg), step(at_step) {}
};

// A public operation produced or received a non-finite value.
struct NumericError : GrinError {
  using GrinError::GrinError;
};

// File-system / image decoding failures.
struct IoError : GrinError {
  using GrinError::GrinError;
};

}  // namespace grin
