#pragma once

#include <stdexcept>
#include <string>

namespace kwnav {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is structurally wrong: bad file contents, mismatched list lengths,
/// out-of-range interpolation times, unordered streams. CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Composition or application attempted across incompatible frames.
class FrameMismatchError : public InputError {
 public:
  using InputError::InputError;
};

/// Timestamps not strictly increasing where the contract requires it.
class OrderingError : public InputError {
 public:
  using InputError::InputError;
};

/// File could not be parsed; carries a line/column diagnostic in the message.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

/// Numerically degenerate input: ill-conditioned calibration, collinear
/// point sets, zero-variance groups. CLI exit code 3.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Too few samples/points for the operation to be defined.
class InsufficientDataError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// Two correspondence assignments fit equally well; caller must not guess.
class AmbiguityError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// Marker correspondence failed; navigation should treat the body as
/// untracked for this frame (feeds the dropout gate).
class TrackingFailure : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

/// Tool line is near-parallel to a deviation plane; no usable intersection.
class NoIntersectionError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

}  // namespace kwnav
