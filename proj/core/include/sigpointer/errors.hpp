#pragma once

#include <stdexcept>
#include <string>

namespace sigpointer {

/// Shape or rank mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller-supplied data violates a precondition (too short, out of range, wrong format).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// On-disk data is missing, inconsistent, or unreadable.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or file written by an incompatible version/config.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A post-processing step (e.g. an external codec) failed.
class PostProcessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sigpointer
