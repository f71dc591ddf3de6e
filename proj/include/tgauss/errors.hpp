#pragma once

#include <stdexcept>
#include <string>

namespace tgauss {

/// Base of every error raised by the library.
///
/// Two families exist: domain errors (invalid parameters, degenerate data,
/// indefinite matrices) and format errors (malformed files, I/O failures).
/// The CLI maps them to exit codes 1 and 2 respectively.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_format_error() const noexcept { return false; }
};

// dimension / mode / length mismatches
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

// zero tensors or matrices where a direction must be extracted
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// sigma^2 == 0 where a density is required
class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

class InvalidParameters : public Error {
 public:
  using Error::Error;
};

// dense assembly above the supported size
class CapacityError : public Error {
 public:
  using Error::Error;
};

// samples that do not lie on the Cartesian product of the grid
class CoherenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
  bool is_format_error() const noexcept override { return true; }
};

}  // namespace tgauss
