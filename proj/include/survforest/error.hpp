#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace survforest {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (empty node, bad parameter).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Covariate vector length does not match the model or dataset dimension.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. Carries the 1-based line number when known (0 otherwise).
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Run configuration failed schema or range validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A serialized model is truncated, has the wrong version or violates an invariant.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

/// A numerical oracle is undefined on the requested domain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace survforest
