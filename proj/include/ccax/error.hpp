#pragma once

#include <stdexcept>
#include <string>

namespace ccax {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

/// Malformed input: bad magic, unparsable text, non-finite values, bad tokens.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

/// Shapes that do not agree with each other or with a header.
class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

/// Data that is numerically degenerate for the requested fit.
class SingularInputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "singular"; }
};

/// A parameter outside its admissible range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument"; }
};

}  // namespace ccax
