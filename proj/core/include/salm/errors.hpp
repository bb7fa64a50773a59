#pragma once

#include <stdexcept>
#include <string>

namespace salm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input that could not be parsed (JSON, dates, checkpoints...).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input that violates a documented contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (missing file, short read, write failure).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: out-of-range fields, missing required settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure: non-finite loss or gradient, degenerate embedding.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace salm
