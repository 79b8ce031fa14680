#pragma once

#include <stdexcept>
#include <string>

namespace genplan {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values (non-positive arc length, non-finite curvature, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Curve fitting could not start (degenerate input path).
class FitError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or version-mismatched artifact files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown keys, wrong types, missing input files,
// mismatched model/cache pairs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training diverged or another runtime failure that is not a config problem.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace genplan
