#pragma once

#include <stdexcept>
#include <string>

namespace drivatt {

// Violated precondition on an argument (bad state, bad config value, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Two inputs that must agree in shape do not.
class ShapeMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A metric whose value is mathematically undefined for the given input
// (e.g. Pearson correlation against a constant map).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed, truncated or incompatible file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncatedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drivatt
