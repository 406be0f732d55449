#pragma once

#include <stdexcept>
#include <string>

namespace voxclick {

// Caller broke a documented precondition (shape mismatch, duplicate coords...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or unusable user data (non-finite points, unknown instance...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad magic, version, truncation in one of the binary formats.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced by an op, or a training run that diverged.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace voxclick
