#pragma once

#include <stdexcept>
#include <string>

namespace awemixer {

/// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data violates an operation's precondition (odd length, empty array, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external data (CSV cells, checkpoint bytes).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data source cannot be read or has the wrong layout.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered during training or a finite-difference check.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke an API contract (e.g. optimizer stepped without gradients).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace awemixer
