#pragma once

#include <stdexcept>
#include <string>

namespace lyapds {

// Malformed configuration: shape mismatch, bad layout, invalid constants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition (non-scalar loss, length mismatch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/inf produced or an exact division by zero.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files or datasets that violate their format contract.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rollout left the admissible box or training loss blew up.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lyapds
