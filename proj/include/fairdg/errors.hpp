#pragma once

#include <stdexcept>
#include <string>

namespace fairdg {

// Malformed input: shape mismatch, non-normalized distribution, bad ids.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Conditioning on an event of zero mass, or a partition with no usable cell.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (unsorted front, wrong loss kind).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Unusable configuration value (e.g. a loss cap too small for |Y|).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fairdg
