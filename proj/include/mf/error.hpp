#pragma once

#include <stdexcept>
#include <string>

namespace mf {

// Error taxonomy. The CLI maps these onto exit codes (config 2, data 3,
// numeric 4); everything else is an internal failure.

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a materialized attention score matrix would exceed the
// configured element budget.
class CapacityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mf
