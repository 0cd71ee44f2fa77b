#pragma once

#include <stdexcept>
#include <string>

namespace casm {

// Bad user-supplied configuration or arguments (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: factorization breakdown, non-finite values, empty
// sampling slices and the like (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace casm
