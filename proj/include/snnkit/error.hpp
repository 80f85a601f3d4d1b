#pragma once

#include <stdexcept>
#include <string>

namespace snnkit {

// Shape/contract violations: caller passed tensors that break an op's
// preconditions. Always a programming error, never a data error.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Bad configuration: unknown key, unparsable value, violated invariant.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (AER parse failures, missing datasets).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or other numerical breakdown during optimization.
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace snnkit
