#pragma once

#include <stdexcept>
#include <string>

namespace pptex {

// Error categories map onto CLI exit codes: ConfigError/InputError -> 1,
// IoError -> 2, NumericError -> 3. ContractViolation is a caller bug.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace detail
}  // namespace pptex
