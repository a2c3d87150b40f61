#pragma once

#include <stdexcept>
#include <string>

namespace edrvfl {

// Invalid user input: malformed config, bad CSV cell, impossible sizing.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown past tolerance: failed factorization, non-finite state.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace edrvfl
