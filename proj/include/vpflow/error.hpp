#pragma once

#include <stdexcept>
#include <string>

namespace vpflow {

/// Malformed or inconsistent inputs: bad dimensions, invalid distributions,
/// violated preconditions.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed in a way that should not happen for valid inputs.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace vpflow
