#pragma once

#include <stdexcept>
#include <string>

namespace kpcert {

// Raised when an input (instance, network, image, option) violates its
// structural contract. The CLI maps it to exit code 64.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a solver or a decoded assignment cannot be trusted numerically.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace kpcert
