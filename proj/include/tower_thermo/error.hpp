#pragma once

#include <stdexcept>
#include <string>

namespace tower_thermo {

// Bad arguments, malformed descriptors, symbols outside the alphabet.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematical preconditions that cannot be met (divergent tails, no bracket).
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Enumeration or iteration budgets exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative methods that failed to converge or collapsed numerically.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TT_REQUIRE(cond, ExType, msg)      \
  do {                                     \
    if (!(cond)) throw ExType(std::string(msg)); \
  } while (0)

}  // namespace tower_thermo
