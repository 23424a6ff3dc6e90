#pragma once

#include <stdexcept>

namespace sfe {

// Malformed or precondition-violating input (CLI maps this to exit code 2).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Well-formed input that is infeasible or outside the supported regime
// (CLI maps this to exit code 1).
struct Refusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sfe
