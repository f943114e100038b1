#pragma once

#include <stdexcept>
#include <string>

namespace mrte {

// Bad inputs: malformed files, invalid configs, graphs violating invariants.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: caller broke a documented precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Non-finite values where finite ones are required (gradients, losses).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace mrte
