#pragma once

#include <stdexcept>
#include <string>

namespace deepboot {

/// A precondition of a public operation was violated (bad dimensions,
/// out-of-range hyperparameters, malformed input).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure produced a non-finite value or failed to make
/// progress; the message names the stage and index where it happened.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace deepboot
