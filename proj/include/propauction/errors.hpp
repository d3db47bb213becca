#pragma once

#include <stdexcept>
#include <string>

namespace propauction {

/// Input outside the mathematical domain of an operation (e.g. a share outside [0,1]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller asked for something the operation does not support (wrong scheme, grid too large, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on the data does not hold (e.g. an all-zero bid column where
/// the formula divides by the column total).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative numeric routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal postcondition was violated. Never expected to fire.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace propauction
