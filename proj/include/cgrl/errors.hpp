#pragma once

#include <stdexcept>
#include <string>

namespace cgrl {

/// Raised when a caller passes arguments that violate an operation's preconditions
/// (dimension mismatch, unknown node, empty input, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computed quantity (gradient, loss, metric) was NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An option was invoked outside its starting set.
class OptionUnavailable : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cgrl
