#pragma once

#include <stdexcept>
#include <string>

namespace mindtrace {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A referenced input is missing or unreadable.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-convergence, loss of definiteness, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mindtrace
