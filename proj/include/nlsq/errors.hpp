#pragma once

#include <stdexcept>
#include <string>

namespace nlsq {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

/// A state or operator does not fit the truncated Fock space accurately.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. z = 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Inputs violate a structural invariant (non-unitary basis, bad grid, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlsq
