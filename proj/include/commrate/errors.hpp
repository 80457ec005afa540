#pragma once

#include <stdexcept>
#include <string>

namespace commrate {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A representable input whose result would overflow or degenerate.
class RangeError : public Error {
 public:
  using Error::Error;
};

// An iterative method exhausted its budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace commrate
