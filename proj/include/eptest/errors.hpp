#pragma once

#include <stdexcept>
#include <string>

namespace eptest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Input that makes the requested quantity undefined (all-zero vectors, zero variance).
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

/// OLS requested on a design whose Gram matrix is singular.
class NotIdentifiableError : public Error {
public:
  using Error::Error;
};

class OutOfRangeError : public Error {
public:
  using Error::Error;
};

class OptimizationError : public Error {
public:
  using Error::Error;
};

/// Non-finite values appeared inside an iterative solver.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Broken internal invariant (a bug, not a user error).
class InvariantError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based row and column when known.
class ParseError : public Error {
public:
  ParseError(const std::string& what, long row = -1, long column = -1)
      : Error(what), row_(row), column_(column) {}
  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

private:
  long row_;
  long column_;
};

/// The variance-component estimate landed on sigma^2 = 0.
class BoundaryError : public Error {
public:
  using Error::Error;
};

}  // namespace eptest
