#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dflag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax error or unknown identifier in an expression; column is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t column)
      : Error(what + " (column " + std::to_string(column) + ")"), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// Evaluation hit a pole or left the real domain of a function.
class SingularEvaluation : public Error {
 public:
  SingularEvaluation(const std::string& what, std::string subexpression)
      : Error(what + ": " + subexpression), subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Shape or index mismatch between bundle objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure in the flag / integration pipeline.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A requested point is outside the regular set.
class IrregularPoint : public Error {
 public:
  using Error::Error;
};

/// A fiber vector that is not in the requested subbundle.
class NotInSubbundle : public Error {
 public:
  using Error::Error;
};

}  // namespace dflag
