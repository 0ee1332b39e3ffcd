#pragma once

#include <stdexcept>
#include <string>

namespace fedqp {

/// Raised when two operands disagree on layer names, order or lengths.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an input violates a documented precondition or range.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what)
      : std::invalid_argument(what) {}
};

}  // namespace fedqp
