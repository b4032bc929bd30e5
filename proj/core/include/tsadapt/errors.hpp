#pragma once

#include <stdexcept>
#include <string>

namespace tsadapt {

/// Shape or dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

/// Non-finite value produced where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file or spec.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tsadapt
