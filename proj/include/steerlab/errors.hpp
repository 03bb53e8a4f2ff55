#pragma once

#include <stdexcept>
#include <string>

namespace steerlab {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, wrong shapes.
// The CLI maps these to exit status 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingFeatureError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IncompleteTrialError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PlanError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AssemblyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ProtocolError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SingularDesignError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IncomparableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Amplitude solver: K(a) decreased inside the bracket.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

class UnreachableError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace steerlab
