#pragma once

#include <stdexcept>
#include <string>

namespace dwellcert {

// Root of every error raised by the library. Callers that only need a
// message can catch this; the CLI maps the concrete types to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite arithmetic or an iteration that failed to converge.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// The data matrix of some subsystem has no offset with independent columns.
class AssumptionViolatedError : public Error {
 public:
  AssumptionViolatedError(const std::string& what, double best_ratio, int best_offset)
      : Error(what), best_ratio_(best_ratio), best_offset_(best_offset) {}
  double best_ratio() const noexcept { return best_ratio_; }
  int best_offset() const noexcept { return best_offset_; }

 private:
  double best_ratio_;
  int best_offset_;
};

// No grid rate admits a certificate for every subsystem.
class InfeasibleGridError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dwellcert
