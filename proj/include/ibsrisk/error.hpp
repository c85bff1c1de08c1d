#pragma once

#include <stdexcept>
#include <string>

namespace ibsrisk {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Result not representable as a finite, normal double.
/// Callers can retry through the log-space entry points.
class RangeError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// An integral or series that is infinite for the given inputs
/// (e.g. a loss term growing like x^b with b >= r on an unbounded segment).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical procedure stopped before reaching its target accuracy.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved_error)
      : std::runtime_error(what), achieved_error_(achieved_error) {}

  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// The derivative of the asymptotic risk never changes sign: there is no
/// minimizing omega in (0, inf).
class NoOptimumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ibsrisk
