#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gamma_elliptic {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter point lies outside the chart's parameter box.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The chart Jacobian lost rank (smallest singular value below threshold).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// A required derivative (e.g. a field Hessian) is not available.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Coefficients fail ellipticity or other admissibility checks.
class CoefficientError : public Error {
 public:
  using Error::Error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// Both reaction conditions were found violated and no override was given.
class WellPosednessError : public Error {
 public:
  using Error::Error;
};

class ManufacturingError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " (at position " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace gamma_elliptic
