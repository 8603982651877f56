#pragma once

#include <stdexcept>
#include <string>

namespace nodal {

enum class ErrorKind {
  OutOfDomain,
  DegenerateBall,
  DegenerateField,
  GridMismatch,
  CoefficientValidation,
  Convergence,
  Precondition,
  EmptyZeroSet,
  EmptyIntersection,
  ZeroDenominator,
  InsufficientData,
  InclusionViolation,
  EqualityViolation,
  CorkscrewFailure,
  ChainStall,
  PolePlacement,
  Config,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::DegenerateBall: return "degenerate-ball";
    case ErrorKind::DegenerateField: return "degenerate-field";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::CoefficientValidation: return "coefficient-validation";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::EmptyZeroSet: return "empty-zero-set";
    case ErrorKind::EmptyIntersection: return "empty-intersection";
    case ErrorKind::ZeroDenominator: return "zero-denominator";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::InclusionViolation: return "inclusion-violation";
    case ErrorKind::EqualityViolation: return "equality-violation";
    case ErrorKind::CorkscrewFailure: return "corkscrew-failure";
    case ErrorKind::ChainStall: return "chain-stall";
    case ErrorKind::PolePlacement: return "pole-placement";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nodal
