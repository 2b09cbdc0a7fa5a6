#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qlds {

enum class ErrorKind {
  SingularMatrix,
  NoConvergence,
  NonConvex,
  InvalidRegime,
  DegenerateTheory,
  AllPointsInvalid,
  DivergenceDetected,
  ParseError,
  LabelDomainError,
  InsufficientSamples,
  MissingTruth,
  DimensionMismatch,
  InvalidArgument,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NonConvex: return "NonConvex";
    case ErrorKind::InvalidRegime: return "InvalidRegime";
    case ErrorKind::DegenerateTheory: return "DegenerateTheory";
    case ErrorKind::AllPointsInvalid: return "AllPointsInvalid";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::LabelDomainError: return "LabelDomainError";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::MissingTruth: return "MissingTruth";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Process exit code for an error kind: 2 validation, 3 numerical, 4 I/O.
inline constexpr int exit_code(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::SingularMatrix:
    case ErrorKind::NoConvergence:
    case ErrorKind::NonConvex:
    case ErrorKind::InvalidRegime:
    case ErrorKind::DegenerateTheory:
    case ErrorKind::AllPointsInvalid:
    case ErrorKind::DivergenceDetected:
      return 3;
    case ErrorKind::IoError:
      return 4;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace qlds
