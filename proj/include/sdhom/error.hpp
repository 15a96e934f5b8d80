#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sdhom {

enum class ErrorCode {
  DomainEmpty,
  BoxTooSmall,
  GridMismatch,
  InvalidParameter,
  NotConvex,
  EmptyImage,
  GrowthViolation,
  SelfdualizationFailed,
  SolverStalled,
  NonMonotoneGraph,
  PrecomputeRequired,
  CoercivityMissing,
  ConfigError,
  ReportError,
};

inline const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Witness of a failed growth scan.
class GrowthViolationError : public Error {
 public:
  GrowthViolationError(const std::string& what, int region, Eigen::VectorXd xi, Eigen::VectorXd eta,
                       double violation)
      : Error(ErrorCode::GrowthViolation, what),
        region(region),
        xi(std::move(xi)),
        eta(std::move(eta)),
        violation(violation) {}

  int region;
  Eigen::VectorXd xi;
  Eigen::VectorXd eta;
  double violation;
};

class SolverStalledError : public Error {
 public:
  SolverStalledError(const std::string& what, std::vector<double> history)
      : Error(ErrorCode::SolverStalled, what), history(std::move(history)) {}

  std::vector<double> history;
};

// Configuration problems carry a JSON pointer to the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& what)
      : Error(ErrorCode::ConfigError, pointer + ": " + what), pointer(std::move(pointer)) {}

  std::string pointer;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DomainEmpty: return "DomainEmpty";
    case ErrorCode::BoxTooSmall: return "BoxTooSmall";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::NotConvex: return "NotConvex";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::GrowthViolation: return "GrowthViolation";
    case ErrorCode::SelfdualizationFailed: return "SelfdualizationFailed";
    case ErrorCode::SolverStalled: return "SolverStalled";
    case ErrorCode::NonMonotoneGraph: return "NonMonotoneGraph";
    case ErrorCode::PrecomputeRequired: return "PrecomputeRequired";
    case ErrorCode::CoercivityMissing: return "CoercivityMissing";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ReportError: return "ReportError";
  }
  return "Unknown";
}

}  // namespace sdhom
