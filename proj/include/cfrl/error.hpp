#pragma once

#include <stdexcept>
#include <string>

namespace cfrl {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidAction,
  kEmptyPeriod,
  kMalformedLog,
  kInsufficientData,
  kClusteringDegenerate,
  kShape,
  kDivergence,
  kInvalidObservation,
  kCollisionState,
  kLengthMismatch,
  kZeroDenominator,
  kIo,
  kFormat,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable error category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidAction: return "invalid-action";
    case ErrorCode::kEmptyPeriod: return "empty-period";
    case ErrorCode::kMalformedLog: return "malformed-log";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kClusteringDegenerate: return "clustering-degenerate";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kInvalidObservation: return "invalid-observation";
    case ErrorCode::kCollisionState: return "collision-state";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kZeroDenominator: return "zero-denominator";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
  }
  return "unknown";
}

}  // namespace cfrl
