#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vibid {

enum class ErrorCode {
  InvalidArgument,
  SignalTooShort,
  NonFinite,
  DimensionMismatch,
  RankDeficient,
  Singular,
  NotPositiveDefinite,
  UnstableCoefficients,
  GridMismatch,
  NonPositiveBin,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::SignalTooShort: return "signal_too_short";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::RankDeficient: return "rank_deficient";
    case ErrorCode::Singular: return "singular";
    case ErrorCode::NotPositiveDefinite: return "not_positive_definite";
    case ErrorCode::UnstableCoefficients: return "unstable_coefficients";
    case ErrorCode::GridMismatch: return "grid_mismatch";
    case ErrorCode::NonPositiveBin: return "non_positive_bin";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

/// Coarse classification used for process exit codes.
enum class ErrorCategory { Config, Io, Numerical };

inline ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::Parse:
      return ErrorCategory::Io;
    case ErrorCode::RankDeficient:
    case ErrorCode::Singular:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NonPositiveBin:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Config;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace vibid
