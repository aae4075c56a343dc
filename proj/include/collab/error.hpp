#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace collab {

enum class ErrorCode {
  InvalidParam,
  NonIntegerNStar,
  EvenInput,
  NonpositiveArgument,
  NoSignChange,
  MaxIterations,
  QuadratureFailure,
  SubsetTooLarge,
  EmptyInput,
  DimensionMismatch,
  EmptySubmission,
  InvalidDistribution,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::NonIntegerNStar: return "NonIntegerNStar";
    case ErrorCode::EvenInput: return "EvenInput";
    case ErrorCode::NonpositiveArgument: return "NonpositiveArgument";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::SubsetTooLarge: return "SubsetTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySubmission: return "EmptySubmission";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace collab
