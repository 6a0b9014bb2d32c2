#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedrad {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  EmptyMask,
  DegenerateIntensity,
  InvalidSpec,
  InvalidBinWidth,
  InsufficientSamples,
  TooFewSamples,
  RankDeficient,
  NonFiniteLoss,
  UnknownLabelMapping,
  Format,
  Io,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateIntensity: return "DegenerateIntensity";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidBinWidth: return "InvalidBinWidth";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UnknownLabelMapping: return "UnknownLabelMapping";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

// Every library failure is reported through this type; code() identifies the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace fedrad
