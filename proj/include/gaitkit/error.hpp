#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gaitkit {

enum class ErrorCode {
  InvalidArgument,
  DegenerateTracklet,
  NonMonotonicFrames,
  TooShort,
  EmptySequence,
  InvalidGraph,
  ShapeMismatch,
  NoPositive,
  InsufficientIdentities,
  EmptyGallery,
  NonFiniteLoss,
  ParseError,
  EmptyInput,
  ConfigError,
  CheckpointError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateTracklet: return "DegenerateTracklet";
    case ErrorCode::NonMonotonicFrames: return "NonMonotonicFrames";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NoPositive: return "NoPositive";
    case ErrorCode::InsufficientIdentities: return "InsufficientIdentities";
    case ErrorCode::EmptyGallery: return "EmptyGallery";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CheckpointError: return "CheckpointError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace gaitkit
