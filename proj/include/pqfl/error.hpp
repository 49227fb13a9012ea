#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pqfl {

enum class ErrorCode {
  kUnsupportedScheme,
  kAdapterFailure,
  kStrictModeViolation,
  kNonFiniteValue,
  kMalformedPayload,
  kMalformedEnvelope,
  kTooFewSamples,
  kDimensionMismatch,
  kNonFiniteGradient,
  kEmptyVerifiedSet,
  kRoundMismatch,
  kSignatureInvalid,
  kReplayDetected,
  kWrongSender,
  kConnectionFailed,
  kFrameTooLarge,
  kPeerClosed,
  kDecodeError,
  kSinkUnavailable,
  kIoError,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pqfl
