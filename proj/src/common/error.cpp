#include "pqfl/error.hpp"

namespace pqfl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedScheme: return "UnsupportedScheme";
    case ErrorCode::kAdapterFailure: return "AdapterFailure";
    case ErrorCode::kStrictModeViolation: return "StrictModeViolation";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kMalformedPayload: return "MalformedPayload";
    case ErrorCode::kMalformedEnvelope: return "MalformedEnvelope";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kEmptyVerifiedSet: return "EmptyVerifiedSet";
    case ErrorCode::kRoundMismatch: return "RoundMismatch";
    case ErrorCode::kSignatureInvalid: return "SignatureInvalid";
    case ErrorCode::kReplayDetected: return "ReplayDetected";
    case ErrorCode::kWrongSender: return "WrongSender";
    case ErrorCode::kConnectionFailed: return "ConnectionFailed";
    case ErrorCode::kFrameTooLarge: return "FrameTooLarge";
    case ErrorCode::kPeerClosed: return "PeerClosed";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kSinkUnavailable: return "SinkUnavailable";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

}  // namespace pqfl
