#include "flowbench/error.h"

#include <fmt/format.h>

namespace flowbench {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidLatitude: return "InvalidLatitude";
    case ErrorCode::kInvalidLongitude: return "InvalidLongitude";
    case ErrorCode::kTangentPlaneViolation: return "TangentPlaneViolation";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kNonMonotoneTimestamp: return "NonMonotoneTimestamp";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kGeneratorUnavailable: return "GeneratorUnavailable";
    case ErrorCode::kValidationFailed: return "ValidationFailed";
    case ErrorCode::kInvalidDt: return "InvalidDt";
    case ErrorCode::kUnresolvedTarget: return "UnresolvedTarget";
    case ErrorCode::kUnsupportedTask: return "UnsupportedTask";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kEmptyChunk: return "EmptyChunk";
    case ErrorCode::kPolicyError: return "PolicyError";
    case ErrorCode::kFrameTooShort: return "FrameTooShort";
    case ErrorCode::kUnknownKind: return "UnknownKind";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kRemoteTimeout: return "RemoteTimeout";
    case ErrorCode::kMalformedChunk: return "MalformedChunk";
    case ErrorCode::kEmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string Compose(ErrorCode code, const std::string& detail, int line) {
  if (line > 0) return fmt::format("{}: line {}: {}", ErrorCodeName(code), line, detail);
  return fmt::format("{}: {}", ErrorCodeName(code), detail);
}

}  // namespace

Error::Error(ErrorCode code, const std::string& detail, int line)
    : std::runtime_error(Compose(code, detail, line)),
      code_(code),
      line_(line),
      detail_(detail) {}

}  // namespace flowbench
