#ifndef FLOWBENCH_ERROR_H_
#define FLOWBENCH_ERROR_H_

#include <stdexcept>
#include <string>

namespace flowbench {

enum class ErrorCode {
  kInvalidLatitude,
  kInvalidLongitude,
  kTangentPlaneViolation,
  kNonFinite,
  kOutOfRange,
  kInvariantViolation,
  kParseError,
  kNonMonotoneTimestamp,
  kNoOverlap,
  kGeneratorUnavailable,
  kValidationFailed,
  kInvalidDt,
  kUnresolvedTarget,
  kUnsupportedTask,
  kTimeout,
  kEmptyChunk,
  kPolicyError,
  kFrameTooShort,
  kUnknownKind,
  kLengthMismatch,
  kRemoteTimeout,
  kMalformedChunk,
  kEmptyTrajectory,
  kTransportError,
  kConfigError,
  kIoError,
};

const char* ErrorCodeName(ErrorCode code);

// Single exception type for the library. `code()` identifies the failure
// class; `line()` is set for parse errors (1-based, 0 when not applicable).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail, int line = 0);

  ErrorCode code() const { return code_; }
  int line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  int line_;
  std::string detail_;
};

}  // namespace flowbench

#endif  // FLOWBENCH_ERROR_H_
