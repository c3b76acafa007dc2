#pragma once

#include <stdexcept>
#include <string>

namespace raar {

// Stable error kinds surfaced by the library. Each kind maps 1:1 to a
// failure mode named in its module's contract; the CLI serializes the
// kind name into the machine-readable error JSON.
enum class ErrorCode {
  kDimensionMismatch,
  kDegenerateVector,
  kDanglingReference,
  kDuplicateRecord,
  kInsufficientPool,
  kIncompleteEmbedding,
  kEmptyInput,
  kDegenerateStatistics,
  kUndersizedSample,
  kInvalidArgument,
  kMissingSlot,
  kUnknownSlot,
  kTemplateMissing,
  kParseError,
  kSchemaError,
  kEndpointUnreachable,
  kRemoteError,
  kEmptyResponse,
  kExhaustedScript,
  kVerifierAmbiguous,
  kAgentFailure,
  kAlignmentError,
  kConfigError,
  kIoError,
  kLockHeld,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace raar
