#include "hail/error.h"

namespace hail {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kFormatError: return "FORMAT_ERROR";
    case ErrorCode::kPositionOutOfRange: return "POSITION_OUT_OF_RANGE";
    case ErrorCode::kUnsupportedKeyType: return "UNSUPPORTED_KEY_TYPE";
    case ErrorCode::kNotSorted: return "NOT_SORTED";
    case ErrorCode::kInsufficientDatanodes: return "INSUFFICIENT_DATANODES";
    case ErrorCode::kUploadFailed: return "UPLOAD_FAILED";
    case ErrorCode::kUnknownBlock: return "UNKNOWN_BLOCK";
    case ErrorCode::kAlreadyExists: return "ALREADY_EXISTS";
    case ErrorCode::kSyntaxError: return "SYNTAX_ERROR";
    case ErrorCode::kUnknownAttribute: return "UNKNOWN_ATTRIBUTE";
    case ErrorCode::kNoAliveNodes: return "NO_ALIVE_NODES";
    case ErrorCode::kReadFailed: return "READ_FAILED";
    case ErrorCode::kJobFailed: return "JOB_FAILED";
    case ErrorCode::kScenarioFailed: return "SCENARIO_FAILED";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

HailError::HailError(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

void Throw(ErrorCode code, const std::string& message) {
  throw HailError(code, message);
}

}  // namespace hail
