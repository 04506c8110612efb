#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hail {

enum class ErrorCode {
  kInvalidArgument,
  kFormatError,
  kPositionOutOfRange,
  kUnsupportedKeyType,
  kNotSorted,
  kInsufficientDatanodes,
  kUploadFailed,
  kUnknownBlock,
  kAlreadyExists,
  kSyntaxError,
  kUnknownAttribute,
  kNoAliveNodes,
  kReadFailed,
  kJobFailed,
  kScenarioFailed,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch without string matching.
class HailError : public std::runtime_error {
 public:
  HailError(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Throw(ErrorCode code, const std::string& message);

}  // namespace hail
