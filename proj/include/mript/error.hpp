#pragma once

#include <stdexcept>
#include <string>

namespace mript {

// Numeric values are stable: they are mirrored by mript_status in mript.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDimensionMismatch = 2,
  kIo = 3,
  kBadMagic = 4,
  kTruncated = 5,
  kVersionMismatch = 6,
  kCorruptHeader = 7,
  kMissingTensor = 8,
  kNonFinite = 9,
  kInfeasible = 10,
  kUnsupported = 11,
  kUnknownKey = 12,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mript
