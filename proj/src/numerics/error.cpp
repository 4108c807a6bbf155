#include "mript/error.hpp"

namespace mript {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kTruncated: return "truncated data";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kCorruptHeader: return "corrupt header";
    case ErrorCode::kMissingTensor: return "missing tensor";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kInfeasible: return "infeasible specification";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kUnknownKey: return "unknown key";
  }
  return "unknown error";
}

}  // namespace mript
