#include "sameside/error.hpp"

namespace sameside {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kDuplicateId: return "duplicate id";
    case ErrorCode::kLabel: return "label error";
    case ErrorCode::kEncode: return "encode error";
    case ErrorCode::kEmptyData: return "empty data";
    case ErrorCode::kNumeric: return "numeric error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kExperiment: return "experiment failure";
  }
  return "unknown error";
}

}  // namespace sameside
