#pragma once

#include <stdexcept>
#include <string>

namespace sameside {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kSchema,
  kDuplicateId,
  kLabel,
  kEncode,
  kEmptyData,
  kNumeric,
  kFormat,
  kExperiment,
};

const char* error_code_name(ErrorCode code);

// All recoverable failures in the toolkit are reported as Error; the C API
// maps the code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sameside
