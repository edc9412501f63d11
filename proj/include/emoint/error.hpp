#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emoint {

// Stable identifiers; the CLI prints them verbatim and maps each to an exit code.
enum class ErrorCode {
  kParse,
  kIo,
  kShape,
  kFormat,
  kConfig,
  kNumeric,
  kInput,
};

std::string_view error_code_name(ErrorCode code);
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace emoint
