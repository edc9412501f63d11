#include "emoint/error.hpp"

namespace emoint {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "E_PARSE";
    case ErrorCode::kIo: return "E_IO";
    case ErrorCode::kShape: return "E_SHAPE";
    case ErrorCode::kFormat: return "E_FORMAT";
    case ErrorCode::kConfig: return "E_CONFIG";
    case ErrorCode::kNumeric: return "E_NUMERIC";
    case ErrorCode::kInput: return "E_INPUT";
  }
  return "E_UNKNOWN";
}

int exit_status(ErrorCode code) {
  return 10 + static_cast<int>(code);
}

}  // namespace emoint
