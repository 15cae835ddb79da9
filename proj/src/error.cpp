#include "loger/error.hpp"

namespace loger {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kType: return "type error";
    case ErrorCode::kNumeric: return "numeric error";
    case ErrorCode::kTraining: return "training error";
    case ErrorCode::kOracleScale: return "oracle-scale error";
    case ErrorCode::kEmpty: return "empty input";
    case ErrorCode::kGeneration: return "generation error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace loger
