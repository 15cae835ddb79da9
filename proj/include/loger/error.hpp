#pragma once

#include <stdexcept>
#include <string>

namespace loger {

// Numeric values are shared with the C API (loger_status) and the CLI exit codes.
enum class ErrorCode : int {
  kOk = 0,
  kIo = 1,
  kParse = 2,
  kSchema = 3,
  kConfig = 4,
  kRange = 5,
  kType = 6,
  kNumeric = 7,
  kTraining = 8,
  kOracleScale = 9,
  kEmpty = 10,
  kGeneration = 11,
  kInternal = 12,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace loger
