#pragma once

#include <stdexcept>
#include <string>

namespace lta {

// Machine-readable failure category. The CLI prints it as the first token of
// the error line, so the strings are part of the external interface.
enum class ErrorCode {
  kEmptyDataset,
  kUnknownLabel,
  kNonContiguous,
  kMalformed,
  kFeatureShape,
  kInvalidArgument,
  kShapeMismatch,
  kModelMismatch,
  kCorruptCheckpoint,
  kMissingFile,
  kOutputExists,
  kEmptyEvaluation,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace lta
