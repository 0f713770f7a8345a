#pragma once

#include <stdexcept>
#include <string>

namespace vggft {

// Error categories carried across the C API boundary as status codes.
enum class ErrorCode {
  Dimension = 1,  // shape mismatch between tensors
  Config    = 2,  // invalid parameter or option value
  Input     = 3,  // bad user data (labels, splits, dataset layout)
  State     = 4,  // operation out of order (backward without forward, ...)
  Weights   = 5,  // weight file does not match the graph
  Decode    = 6,  // unreadable or unsupported image file
  Io        = 7,  // filesystem failure
  Diverged  = 8,  // NaN loss during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::Config:    return "config";
    case ErrorCode::Input:     return "input";
    case ErrorCode::State:     return "state";
    case ErrorCode::Weights:   return "weights";
    case ErrorCode::Decode:    return "decode";
    case ErrorCode::Io:        return "io";
    case ErrorCode::Diverged:  return "diverged";
  }
  return "unknown";
}

}  // namespace vggft
