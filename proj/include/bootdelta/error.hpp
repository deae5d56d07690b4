#pragma once

#include <stdexcept>
#include <string>

namespace bootdelta {

enum class ErrorCode {
  InvalidArgument,
  NonCDF,
  Divergent,
  IllConditioned,
  NotApplicable,
  Unavailable,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonCDF: return "NonCDF";
    case ErrorCode::Divergent: return "Divergent";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::Unavailable: return "Unavailable";
  }
  return "Unknown";
}

// All library failures are reported through this type; the code lets callers
// (the experiment harness in particular) record the failure kind without
// string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace bootdelta
