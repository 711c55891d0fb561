#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qaexpert {

// Stable machine-readable codes. The CLI maps them to exit statuses and the
// annotation service to HTTP statuses, so values must not be renumbered.
enum class ErrorCode {
  kInvalidArgument = 1,
  kNotFound = 2,
  kPrecondition = 3,
  kConflict = 4,
  kIo = 5,
  kDependencyMissing = 6,
  kUnauthorized = 7,
  kInternal = 8,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace qaexpert
