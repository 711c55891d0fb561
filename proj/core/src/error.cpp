#include "qaexpert/error.hpp"

namespace qaexpert {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kPrecondition: return "precondition_failed";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kDependencyMissing: return "dependency_missing";
    case ErrorCode::kUnauthorized: return "unauthorized";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace qaexpert
