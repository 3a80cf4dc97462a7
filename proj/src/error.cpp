#include "futon/error.hpp"

namespace futon {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io:
      return "io";
    case ErrorCode::not_found:
      return "not-found";
    case ErrorCode::no_candidates:
      return "no-candidates";
    case ErrorCode::unknown_pattern:
      return "unknown-pattern";
    case ErrorCode::invalid_argument:
      return "invalid-argument";
    case ErrorCode::closed:
      return "closed";
    case ErrorCode::corrupt_trace:
      return "corrupt-trace";
    case ErrorCode::schema:
      return "schema";
    case ErrorCode::busy:
      return "busy";
  }
  return "io";
}

}  // namespace futon
