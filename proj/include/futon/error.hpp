#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace futon {

enum class ErrorCode {
  io,
  not_found,
  no_candidates,
  unknown_pattern,
  invalid_argument,
  closed,
  corrupt_trace,
  schema,
  busy,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when a trace cannot be read past some point. last_good_seq is -1
// when not even the first line was usable.
class TraceCorrupt : public Error {
 public:
  TraceCorrupt(std::int64_t last_good_seq, const std::string& message)
      : Error(ErrorCode::corrupt_trace, message), last_good_seq_(last_good_seq) {}

  std::int64_t last_good_seq() const noexcept { return last_good_seq_; }

 private:
  std::int64_t last_good_seq_;
};

}  // namespace futon
