#pragma once

#include <stdexcept>
#include <string>

namespace icfenc {

enum class ErrorKind {
  validation,  // bad arguments or malformed input content
  alignment,   // feature/response id sets cannot be reconciled
  parse,       // malformed file syntax
  unsupported_version,
  io,
  internal,
};

// FMAT container failures get their own codes so callers can tell them apart.
enum class FormatCode {
  none,
  bad_magic,
  unsupported_version,
  truncated_header,
  bad_header,
  ids_length,
  payload_length,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, FormatCode code = FormatCode::none)
      : std::runtime_error(what), kind_(kind), code_(code) {}

  ErrorKind kind() const noexcept { return kind_; }
  FormatCode code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  FormatCode code_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::parse: return "parse";
    case ErrorKind::unsupported_version: return "unsupported_version";
    case ErrorKind::io: return "io";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

inline const char* to_string(FormatCode c) {
  switch (c) {
    case FormatCode::none: return "none";
    case FormatCode::bad_magic: return "bad_magic";
    case FormatCode::unsupported_version: return "unsupported_version";
    case FormatCode::truncated_header: return "truncated_header";
    case FormatCode::bad_header: return "bad_header";
    case FormatCode::ids_length: return "ids_length";
    case FormatCode::payload_length: return "payload_length";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace icfenc
