#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace steer {

/// Categories of failures surfaced by the library. Callers that need to
/// react differently (the CLI maps these onto exit messages) switch on the
/// kind rather than parsing message text.
enum class ErrorKind {
  ShapeMismatch,
  InvalidArgument,
  NonFinite,
  MalformedHeader,
  DimensionOverflow,
  IoFailure,
  ConfigMissingFile,
  ConfigUnknownKey,
  ConfigParse,
  Geometry,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::MalformedHeader: return "malformed-header";
    case ErrorKind::DimensionOverflow: return "dimension-overflow";
    case ErrorKind::IoFailure: return "io-failure";
    case ErrorKind::ConfigMissingFile: return "config-missing-file";
    case ErrorKind::ConfigUnknownKey: return "config-unknown-key";
    case ErrorKind::ConfigParse: return "config-parse";
    case ErrorKind::Geometry: return "geometry";
  }
  return "unknown";
}

}  // namespace steer
