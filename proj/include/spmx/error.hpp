#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spmx {

enum class ErrorKind {
  InvalidArgument,
  InvalidConfig,
  MalformedSpectrum,
  NoOverlap,
  ShapeMismatch,
  InvalidSpec,
  InvalidPartition,
  DegenerateClustering,
  ZeroPrediction,
  DegenerateGT,
  DegenerateInput,
  TooSmall,
  TooFewPatches,
  IoError,
  HeaderMismatch,
  BadMagic,
  TruncatedPayload,
  UnsupportedDtype,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so that the C API and
// CLI can map it onto a stable status / exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace spmx
