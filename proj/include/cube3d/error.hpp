#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cube3d {

// Every failure surfaced by the library is a cube3d::Error carrying one of
// these kinds; the CLI maps them onto exit codes.
enum class ErrorKind {
  invalid_shape,
  shape,
  axis,
  format,
  config,
  state,
  label,
  validation,
  degenerate_batch,
  divergence,
  conflict,
  missing_frame,
  too_short,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_shape: return "invalid-shape";
    case ErrorKind::shape: return "shape";
    case ErrorKind::axis: return "axis";
    case ErrorKind::format: return "format";
    case ErrorKind::config: return "config";
    case ErrorKind::state: return "state";
    case ErrorKind::label: return "label";
    case ErrorKind::validation: return "validation";
    case ErrorKind::degenerate_batch: return "degenerate-batch";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::missing_frame: return "missing-frame";
    case ErrorKind::too_short: return "too-short";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace cube3d
