#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qe {

enum class ErrorKind {
  Config,
  Io,
  Truncation,
  Range,
  Tiling,
  Assembly,
  Shape,
  Format,
  Corruption,
  Consistency,
  Precondition,
  Metric,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Range: return "range";
    case ErrorKind::Tiling: return "tiling";
    case ErrorKind::Assembly: return "assembly";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Format: return "format";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Metric: return "metric";
  }
  return "unknown";
}

// Process exit code per error class: 2 config, 3 I/O, 4 format, 5 consistency, 6 metric.
constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Precondition:
      return 2;
    case ErrorKind::Io:
      return 3;
    case ErrorKind::Truncation:
    case ErrorKind::Range:
    case ErrorKind::Tiling:
    case ErrorKind::Format:
    case ErrorKind::Corruption:
      return 4;
    case ErrorKind::Assembly:
    case ErrorKind::Shape:
    case ErrorKind::Consistency:
      return 5;
    case ErrorKind::Metric:
      return 6;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the "<kind> error: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace qe
