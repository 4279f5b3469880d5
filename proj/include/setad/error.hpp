#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace setad {

// Closed set of failure categories surfaced by the CLI.
enum class ErrorKind { io, parse, config, shape, train, score };

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::config: return "config";
    case ErrorKind::shape: return "shape";
    case ErrorKind::train: return "train";
    case ErrorKind::score: return "score";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace setad
