#pragma once

#include <stdexcept>
#include <string>

namespace mlfas {

/// Base for every error raised by the library. `kind()` is a short stable tag
/// used by the CLI for structured diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message);
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Dimension or layout mismatch.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

/// Non-finite parameters or losses during training.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message) : Error("divergence", message) {}
};

/// Linear solver failed to reach tolerance.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& message) : Error("solver", message) {}
};

/// Invalid user-supplied configuration or argument.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Filesystem failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace mlfas
