#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drm {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error("parse_error", line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A parameter or configuration outside its valid domain.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation_error", message) {}
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension_error", message) {}
};

/// Factorization failure or non-finite values produced during a solve.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message) : Error("numerical_error", message) {}
};

/// Filesystem and model-file problems.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

/// A model directory that is missing pieces or fails its integrity check.
class LoadError : public Error {
 public:
  explicit LoadError(const std::string& message) : Error("load_error", message) {}
};

}  // namespace drm
