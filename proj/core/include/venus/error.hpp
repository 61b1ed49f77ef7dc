#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace venus {

/// Base of every error thrown by the library. `kind()` is a short stable tag
/// used in logs, failure manifests and HTTP error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed input text. `offset` is a byte offset for JSON input and a
/// 1-based line number for line-oriented input (see `is_line`).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset, bool is_line = false)
      : Error("parse", message), offset_(offset), is_line_(is_line) {}

  std::size_t offset() const noexcept { return offset_; }
  bool is_line() const noexcept { return is_line_; }

 private:
  std::size_t offset_;
  bool is_line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

/// A graph edit operation could not be applied.
class EditError : public Error {
 public:
  EditError(std::size_t op_index, const std::string& message)
      : Error("edit", "op #" + std::to_string(op_index) + ": " + message), op_index_(op_index) {}

  std::size_t op_index() const noexcept { return op_index_; }

 private:
  std::size_t op_index_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

class NumericError : public Error {
 public:
  NumericError(int step, const std::string& message)
      : Error("numeric", message + " at step " + std::to_string(step)), step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// The MLLM endpoint could not be reached or kept failing after retries.
class EndpointError : public Error {
 public:
  EndpointError(const std::string& message, int status = 0)
      : Error("endpoint", message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Model output did not contain a usable scene graph. Carries the raw text.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& message, std::string raw_text)
      : Error("extraction", message), raw_text_(std::move(raw_text)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }

 private:
  std::string raw_text_;
};

/// Backend wire-protocol violation or undecodable image payload.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message) : Error("protocol", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace venus
