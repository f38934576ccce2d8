#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ami {

enum class ErrorKind {
  configuration,
  not_found,
  data_integrity,
  parse,
  io,
  input,
  stage,
  conflict,
};

std::string_view to_string(ErrorKind kind);

/// Base of every exception the engine throws. Per-record outcomes (a name
/// that does not resolve, a URL that fails to download) are never reported
/// through exceptions; they end up in the returned records instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorKind::configuration, message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error(ErrorKind::not_found, message) {}
};

class DataIntegrityError : public Error {
 public:
  explicit DataIntegrityError(const std::string& message)
      : Error(ErrorKind::data_integrity, message) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::optional<std::size_t> byte_offset = std::nullopt)
      : Error(ErrorKind::parse, byte_offset ? message + " (at byte " + std::to_string(*byte_offset) + ")"
                                            : message),
        byte_offset_(byte_offset) {}

  std::optional<std::size_t> byte_offset() const noexcept { return byte_offset_; }

 private:
  std::optional<std::size_t> byte_offset_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::input, message) {}
};

/// A model backend failed to load or run. Carries the model URI so the queue
/// can report which model broke.
class StageError : public Error {
 public:
  StageError(const std::string& message, std::string model_uri)
      : Error(ErrorKind::stage, message + " [model: " + model_uri + "]"),
        model_uri_(std::move(model_uri)) {}

  const std::string& model_uri() const noexcept { return model_uri_; }

 private:
  std::string model_uri_;
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error(ErrorKind::conflict, message) {}
};

}  // namespace ami
