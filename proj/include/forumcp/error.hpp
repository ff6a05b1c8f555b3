#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forumcp {

/// Base for every error raised by the library. `code()` is a stable
/// machine-readable tag used by the CLI exit path and the HTTP error body.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string field, const std::string& message)
      : Error("parse_error", "row " + std::to_string(row) + ", field '" + field + "': " + message),
        row_(row),
        field_(std::move(field)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation_error", message) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message) : Error("index_error", message) {}
};

class SolverFailure : public Error {
 public:
  explicit SolverFailure(const std::string& message) : Error("solver_failure", message) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

class Conflict : public Error {
 public:
  explicit Conflict(const std::string& message) : Error("conflict", message) {}
};

}  // namespace forumcp
