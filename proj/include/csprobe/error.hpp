#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csprobe {

enum class ErrorCode {
  Parse,
  DimensionMismatch,
  DegenerateVector,
  EmptyInput,
  InvalidInput,
  OriginalOov,
  NoUsableReplacements,
  ZeroMass,
  InsufficientPoints,
  DegenerateGeometry,
  UndefinedCorrelation,
  MissingFixture,
  Transport,
  Protocol,
  Remote,
  Io,
  Config,
  Internal,
};

/// Stable snake_case name used in emitted records.
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure tied to a 1-based input line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-success HTTP status from the LM endpoint.
class RemoteError : public Error {
 public:
  RemoteError(int status, const std::string& message)
      : Error(ErrorCode::Remote, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace csprobe
