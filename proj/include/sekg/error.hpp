#pragma once

#include <stdexcept>
#include <string>

namespace sekg {

enum class ErrorKind {
  Config,      // bad configuration, missing asset, missing credentials
  Provider,    // transport failure or provider contract violation
  Parse,       // malformed input file or provider response
  Structural,  // thread tree invariants
  Domain,      // numeric precondition violated
  Argument,    // caller passed an invalid argument
};

/// Exit code reported by the CLI for an error of the given kind.
int exit_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class StructuralError : public Error {
 public:
  StructuralError(const std::string& what, std::string offending_id)
      : Error(ErrorKind::Structural, what), offending_id_(std::move(offending_id)) {}

  const std::string& offending_id() const noexcept { return offending_id_; }

 private:
  std::string offending_id_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ErrorKind::Argument, what) {}
};

/// Input-file parse failure. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::string offending_text = {})
      : Error(ErrorKind::Parse, line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line),
        offending_text_(std::move(offending_text)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& offending_text() const noexcept { return offending_text_; }

 private:
  std::size_t line_;
  std::string offending_text_;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(ErrorKind::Provider, what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace sekg
