#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsnagg {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters (key pool, simulation config, cluster options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class MissingRingError : public Error {
 public:
  using Error::Error;
};

class NoSecureLinkError : public Error {
 public:
  using Error::Error;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// A recovery produced a non-integer or otherwise inconsistent result.
class CorruptedTranscriptError : public Error {
 public:
  using Error::Error;
};

// A hardened-mode validation gate refused to continue.
class ProtocolAbort : public Error {
 public:
  ProtocolAbort(std::string check, const std::string& what)
      : Error(what), check_(std::move(check)) {}

  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

class AttackFailed : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public ConfigError {
 public:
  ValidationError(std::string key, const std::string& what)
      : ConfigError(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace wsnagg
