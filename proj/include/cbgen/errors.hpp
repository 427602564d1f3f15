#ifndef CBGEN_ERRORS_HPP
#define CBGEN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cbgen {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries a 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long line = 0)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_ = 0;
};

// A key that must be unique appeared twice.
class DuplicateError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied argument violates a precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Mismatched artifacts (e.g. vectorizer built against a different matrix).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File written by an unsupported format version.
class VersionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace cbgen

#endif  // CBGEN_ERRORS_HPP
