#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or artifact failed its integrity / compatibility checks.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite value or collapsed.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdl
