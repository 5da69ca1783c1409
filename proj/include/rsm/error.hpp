#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsm {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: dimension mismatches, points outside a grid, ...
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Bad configuration values or unknown benchmark names.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A requested grid or buffer exceeds the configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Text file parse failure; line is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rsm
