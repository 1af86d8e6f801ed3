#ifndef STANCE_ERROR_H_
#define STANCE_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stance {

// Base for every error raised by the toolkit. The CLI maps ValidationError,
// ParseError and ConfigError to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace stance

#endif  // STANCE_ERROR_H_
