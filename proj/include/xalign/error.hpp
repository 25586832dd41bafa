#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xalign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Parse failure at a specific line of a text input.
class FormatError : public IoError {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : IoError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values, singular systems, failed decompositions.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace xalign
