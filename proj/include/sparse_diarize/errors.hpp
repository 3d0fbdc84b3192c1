#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparse_diarize {

// Root of everything this library throws. The CLI maps the subclasses onto
// exit codes: InvalidArgument -> 2, IoError/FormatError -> 3,
// NumericalError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// EMBSIG01 magic did not match.
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Payload longer than the header announces, or a text row of the wrong width.
class DimensionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

// File ended before the header or payload was complete.
class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Malformed line in a line-oriented text format; carries the 1-based line.
class ParseError : public FormatError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Raised by the optimizer when the loss blows up; carries the iteration.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : NumericalError("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace sparse_diarize
