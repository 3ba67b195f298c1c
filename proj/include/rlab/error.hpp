#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rlab {

// Base for every error the toolkit raises on bad input or violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameter during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text input. `offset` is a byte offset for binary
// formats and a 1-based line number for text formats.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace rlab
