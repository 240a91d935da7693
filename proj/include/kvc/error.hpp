#pragma once

#include <stdexcept>
#include <string>

namespace kvc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, bad tokens, count mismatches. Maps to exit code 1.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a precondition of the protocol.
class ValidationError : public Error {
 public:
  using Error::Error;
};

inline std::string at_line(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

}  // namespace kvc
