#pragma once

#include <stdexcept>
#include <string>

namespace vqad {

enum class ErrorKind {
  numeric = 1,  // non-finite value produced or consumed
  usage = 2,    // caller violated a precondition
  io = 3,       // file system failure
  format = 4,   // malformed or incompatible binary container
};

/// Base of every error raised by the library. The kind maps 1:1 onto the
/// process exit code used by the command line tool.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

}  // namespace vqad
