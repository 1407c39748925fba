#pragma once

#include <stdexcept>
#include <string>

namespace lidarsphere {

/// Base of every error raised by the library. The category maps onto the C API
/// status codes and the CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInvalidArgument, kConfig, kData, kIo, kInvariant };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(Kind::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::kData, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Kind::kIo, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(Kind::kInvariant, what) {}
};

}  // namespace lidarsphere
