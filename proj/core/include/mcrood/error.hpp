#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcrood {

enum class ErrorKind {
  config,    // configuration does not satisfy its invariants
  data,      // non-finite or out-of-range input data
  argument,  // caller violated a precondition
  shape,     // tensor or frame dimensions do not line up
  numeric,   // NaN/Inf produced during computation
  io,        // file system or format failure
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for the library. Every error carries a kind so the CLI can
/// emit a machine-readable record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& m) : Error(ErrorKind::argument, m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error(ErrorKind::shape, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& m)
      : Error(ErrorKind::io, path + ": " + m), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace mcrood
