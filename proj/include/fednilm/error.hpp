#pragma once

#include <stdexcept>
#include <string>

namespace fednilm {

/// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  kDimension,
  kParameter,
  kStructural,
  kValidation,
  kData,
  kConfig,
  kProtocol,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Shape mismatch on a named axis ("batch", "channels", "length", ...).
class DimensionError : public Error {
 public:
  DimensionError(std::string axis, const std::string& what)
      : Error(ErrorKind::kDimension, "dimension error on axis '" + axis + "': " + what),
        axis_(std::move(axis)) {}

  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ErrorKind::kParameter, what) {}
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error(ErrorKind::kStructural, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::kProtocol, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

}  // namespace fednilm
