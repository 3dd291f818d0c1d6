#pragma once

#include <stdexcept>
#include <string>

namespace qcuts3d {

/// Error categories. Each maps onto a distinct process exit code in the CLI.
enum class ErrorKind {
  argument,
  format,
  data,
  convergence,
  io,
  placement,
  configuration,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message) : Error(ErrorKind::argument, message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error(ErrorKind::format, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class PlacementError : public Error {
 public:
  explicit PlacementError(const std::string& message) : Error(ErrorKind::placement, message) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorKind::configuration, message) {}
};

/// Raised when an iterative solver exhausts its budget. Carries the best
/// relative residual reached so callers can report it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double best_residual)
      : Error(ErrorKind::convergence, message), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Raised by kmeans2 when every value is identical and no split exists.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& message) : Error(ErrorKind::data, message) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace qcuts3d
