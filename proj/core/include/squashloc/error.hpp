#pragma once

#include <stdexcept>
#include <string>

namespace squashloc {

/// Broad failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  usage,      // bad arguments or configuration (exit 1)
  data,       // malformed or inconsistent input data (exit 2)
  numerical,  // a solver or trainer failed to produce a usable result (exit 3)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace squashloc
