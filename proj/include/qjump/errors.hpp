#pragma once

#include <stdexcept>
#include <string>

namespace qjump {

/// Failure category; maps one-to-one onto CLI exit codes.
enum class ErrorKind {
  Config = 2,       // malformed or out-of-range input
  Numeric = 3,      // integrator, fit or linear-algebra failure
  Statistical = 4,  // a statistical self-check did not hold
};

/// Base for every error thrown by the library. `code()` is a short,
/// machine-parsable identifier such as "IndexOutOfRange".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string code, const std::string& what)
      : Error(ErrorKind::Config, std::move(code), what) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string code, const std::string& what)
      : Error(ErrorKind::Numeric, std::move(code), what) {}
};

class StatisticalError : public Error {
 public:
  StatisticalError(std::string code, const std::string& what)
      : Error(ErrorKind::Statistical, std::move(code), what) {}
};

}  // namespace qjump
