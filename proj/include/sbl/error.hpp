#pragma once

#include <stdexcept>
#include <string>

namespace sbl {

/// Base of every error raised by the library. `kind()` is the short
/// machine-readable category written into CLI error JSON.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid configuration, malformed spec strings, bad dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "dimension"; }
};

/// NaN/Inf iterates, failed factorizations, negative variances.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

/// Majorizer evaluated outside its domain (negative gamma).
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "domain"; }
};

/// File-level failures; the message carries the offending path.
class IoError : public ConfigError {
 public:
  IoError(const std::string& path, const std::string& what)
      : ConfigError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }
  const char* kind() const noexcept override { return "io"; }

 private:
  std::string path_;
};

/// Malformed or inconsistent weight / dataset files.
class FormatError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "format"; }
};

}  // namespace sbl
