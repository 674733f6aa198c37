#pragma once

#include <stdexcept>
#include <string>

namespace synrisk {

// Base for all library errors. The CLI maps these to exit codes and a
// machine-readable error record, so every throw site should name the
// offending identifier (variable, row, path) in the message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string operation, const std::string& message)
      : std::runtime_error(module + "/" + operation + ": " + message),
        module_(std::move(module)),
        operation_(std::move(operation)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string module_;
  std::string operation_;
};

// Input data violates the declared schema (unknown level, bad bounds, ...).
class SchemaError : public Error {
  using Error::Error;
};

// Malformed file contents (ragged CSV row, unparseable JSON, ...).
class ParseError : public Error {
  using Error::Error;
};

// A numeric value is outside its declared range.
class RangeError : public Error {
  using Error::Error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
  using Error::Error;
};

// Numerical degeneracy in an estimator (zero weights, overflow, ...).
class NumericalError : public Error {
  using Error::Error;
};

}  // namespace synrisk
