#pragma once

#include <stdexcept>
#include <string>

namespace kdc {

// Bad user-facing configuration (unknown preset, invalid count, ...). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or a solve that cannot be completed. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures. CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Random-graph generation could not reach connectivity within the retry budget.
class MaxRetriesExceeded : public ConfigError {
 public:
  explicit MaxRetriesExceeded(const std::string& what) : ConfigError(what) {}
};

}  // namespace kdc
