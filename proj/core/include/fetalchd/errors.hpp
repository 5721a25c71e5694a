#pragma once

#include <stdexcept>
#include <string>

namespace fetalchd {

/// Invalid or inconsistent configuration. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / serialization failure. CLI maps this to exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure (divergence, NaN propagation). CLI maps this to exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fetalchd
