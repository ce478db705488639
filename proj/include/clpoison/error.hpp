#pragma once

#include <stdexcept>
#include <string>

namespace clpoison {

/// Runtime failure (bad input data, failed IO, numerical breakdown).
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration / usage error; the CLI maps these to exit code 2.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace clpoison
