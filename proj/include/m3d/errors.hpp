#pragma once

#include <stdexcept>
#include <string>

namespace m3d {

// Invalid or inconsistent configuration: bad CLI flags, impossible generator
// settings, malformed config files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss. The CLI maps this to exit code 3 and
// keeps the last checkpoint.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace m3d
