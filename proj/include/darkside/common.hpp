#pragma once

#include <stdexcept>
#include <string>

namespace darkside {

// Bad inputs: schema violations, broken preconditions, malformed configs.
// The CLI maps these to exit code 2; anything else that escapes is exit 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Geometry that makes an operation impossible (image smaller than a tile, ...).
class DimensionError : public ValidationError {
 public:
  explicit DimensionError(const std::string& what) : ValidationError(what) {}
};

}  // namespace darkside
