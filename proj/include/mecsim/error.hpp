#pragma once

#include <stdexcept>
#include <string>

namespace mecsim {

// Bad input: malformed config, schema violation, missing file.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or model invariant violated at runtime (exit code 1).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Search space too large for exhaustive enumeration.
class SearchSpaceError : public ModelError {
 public:
  SearchSpaceError(const std::string& what, double size)
      : ModelError(what), size_(size) {}
  double size() const noexcept { return size_; }

 private:
  double size_;
};

}  // namespace mecsim
