#pragma once

#include <stdexcept>
#include <string>

namespace mle {

// Raised when caller-supplied data violates an operation's preconditions.
// The CLI maps this family to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Setup-time problems: rank-deficient design matrices, bad rigs, bad assets.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MalformedPacket : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace mle
