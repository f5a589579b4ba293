#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dialrl {

/// Raised when a caller violates an operation's contract (bad arguments,
/// calling step() on a finished session, missing files, ...).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a computation produces non-finite values (diverged training,
/// NaN gradients).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a configured quality floor is not met (e.g. discriminator
/// accuracy below the required minimum).
struct FloorError : std::runtime_error {
  explicit FloorError(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw UsageError(msg);
}

}  // namespace dialrl
