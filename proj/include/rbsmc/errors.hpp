#pragma once

#include <stdexcept>
#include <string>

namespace rbsmc {

// Base for every error raised by the library. `kind()` is a short stable tag
// (e.g. "model-validation", "degenerate-weights") used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Bad input: malformed model, inconsistent dimensions, parse failures,
// instances too large for the exact oracle.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown: non-PD matrices after jitter, all-zero weights,
// non-normalizable quadratic forms.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbsmc
