#pragma once

#include <stdexcept>
#include <string>

namespace wasscert {

/// Invalid user input: bad distribution parameters, malformed config, missing flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedMarginals : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Diverged : public NumericalError {
 public:
  Diverged(const std::string& what, double last_residual)
      : NumericalError(what), residual_(last_residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class TrainingFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A mathematically guaranteed invariant failed: a bug, not bad luck.
class InternalError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace wasscert
