#pragma once

#include <stdexcept>
#include <string>

namespace riccilab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Metric profile that fails its construction invariants (e.g. pole smoothness).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Interior warping function below the positivity floor, or curvature blow-up.
class NearSingularError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failure; carries the last residual.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Query outside the stored time range of a history.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or directory; key() names the offending entry.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::string key)
      : Error(what + " [" + key + "]"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace riccilab
