#pragma once

#include <stdexcept>
#include <string>

namespace penkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A Cholesky factorization failed on a matrix required to be positive definite.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// Raised when an operation needs the covariance of a possibility function
/// whose precision matrix is singular.
class CovarianceUnavailable : public Error {
 public:
  using Error::Error;
};

/// The max-det problem has no finite optimum (deviations do not span the space).
class UnboundedProblem : public Error {
 public:
  using Error::Error;
};

class MaxIterations : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace penkf
