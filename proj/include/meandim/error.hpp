#pragma once

#include <stdexcept>
#include <string>

namespace meandim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, out-of-range value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical routine produced a non-finite or otherwise unusable value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_residual, long iterations)
      : NumericalError(what), last_residual_(last_residual), iterations_(iterations) {}

  double last_residual() const noexcept { return last_residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double last_residual_;
  long iterations_;
};

/// Linear system without a unique solution (ridge with lambda = 0 on a singular Gram matrix).
class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Gradient descent blew up; the learning rate is too large for the problem.
class LearningRateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed input file or configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace meandim
