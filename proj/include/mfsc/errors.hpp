#pragma once

#include <stdexcept>
#include <string>

namespace mfsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input or output where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// An eigenvalue or SVD routine failed to converge.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be Schur (spectral radius < 1) is not.
class NotStabilizingError : public Error {
 public:
  NotStabilizingError(const std::string& what, double radius)
      : Error(what), radius_(radius) {}
  double radius() const noexcept { return radius_; }

 private:
  double radius_;
};

/// R + B'PB (or the model-free R + Lambda) is numerically singular.
class SingularInnerMatrixError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, int rank, int required)
      : Error(what), rank_(rank), required_(required) {}
  int rank() const noexcept { return rank_; }
  int required() const noexcept { return required_; }

 private:
  int rank_;
  int required_;
};

/// Iteration did not converge, or diverged.
class IterationError : public Error {
 public:
  using Error::Error;
};

class MaxIterExceededError : public IterationError {
 public:
  MaxIterExceededError(const std::string& what, int iterations)
      : IterationError(what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfsc
