#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A resolvent returned a non-finite point or failed to converge.
class OperatorFailure : public Error {
 public:
  OperatorFailure(const std::string& what, double lambda, std::vector<double> x)
      : Error(what), lambda_(lambda), x_(std::move(x)) {}
  double lambda() const { return lambda_; }
  const std::vector<double>& point() const { return x_; }

 private:
  double lambda_;
  std::vector<double> x_;
};

class UnsupportedCheck : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class CoefficientEvaluationError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InversionUnavailable : public Error {
 public:
  using Error::Error;
};

class FitUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace mvsde
