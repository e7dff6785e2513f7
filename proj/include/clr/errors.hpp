#pragma once

#include <stdexcept>
#include <string>

namespace clr {

// Error hierarchy. Each kind maps onto one CLI exit code (see tools/clr.cpp).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad indices, shape mismatches, invalid parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A polynomial exceeds the relaxation degree or a basis degree is negative.
class DegreeError : public InputError {
 public:
  using InputError::InputError;
};

/// The SDP solver failed (infeasible or unusable output).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Selection probabilities or budget rows inconsistent beyond tolerance.
class ConsistencyError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Predictor recovery failed: Pi-hat has no null space.
class NonIdentifiableError : public Error {
 public:
  using Error::Error;
};

/// Predictor recovery failed: null vectors do not involve the response.
class DegenerateResponseError : public Error {
 public:
  using Error::Error;
};

/// Greedy cover ran out of eligible terms.
class CoverError : public Error {
 public:
  CoverError(const std::string& what, double achieved_coverage,
             double achieved_loss)
      : Error(what),
        achieved_coverage_(achieved_coverage),
        achieved_loss_(achieved_loss) {}

  double achieved_coverage() const { return achieved_coverage_; }
  double achieved_loss() const { return achieved_loss_; }

 private:
  double achieved_coverage_;
  double achieved_loss_;
};

/// Problem too large for an exhaustive routine.
class SizeError : public Error {
 public:
  using Error::Error;
};

}  // namespace clr
