#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wflow {

enum class ErrorCode {
  InvalidMeasure,
  DimensionMismatch,
  NonAffineOnGaussian,
  SizeCapExceeded,
  NotConverged,
  SingularCovariance,
  DistanceUnsupported,
  EvalUnsupported,
  GradientUnavailable,
  ProxUnavailable,
  InvalidPotential,
  NoClosedFormMinimizer,
  NoExactSolver,
  InnerSolverStalled,
  StepTooLarge,
  InvalidSchedule,
  OracleUnavailable,
  NegativeGap,
  InvalidConfig,
  InvalidTrace,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by iterative solvers that hit their iteration cap.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, double last_residual, int iterations)
      : Error(ErrorCode::NotConverged, what), residual_(last_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace wflow
