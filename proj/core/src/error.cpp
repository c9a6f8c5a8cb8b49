#include "wflow/error.hpp"

namespace wflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonAffineOnGaussian: return "NonAffineOnGaussian";
    case ErrorCode::SizeCapExceeded: return "SizeCapExceeded";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DistanceUnsupported: return "DistanceUnsupported";
    case ErrorCode::EvalUnsupported: return "EvalUnsupported";
    case ErrorCode::GradientUnavailable: return "GradientUnavailable";
    case ErrorCode::ProxUnavailable: return "ProxUnavailable";
    case ErrorCode::InvalidPotential: return "InvalidPotential";
    case ErrorCode::NoClosedFormMinimizer: return "NoClosedFormMinimizer";
    case ErrorCode::NoExactSolver: return "NoExactSolver";
    case ErrorCode::InnerSolverStalled: return "InnerSolverStalled";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::NegativeGap: return "NegativeGap";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidTrace: return "InvalidTrace";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace wflow
