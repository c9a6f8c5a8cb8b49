#pragma once

#include <functional>

#include "wflow/measures.hpp"

namespace wflow {

/// Smooth strongly convex problem on R^k. `direction` returns the
/// (preconditioned) gradient, `metric` its squared norm in the matching
/// inner product, so that Armijo reads f(θ − t·g) ≤ f(θ) − t·metric(g)/2.
struct InnerProblem {
  Vector start;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> direction;
  std::function<double(const Vector&)> metric;
  std::function<bool(const Vector&)> feasible;
  double strong_convexity = 1.0;
  double target_gap = 0.0;
  double initial_step = 1.0;
};

struct InnerResult {
  Vector theta;
  double gap_bound = 0.0;  // metric(grad)/(2·modulus) ≥ f(θ) − min f
  int iterations = 0;
};

/// Gradient descent with backtracking until the strong-convexity bound
/// certifies the target gap. Throws InnerSolverStalled at the cap.
InnerResult minimize_certified(const InnerProblem& problem, int max_iterations);

/// Orthonormal basis diagonalizing a Gaussian covariance together with a
/// curvature matrix A (when they commute).
struct GaussianBasis {
  Matrix vectors;
  Vector std_devs;
  Vector curvature;  // diagonal of QᵀAQ
  bool commuting = true;
};

GaussianBasis common_basis(const GaussianMeasure& mu, const Matrix& A);
GaussianMeasure gaussian_from_basis(const Vector& mean, const GaussianBasis& basis, const Vector& std_devs);

}  // namespace wflow
