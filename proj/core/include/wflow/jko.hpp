#pragma once

#include <optional>
#include <string>

#include "wflow/functionals.hpp"
#include "wflow/measures.hpp"
#include "wflow/rng.hpp"

namespace wflow {

enum class StepMode { Exact, Distance, Variational };

std::string to_string(StepMode mode);
StepMode step_mode_from_string(const std::string& s);

struct StepModeSpec {
  StepMode mode = StepMode::Exact;
  double epsilon = 0.0;

  static StepModeSpec exact() { return {StepMode::Exact, 0.0}; }
  static StepModeSpec distance(double eps) { return {StepMode::Distance, eps}; }
  static StepModeSpec variational(double eps) { return {StepMode::Variational, eps}; }
};

struct JkoStepResult {
  Measure output;
  std::optional<Measure> exact_output;
  StepModeSpec mode;
  std::optional<double> certified_w2_error;
  std::optional<double> certified_energy_gap;
  int inner_iterations = 0;
};

/// (prox_{τg})_# μ: the exact JKO step of the potential energy ∫g dμ.
/// Gaussian inputs need a quadratic g (affine prox).
Measure jko_potential(const Measure& mu, double tau, const PotentialSpec& g);

/// Exact JKO step of the negative entropy on a Gaussian: in the eigenbasis of
/// Σ each standard deviation s maps to (s + √(s² + 4τ))/2, mean unchanged.
GaussianMeasure jko_gaussian_entropy(const GaussianMeasure& mu, double tau);

/// Exact JKO operator when a closed form exists (potential with prox on
/// discrete measures, quadratic potentials and entropy on Gaussians with
/// commuting curvature). Throws NoExactSolver otherwise.
Measure exact_jko(const Measure& mu, double tau, const Functional& f);

/// Inner-descent controls for the variational mode.
struct InnerSolverOptions {
  int max_iterations = 200'000;
};

/// One JKO step in the requested mode:
///  - exact: the closed-form operator;
///  - distance(ε): the exact output translated by ε along a random unit
///    direction (a translation moves W_2 by exactly its length);
///  - variational(ε): gradient descent with backtracking on the step's
///    finite-dimensional parametrization, stopped once the strong-convexity
///    bound (τ/2)‖∇‖² certifies an energy gap ≤ ε²/(2τ).
JkoStepResult jko_step(const Measure& mu, double tau, const Functional& f, StepModeSpec mode, Rng& rng,
                       const InnerSolverOptions& options = {});

/// G(candidate) + W_2²(candidate, mu_prev)/(2τ).
double jko_energy(const Measure& mu_prev, const Measure& candidate, double tau, const Functional& f);

}  // namespace wflow
