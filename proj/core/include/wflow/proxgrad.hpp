#pragma once

#include <optional>

#include "wflow/functionals.hpp"
#include "wflow/jko.hpp"
#include "wflow/measures.hpp"
#include "wflow/rng.hpp"

namespace wflow {

/// G = E_F + H with ∇F L-Lipschitz and F λ-convex (λ = 0 allowed).
struct PgProblem {
  PotentialSpec F;
  Functional H;
  double lambda = 0.0;
  double L = 0.0;

  /// λ and L are taken from F.
  static PgProblem make(PotentialSpec F, Functional H);
  Functional G() const;
};

struct PgStepResult {
  Measure eta;
  JkoStepResult backward;

  const Measure& output() const { return backward.output; }
};

/// (I − τ∇F)_# μ. Requires τ < 1/L when F has a Lipschitz constant.
Measure forward_step(const Measure& mu, double tau, const PotentialSpec& F);

/// Forward step followed by the backward JKO step on H in the requested mode.
PgStepResult pg_step(const Measure& mu, double tau, const PgProblem& prob, StepModeSpec mode, Rng& rng,
                     const InnerSolverOptions& options = {});

/// Exact T_τ μ.
Measure pg_exact(const Measure& mu, double tau, const PgProblem& prob);

/// x ← x − τ∇F(x) + √(2τ)ξ per particle, with the noise of particle i drawn
/// from rng.split(i).
DiscreteMeasure ula_step(const DiscreteMeasure& particles, double tau, const PotentialSpec& F, const Rng& rng,
                         bool noise = true);

}  // namespace wflow
