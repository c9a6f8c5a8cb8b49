#include "wflow/proxgrad.hpp"

#include <cmath>

#include "wflow/error.hpp"

namespace wflow {

PgProblem PgProblem::make(PotentialSpec F, Functional H) {
  if (!F.has_gradient()) fail(ErrorCode::GradientUnavailable, "forward step needs the gradient of '" + F.name() + "'");
  const double lambda = F.lambda();
  const double L = F.lipschitz().value_or(0.0);
  if (L > 0.0 && lambda > L * (1.0 + 1e-12)) fail(ErrorCode::InvalidPotential, "strong convexity exceeds smoothness");
  return PgProblem{std::move(F), std::move(H), lambda, L};
}

Functional PgProblem::G() const { return Functional::sum({Functional::potential(F), H}); }

Measure forward_step(const Measure& mu, double tau, const PotentialSpec& F) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::InvalidConfig, "stepsize must be positive and finite");
  if (F.dim() != dim(mu)) fail(ErrorCode::DimensionMismatch, "potential/measure dimension");
  if (auto L = F.lipschitz(); L && *L > 0.0 && tau * *L >= 1.0)
    fail(ErrorCode::StepTooLarge, "forward step needs tau < 1/L");
  if (const auto& q = F.quadratic_form()) {
    const int d = F.dim();
    return pushforward(mu, PointMap::affine(Matrix::Identity(d, d) - tau * q->A, -tau * q->b));
  }
  if (is_gaussian(mu)) fail(ErrorCode::NonAffineOnGaussian, "gradient step of '" + F.name() + "' is not affine");
  if (!F.has_gradient()) fail(ErrorCode::GradientUnavailable, "forward step needs the gradient of '" + F.name() + "'");
  return pushforward(mu, PointMap::general([&](const Vector& x) { return Vector(x - tau * F.gradient(x)); }));
}

PgStepResult pg_step(const Measure& mu, double tau, const PgProblem& prob, StepModeSpec mode, Rng& rng,
                     const InnerSolverOptions& options) {
  Measure eta = forward_step(mu, tau, prob.F);
  JkoStepResult backward = jko_step(eta, tau, prob.H, mode, rng, options);
  return PgStepResult{std::move(eta), std::move(backward)};
}

Measure pg_exact(const Measure& mu, double tau, const PgProblem& prob) {
  return exact_jko(forward_step(mu, tau, prob.F), tau, prob.H);
}

DiscreteMeasure ula_step(const DiscreteMeasure& particles, double tau, const PotentialSpec& F, const Rng& rng,
                         bool noise) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::InvalidConfig, "stepsize must be positive and finite");
  if (!particles.has_equal_weights()) fail(ErrorCode::InvalidMeasure, "ULA needs equal-weight particles");
  if (F.dim() != particles.dim()) fail(ErrorCode::DimensionMismatch, "potential/measure dimension");
  const int n = particles.size();
  const int d = particles.dim();
  const double scale = std::sqrt(2.0 * tau);
  Matrix points = particles.points();
  Vector x(d);
  for (int i = 0; i < n; ++i) {
    x = points.row(i).transpose();
    Vector next = x - tau * F.gradient(x);
    if (noise) {
      Rng r = rng.split(static_cast<std::uint64_t>(i));
      next += scale * r.normal_vector(d);
    }
    points.row(i) = next.transpose();
  }
  return DiscreteMeasure(std::move(points), particles.weights());
}

}  // namespace wflow
