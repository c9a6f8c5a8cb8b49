#include "wflow/jko.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "wflow/error.hpp"
#include "wflow/inner_solver.hpp"
#include "wflow/transport.hpp"

namespace wflow {

std::string to_string(StepMode mode) {
  switch (mode) {
    case StepMode::Exact: return "exact";
    case StepMode::Distance: return "distance";
    case StepMode::Variational: return "variational";
  }
  return "exact";
}

StepMode step_mode_from_string(const std::string& s) {
  if (s == "exact") return StepMode::Exact;
  if (s == "distance") return StepMode::Distance;
  if (s == "variational") return StepMode::Variational;
  fail(ErrorCode::InvalidConfig, "unknown step mode '" + s + "'");
}

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::InvalidConfig, "stepsize must be positive and finite");
}

// Potential part of f as a single pointwise potential, when f has one.
std::optional<PotentialSpec> pointwise_potential(const Functional& f, int d) {
  if (f.kind() == Functional::Kind::Potential) return f.potential_spec();
  if (auto model = gaussian_model(f, d); model && !model->entropy)
    return PotentialSpec::quadratic(model->quadratic);
  return std::nullopt;
}

}  // namespace

GaussianBasis common_basis(const GaussianMeasure& mu, const Matrix& A) {
  const int d = mu.dim();
  const Matrix& cov = mu.cov();
  const double scale = std::max({1.0, cov.cwiseAbs().maxCoeff(), A.cwiseAbs().maxCoeff()});
  GaussianBasis basis;
  basis.commuting = (A * cov - cov * A).cwiseAbs().maxCoeff() <= 1e-12 * scale * scale;
  if (A.cwiseAbs().maxCoeff() == 0.0) {
    basis.vectors = mu.spectrum().vectors;
  } else {
    // Commuting symmetric matrices share the eigenvectors of a generic
    // combination.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov + 0.6180339887498949 * A);
    basis.vectors = solver.eigenvectors();
  }
  const Matrix rotated_cov = basis.vectors.transpose() * cov * basis.vectors;
  const Matrix rotated_a = basis.vectors.transpose() * A * basis.vectors;
  basis.std_devs = rotated_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  basis.curvature = rotated_a.diagonal();
  (void)d;
  return basis;
}

GaussianMeasure gaussian_from_basis(const Vector& mean, const GaussianBasis& basis, const Vector& std_devs) {
  Matrix cov = basis.vectors * std_devs.cwiseAbs2().asDiagonal() * basis.vectors.transpose();
  cov = (0.5 * (cov + cov.transpose())).eval();
  return GaussianMeasure(mean, std::move(cov));
}

Measure jko_potential(const Measure& mu, double tau, const PotentialSpec& g) {
  check_tau(tau);
  if (g.dim() != dim(mu)) fail(ErrorCode::DimensionMismatch, "potential/measure dimension");
  if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
    if (!g.has_prox()) fail(ErrorCode::ProxUnavailable, "potential '" + g.name() + "' has no proximal map");
    return pushforward(*d, PointMap::general([&](const Vector& x) { return g.prox(x, tau); }));
  }
  auto affine = g.affine_prox(tau);
  if (!affine) {
    if (!g.has_prox()) fail(ErrorCode::ProxUnavailable, "potential '" + g.name() + "' has no proximal map");
    fail(ErrorCode::NonAffineOnGaussian, "proximal map of '" + g.name() + "' is not affine");
  }
  return pushforward(std::get<GaussianMeasure>(mu), *affine);
}

GaussianMeasure jko_gaussian_entropy(const GaussianMeasure& mu, double tau) {
  check_tau(tau);
  const auto& spectrum = mu.spectrum();
  const Vector s = spectrum.values.cwiseSqrt();
  Vector u(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) u[i] = 0.5 * (s[i] + std::sqrt(s[i] * s[i] + 4.0 * tau));
  Matrix cov = spectrum.vectors * u.cwiseAbs2().asDiagonal() * spectrum.vectors.transpose();
  cov = (0.5 * (cov + cov.transpose())).eval();
  return GaussianMeasure(mu.mean(), std::move(cov));
}

namespace {

// Quadratic potential + entropy on a Gaussian whose covariance commutes with
// the curvature A. Per eigendirection u solves (1 + τa)u² − s·u − τ = 0.
GaussianMeasure jko_gaussian_free_energy(const GaussianMeasure& mu, double tau, const QuadraticForm& q) {
  const GaussianBasis basis = common_basis(mu, q.A);
  if (!basis.commuting)
    fail(ErrorCode::NoExactSolver, "entropy JKO needs a covariance commuting with the potential's curvature");
  const auto d = mu.dim();
  const Matrix system = Matrix::Identity(d, d) + tau * q.A;
  const Vector m = system.ldlt().solve(mu.mean() - tau * q.b);
  Vector u(d);
  for (int i = 0; i < d; ++i) {
    const double s = basis.std_devs[i];
    const double k = 1.0 + tau * basis.curvature[i];
    u[i] = (s + std::sqrt(s * s + 4.0 * tau * k)) / (2.0 * k);
  }
  return gaussian_from_basis(m, basis, u);
}

}  // namespace

Measure exact_jko(const Measure& mu, double tau, const Functional& f) {
  check_tau(tau);
  const int d = dim(mu);
  if (is_discrete(mu)) {
    if (auto g = pointwise_potential(f, d); g && g->has_prox()) return jko_potential(mu, tau, *g);
    fail(ErrorCode::NoExactSolver, "no exact JKO for '" + f.name() + "' on discrete measures");
  }
  const auto& gauss = std::get<GaussianMeasure>(mu);
  if (f.kind() == Functional::Kind::Entropy) return jko_gaussian_entropy(gauss, tau);
  if (f.kind() == Functional::Kind::Potential) {
    if (f.potential_spec().quadratic_form()) return jko_potential(mu, tau, f.potential_spec());
    fail(ErrorCode::NoExactSolver, "no exact JKO for '" + f.name() + "' on Gaussians");
  }
  auto model = gaussian_model(f, d);
  if (!model) fail(ErrorCode::NoExactSolver, "no exact JKO for '" + f.name() + "' on Gaussians");
  if (!model->entropy) return pushforward(gauss, model->quadratic.prox_map(tau));
  return jko_gaussian_free_energy(gauss, tau, model->quadratic);
}

namespace {

InnerResult variational_discrete(const DiscreteMeasure& mu, double tau, const PotentialSpec& g, double target,
                                 const InnerSolverOptions& options, DiscreteMeasure& out) {
  if (!g.has_gradient())
    fail(ErrorCode::GradientUnavailable, "variational steps need the gradient of '" + g.name() + "'");
  const int n = mu.size();
  const int d = mu.dim();
  const Matrix& x0 = mu.points();
  const Vector& w = mu.weights();

  InnerProblem problem;
  problem.start = Eigen::Map<const Vector>(x0.data(), x0.size());
  problem.objective = [&](const Vector& theta) {
    Eigen::Map<const Matrix> y(theta.data(), n, d);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      const Vector yi = y.row(i).transpose();
      total += w[i] * (g.value(yi) + (y.row(i) - x0.row(i)).squaredNorm() / (2.0 * tau));
    }
    return total;
  };
  // Per-atom gradients of φ_i(y) = g(y) + ‖y − x_i‖²/(2τ).
  problem.direction = [&](const Vector& theta) {
    Eigen::Map<const Matrix> y(theta.data(), n, d);
    Matrix grad = Matrix::Zero(n, d);
    for (int i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      const Vector yi = y.row(i).transpose();
      grad.row(i) = (g.gradient(yi) + (yi - x0.row(i).transpose()) / tau).transpose();
    }
    return Vector(Eigen::Map<const Vector>(grad.data(), grad.size()));
  };
  problem.metric = [&](const Vector& dir) {
    Eigen::Map<const Matrix> gm(dir.data(), n, d);
    return gm.rowwise().squaredNorm().dot(w);
  };
  problem.feasible = [](const Vector&) { return true; };
  problem.strong_convexity = 1.0 / tau;
  problem.target_gap = target;
  problem.initial_step = tau;

  InnerResult res = minimize_certified(problem, options.max_iterations);
  Matrix y = Eigen::Map<const Matrix>(res.theta.data(), n, d);
  out = DiscreteMeasure(std::move(y), w);
  return res;
}

InnerResult variational_gaussian(const GaussianMeasure& mu, double tau, const GaussianModel& model,
                                 double target, const InnerSolverOptions& options, GaussianMeasure& out) {
  const GaussianBasis basis = common_basis(mu, model.quadratic.A);
  if (!basis.commuting)
    fail(ErrorCode::NoExactSolver, "Gaussian parametrization needs a covariance commuting with the curvature");
  const int d = mu.dim();
  const Vector m0 = mu.mean();
  const Vector s = basis.std_devs;
  const QuadraticForm& q = model.quadratic;
  const double entropy_const = -0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e);

  InnerProblem problem;
  problem.start.resize(2 * d);
  problem.start.head(d) = m0;
  for (int i = 0; i < d; ++i) problem.start[d + i] = s[i] > 1e-8 ? s[i] : 1.0;
  problem.objective = [&](const Vector& theta) {
    const Vector m = theta.head(d);
    const Vector u = theta.tail(d);
    double value = q.value(m) + 0.5 * basis.curvature.dot(u.cwiseAbs2());
    if (model.entropy) value += entropy_const - u.array().log().sum();
    value += ((m - m0).squaredNorm() + (u - s).squaredNorm()) / (2.0 * tau);
    return value;
  };
  problem.direction = [&](const Vector& theta) {
    const Vector m = theta.head(d);
    const Vector u = theta.tail(d);
    Vector grad(2 * d);
    grad.head(d) = q.gradient(m) + (m - m0) / tau;
    Vector gu = basis.curvature.cwiseProduct(u) + (u - s) / tau;
    if (model.entropy) gu -= u.cwiseInverse();
    grad.tail(d) = gu;
    return grad;
  };
  problem.metric = [](const Vector& dir) { return dir.squaredNorm(); };
  problem.feasible = [&](const Vector& theta) {
    return !model.entropy || (theta.tail(d).array() > 0.0).all();
  };
  problem.strong_convexity = 1.0 / tau;
  problem.target_gap = target;
  problem.initial_step = tau;

  InnerResult res = minimize_certified(problem, options.max_iterations);
  out = gaussian_from_basis(res.theta.head(d), basis, res.theta.tail(d).cwiseAbs());
  return res;
}

}  // namespace

JkoStepResult jko_step(const Measure& mu, double tau, const Functional& f, StepModeSpec mode, Rng& rng,
                       const InnerSolverOptions& options) {
  check_tau(tau);
  if (!(mode.epsilon >= 0.0)) fail(ErrorCode::InvalidConfig, "error magnitude must be nonnegative");
  const int d = dim(mu);
  switch (mode.mode) {
    case StepMode::Exact: {
      Measure out = exact_jko(mu, tau, f);
      return JkoStepResult{out, out, mode, 0.0, 0.0, 0};
    }
    case StepMode::Distance: {
      Measure exact = exact_jko(mu, tau, f);
      const Vector shift = mode.epsilon * rng.unit_direction(d);
      return JkoStepResult{translate(exact, shift), exact, mode, mode.epsilon, std::nullopt, 0};
    }
    case StepMode::Variational: {
      if (!(mode.epsilon > 0.0))
        fail(ErrorCode::InvalidConfig, "variational steps need a positive error magnitude");
      const double target = mode.epsilon * mode.epsilon / (2.0 * tau);
      std::optional<Measure> exact;
      try {
        exact = exact_jko(mu, tau, f);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoExactSolver) throw;
      }
      JkoStepResult result{mu, exact, mode, std::nullopt, std::nullopt, 0};
      InnerResult inner;
      if (const auto* disc = std::get_if<DiscreteMeasure>(&mu)) {
        auto g = pointwise_potential(f, d);
        if (!g) fail(ErrorCode::NoExactSolver, "no parametric inner problem for '" + f.name() + "' on discrete measures");
        DiscreteMeasure out = *disc;
        inner = variational_discrete(*disc, tau, *g, target, options, out);
        result.output = std::move(out);
      } else {
        auto model = gaussian_model(f, d);
        if (!model) fail(ErrorCode::NoExactSolver, "no parametric inner problem for '" + f.name() + "' on Gaussians");
        GaussianMeasure out = std::get<GaussianMeasure>(mu);
        inner = variational_gaussian(std::get<GaussianMeasure>(mu), tau, *model, target, options, out);
        result.output = std::move(out);
      }
      result.certified_energy_gap = inner.gap_bound;
      // Strong convexity (modulus 1/τ) turns the gap into a distance bound.
      result.certified_w2_error = std::sqrt(2.0 * tau * inner.gap_bound);
      result.inner_iterations = inner.iterations;
      return result;
    }
  }
  fail(ErrorCode::InvalidConfig, "unknown step mode");
}

double jko_energy(const Measure& mu_prev, const Measure& candidate, double tau, const Functional& f) {
  check_tau(tau);
  return eval(f, candidate) + w2_squared(candidate, mu_prev) / (2.0 * tau);
}

}  // namespace wflow
