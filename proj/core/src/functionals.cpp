#include "wflow/functionals.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "wflow/error.hpp"
#include "wflow/rng.hpp"

namespace wflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Coordinate-wise grid refinement for a convex objective. Only used to
// spot-check user-supplied proximal maps; it never produces iterates.
Vector coordinate_grid_minimize(const std::function<double(const Vector&)>& phi, Vector y) {
  constexpr int kGrid = 41;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      auto along = [&](double t) {
        Vector z = y;
        z[k] = t;
        return phi(z);
      };
      double center = y[k];
      double radius = 1.0 + std::abs(center);
      // Expand until the best grid point is interior.
      for (int grow = 0; grow < 60; ++grow) {
        double best_t = center, best_v = along(center);
        int best_idx = kGrid / 2;
        for (int g = 0; g < kGrid; ++g) {
          const double t = center - radius + 2.0 * radius * g / (kGrid - 1);
          const double v = along(t);
          if (v < best_v) {
            best_v = v;
            best_t = t;
            best_idx = g;
          }
        }
        center = best_t;
        if (best_idx != 0 && best_idx != kGrid - 1) break;
        radius *= 2.0;
      }
      while (radius > 1e-13 * (1.0 + std::abs(center))) {
        radius = 2.0 * (2.0 * radius / (kGrid - 1));
        double best_t = center, best_v = along(center);
        for (int g = 0; g < kGrid; ++g) {
          const double t = center - radius + 2.0 * radius * g / (kGrid - 1);
          const double v = along(t);
          if (v < best_v) {
            best_v = v;
            best_t = t;
          }
        }
        center = best_t;
      }
      moved = std::max(moved, std::abs(center - y[k]));
      y[k] = center;
    }
    if (moved < 1e-12) break;
  }
  return y;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

double QuadraticForm::value(const Vector& x) const { return 0.5 * x.dot(A * x) + b.dot(x) + c; }

Vector QuadraticForm::gradient(const Vector& x) const { return A * x + b; }

PointMap QuadraticForm::prox_map(double tau) const {
  const auto d = b.size();
  const Matrix system = Matrix::Identity(d, d) + tau * A;
  const Matrix inverse = system.ldlt().solve(Matrix::Identity(d, d));
  return PointMap::affine(inverse, -tau * (inverse * b));
}

PotentialSpec::PotentialSpec(int dim, ValueFn value, Options options)
    : name_(std::move(options.name)),
      dim_(dim),
      value_(std::move(value)),
      gradient_(std::move(options.gradient)),
      prox_(std::move(options.prox)),
      lambda_(options.lambda),
      lipschitz_(options.lipschitz),
      argmin_(std::move(options.argmin)) {
  if (dim_ < 1) fail(ErrorCode::InvalidPotential, "dimension must be at least 1");
  if (!value_) fail(ErrorCode::InvalidPotential, "potential needs a value function");
  if (lambda_ < 0.0) fail(ErrorCode::InvalidPotential, "strong convexity must be nonnegative");
  if (lipschitz_ && *lipschitz_ < lambda_)
    fail(ErrorCode::InvalidPotential, "strong convexity exceeds gradient Lipschitz constant");
  if (prox_ && options.verify_prox) verify_prox();
}

void PotentialSpec::verify_prox() const {
  Rng rng(0x5eed'0f'9f0c);
  for (int sample = 0; sample < 20; ++sample) {
    const Vector x = 2.0 * rng.normal_vector(dim_);
    const double tau = 0.05 + 1.95 * rng.uniform();
    auto phi = [&](const Vector& y) { return value_(y) + (y - x).squaredNorm() / (2.0 * tau); };
    const Vector candidate = prox_(x, tau);
    const Vector oracle = coordinate_grid_minimize(phi, x);
    const double gap = phi(candidate) - phi(oracle);
    if (!(gap <= 1e-6 * (1.0 + std::abs(phi(oracle)))))
      fail(ErrorCode::InvalidPotential,
           "proximal map of '" + name_ + "' fails the minimization spot-check (excess " +
               std::to_string(gap) + ")");
  }
}

PotentialSpec PotentialSpec::quadratic(QuadraticForm form, std::string name) {
  const auto d = form.b.size();
  if (form.A.rows() != d || form.A.cols() != d)
    fail(ErrorCode::InvalidPotential, "quadratic form shape mismatch");
  form.A = (0.5 * (form.A + form.A.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(form.A);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  if (lo < -1e-12) fail(ErrorCode::InvalidPotential, "quadratic form must be convex");

  PotentialSpec spec;
  spec.name_ = std::move(name);
  spec.dim_ = static_cast<int>(d);
  spec.value_ = [form](const Vector& x) { return form.value(x); };
  spec.gradient_ = [form](const Vector& x) { return form.gradient(x); };
  spec.prox_ = [form](const Vector& x, double tau) { return form.prox_map(tau)(x); };
  spec.lambda_ = std::max(lo, 0.0);
  spec.lipschitz_ = std::max(hi, 0.0);
  if (lo > 1e-12) spec.argmin_ = Vector(-form.A.ldlt().solve(form.b));
  spec.quadratic_ = std::move(form);
  return spec;
}

PotentialSpec PotentialSpec::quadratic_isotropic(double lambda, const Vector& center) {
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidPotential, "lambda must be nonnegative");
  const auto d = center.size();
  QuadraticForm form{lambda * Matrix::Identity(d, d), -lambda * center,
                     0.5 * lambda * center.squaredNorm()};
  PotentialSpec spec = quadratic(form, "quadratic");
  // Evaluate in the centered form; it is exact at the minimizer.
  spec.value_ = [lambda, center](const Vector& x) { return 0.5 * lambda * (x - center).squaredNorm(); };
  spec.gradient_ = [lambda, center](const Vector& x) { return Vector(lambda * (x - center)); };
  spec.prox_ = [lambda, center](const Vector& x, double tau) {
    return Vector((x + tau * lambda * center) / (1.0 + tau * lambda));
  };
  if (lambda > 0.0) spec.argmin_ = center;
  return spec;
}

PotentialSpec PotentialSpec::absolute_value(double weight, int dim) {
  if (!(weight >= 0.0)) fail(ErrorCode::InvalidPotential, "weight must be nonnegative");
  Options opts;
  opts.name = "absolute_value";
  opts.prox = [weight](const Vector& x, double tau) {
    Vector y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = soft_threshold(x[i], tau * weight);
    return y;
  };
  opts.argmin = Vector::Zero(dim);
  opts.verify_prox = false;
  PotentialSpec spec(dim, [weight](const Vector& x) { return weight * x.lpNorm<1>(); }, std::move(opts));
  spec.l1_weight_ = weight;
  return spec;
}

PotentialSpec PotentialSpec::zero(int dim) {
  PotentialSpec spec = quadratic(QuadraticForm{Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0}, "zero");
  spec.prox_ = [](const Vector& x, double) { return x; };
  return spec;
}

Vector PotentialSpec::gradient(const Vector& x) const {
  if (!gradient_) fail(ErrorCode::GradientUnavailable, "potential '" + name_ + "' has no gradient");
  return gradient_(x);
}

Vector PotentialSpec::prox(const Vector& x, double tau) const {
  if (!prox_) fail(ErrorCode::ProxUnavailable, "potential '" + name_ + "' has no proximal map");
  return prox_(x, tau);
}

std::optional<PointMap> PotentialSpec::affine_prox(double tau) const {
  if (!quadratic_) return std::nullopt;
  return quadratic_->prox_map(tau);
}

nlohmann::json PotentialSpec::describe() const {
  nlohmann::json j{{"name", name_}, {"dim", dim_}, {"lambda", lambda_}};
  if (lipschitz_) j["L"] = *lipschitz_;
  return j;
}

InteractionKernel InteractionKernel::quadratic(double coefficient) {
  return InteractionKernel{"quadratic_interaction",
                           [coefficient](const Vector& z) { return 0.5 * coefficient * z.squaredNorm(); },
                           coefficient};
}

Functional Functional::potential(PotentialSpec spec) {
  Functional f;
  f.kind_ = Kind::Potential;
  f.potential_ = std::make_shared<const PotentialSpec>(std::move(spec));
  return f;
}

Functional Functional::interaction(InteractionKernel kernel) {
  Functional f;
  f.kind_ = Kind::Interaction;
  f.kernel_ = std::make_shared<const InteractionKernel>(std::move(kernel));
  return f;
}

Functional Functional::entropy() {
  Functional f;
  f.kind_ = Kind::Entropy;
  return f;
}

Functional Functional::sum(std::vector<Functional> parts) {
  if (parts.empty()) fail(ErrorCode::InvalidConfig, "sum of zero functionals");
  Functional f;
  f.kind_ = Kind::Sum;
  f.parts_ = std::move(parts);
  return f;
}

Functional Functional::free_energy(double lambda, const Vector& center) {
  return sum({potential(PotentialSpec::quadratic_isotropic(lambda, center)), entropy()});
}

const PotentialSpec& Functional::potential_spec() const {
  if (kind_ != Kind::Potential) fail(ErrorCode::EvalUnsupported, "functional is not a potential");
  return *potential_;
}

const InteractionKernel& Functional::kernel() const {
  if (kind_ != Kind::Interaction) fail(ErrorCode::EvalUnsupported, "functional is not an interaction");
  return *kernel_;
}

std::string Functional::name() const {
  switch (kind_) {
    case Kind::Potential: return potential_->name();
    case Kind::Interaction: return kernel_->name;
    case Kind::Entropy: return "entropy_gaussian";
    case Kind::Sum: {
      std::string s;
      for (const auto& p : parts_) s += (s.empty() ? "" : "+") + p.name();
      return s;
    }
  }
  return "unknown";
}

double eval(const Functional& f, const Measure& mu) {
  switch (f.kind()) {
    case Functional::Kind::Potential: {
      const auto& g = f.potential_spec();
      if (g.dim() != dim(mu)) fail(ErrorCode::DimensionMismatch, "potential/measure dimension");
      if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
        double total = 0.0;
        for (int i = 0; i < d->size(); ++i) {
          if (d->weight(i) > 0.0) total += d->weight(i) * g.value(d->point(i));
        }
        return total;
      }
      const auto& gauss = std::get<GaussianMeasure>(mu);
      if (!g.quadratic_form())
        fail(ErrorCode::EvalUnsupported, "potential '" + g.name() + "' has no Gaussian closed form");
      // E g(X) = g(m) + ½ tr(AΣ) for quadratic g.
      return g.value(gauss.mean()) + 0.5 * (g.quadratic_form()->A * gauss.cov()).trace();
    }
    case Functional::Kind::Interaction: {
      const auto* d = std::get_if<DiscreteMeasure>(&mu);
      if (!d) fail(ErrorCode::EvalUnsupported, "interaction energy is evaluated on discrete measures only");
      const auto& kernel = f.kernel();
      double total = 0.0;
      for (int i = 0; i < d->size(); ++i) {
        const Vector xi = d->point(i);
        for (int j = 0; j < d->size(); ++j)
          total += d->weight(i) * d->weight(j) * kernel.value(xi - d->point(j));
      }
      return total;
    }
    case Functional::Kind::Entropy: {
      const auto* g = std::get_if<GaussianMeasure>(&mu);
      if (!g || !g->is_regular()) return kInf;
      const double d = g->dim();
      return -0.5 * (d * std::log(2.0 * std::numbers::pi * std::numbers::e) + g->log_det());
    }
    case Functional::Kind::Sum: {
      double total = 0.0;
      for (const auto& part : f.parts()) total += eval(part, mu);
      return total;
    }
  }
  return kInf;
}

Vector grad_F(const PotentialSpec& f, const Vector& x) { return f.gradient(x); }

std::optional<GaussianModel> gaussian_model(const Functional& f, int dim) {
  GaussianModel model{QuadraticForm{Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0}, false};
  std::function<bool(const Functional&)> absorb = [&](const Functional& g) {
    switch (g.kind()) {
      case Functional::Kind::Potential: {
        const auto& q = g.potential_spec().quadratic_form();
        if (!q || q->b.size() != dim) return false;
        model.quadratic.A += q->A;
        model.quadratic.b += q->b;
        model.quadratic.c += q->c;
        return true;
      }
      case Functional::Kind::Entropy:
        if (model.entropy) return false;
        model.entropy = true;
        return true;
      case Functional::Kind::Sum:
        for (const auto& p : g.parts())
          if (!absorb(p)) return false;
        return true;
      case Functional::Kind::Interaction:
        return false;
    }
    return false;
  };
  if (!absorb(f)) return std::nullopt;
  return model;
}

MinimizerOracle minimizer(const Functional& f) {
  if (f.kind() == Functional::Kind::Potential) {
    const auto& g = f.potential_spec();
    if (!g.argmin()) fail(ErrorCode::NoClosedFormMinimizer, "potential '" + g.name() + "' has no known argmin");
    Measure at = DiscreteMeasure::dirac(*g.argmin());
    return {at, g.value(*g.argmin())};
  }
  if (f.kind() == Functional::Kind::Sum) {
    // Quadratic + entropy: the Gibbs measure N(−A⁻¹b, A⁻¹).
    const int d = [&] {
      for (const auto& p : f.parts())
        if (p.kind() == Functional::Kind::Potential) return p.potential_spec().dim();
      return 0;
    }();
    if (d > 0) {
      if (auto model = gaussian_model(f, d); model && model->entropy) {
        Eigen::LDLT<Matrix> ldlt(model->quadratic.A);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(model->quadratic.A);
        if (eig.eigenvalues().minCoeff() <= 1e-12)
          fail(ErrorCode::NoClosedFormMinimizer, "Gibbs measure needs a strictly convex quadratic");
        const Matrix cov = ldlt.solve(Matrix::Identity(d, d));
        const Vector m = -ldlt.solve(model->quadratic.b);
        Measure at = GaussianMeasure(m, 0.5 * (cov + cov.transpose()));
        return {at, eval(f, at)};
      }
      // Isotropic quadratic + ℓ1: soft threshold of the quadratic's center.
      const PotentialSpec* quad = nullptr;
      const PotentialSpec* l1 = nullptr;
      bool only_potentials = true;
      for (const auto& p : f.parts()) {
        if (p.kind() != Functional::Kind::Potential) {
          only_potentials = false;
          continue;
        }
        const auto& spec = p.potential_spec();
        if (spec.quadratic_form() && !quad) {
          quad = &spec;
        } else if (spec.l1_weight() && !l1) {
          l1 = &spec;
        } else {
          only_potentials = false;
        }
      }
      if (only_potentials && quad && l1) {
        const Matrix& A = quad->quadratic_form()->A;
        const double a = A(0, 0);
        if (a > 0.0 && (A - a * Matrix::Identity(d, d)).cwiseAbs().maxCoeff() == 0.0) {
          const Vector center = -quad->quadratic_form()->b / a;
          Vector x(d);
          for (int i = 0; i < d; ++i) x[i] = soft_threshold(center[i], *l1->l1_weight() / a);
          Measure at = DiscreteMeasure::dirac(x);
          return {at, eval(f, at)};
        }
      }
      if (only_potentials && quad && !l1 && f.parts().size() == 1) {
        return minimizer(f.parts().front());
      }
    }
  }
  fail(ErrorCode::NoClosedFormMinimizer, "no closed-form minimizer for '" + f.name() + "'");
}

PotentialSpec potential_from_json(const nlohmann::json& j, int dim) {
  const std::string name = j.is_string() ? j.get<std::string>() : j.value("functional", j.value("name", std::string{}));
  auto center = [&]() -> Vector {
    if (j.is_object() && j.contains("b")) {
      Vector b = vector_from_json(j.at("b"));
      if (b.size() != dim) fail(ErrorCode::InvalidConfig, "center 'b' has the wrong dimension");
      return b;
    }
    return Vector::Zero(dim);
  };
  if (name == "quadratic") {
    if (j.is_object() && j.contains("A")) {
      QuadraticForm form{matrix_from_json(j.at("A")),
                         j.contains("linear") ? vector_from_json(j.at("linear")) : Vector::Zero(dim),
                         j.value("c", 0.0)};
      if (form.A.rows() != dim || form.b.size() != dim)
        fail(ErrorCode::InvalidConfig, "quadratic form has the wrong dimension");
      return PotentialSpec::quadratic(std::move(form));
    }
    return PotentialSpec::quadratic_isotropic(j.is_object() ? j.value("lambda", 1.0) : 1.0, center());
  }
  if (name == "absolute_value") return PotentialSpec::absolute_value(j.is_object() ? j.value("weight", 1.0) : 1.0, dim);
  if (name == "zero") return PotentialSpec::zero(dim);
  fail(ErrorCode::InvalidConfig, "unknown potential '" + name + "'");
}

Functional functional_from_json(const nlohmann::json& j, int dim) {
  const std::string name = j.is_string() ? j.get<std::string>() : j.value("functional", j.value("name", std::string{}));
  if (name == "entropy_gaussian" || name == "entropy") return Functional::entropy();
  if (name == "quadratic_interaction")
    return Functional::interaction(InteractionKernel::quadratic(j.is_object() ? j.value("coefficient", 1.0) : 1.0));
  if (name == "free_energy") {
    const Vector b = j.is_object() && j.contains("b") ? vector_from_json(j.at("b")) : Vector::Zero(dim);
    if (b.size() != dim) fail(ErrorCode::InvalidConfig, "center 'b' has the wrong dimension");
    return Functional::free_energy(j.is_object() ? j.value("lambda", 1.0) : 1.0, b);
  }
  if (name == "sum") {
    std::vector<Functional> parts;
    for (const auto& p : j.at("parts")) parts.push_back(functional_from_json(p, dim));
    return Functional::sum(std::move(parts));
  }
  if (name.empty()) fail(ErrorCode::InvalidConfig, "functional spec needs a 'functional' name");
  return Functional::potential(potential_from_json(j, dim));
}

}  // namespace wflow
