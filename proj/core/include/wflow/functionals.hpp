#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wflow/measures.hpp"

namespace wflow {

/// g(x) = ½ xᵀAx + bᵀx + c with A symmetric PSD.
struct QuadraticForm {
  Matrix A;
  Vector b;
  double c = 0.0;

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// argmin_y g(y) + ‖y − x‖²/(2τ) as an affine map of x.
  PointMap prox_map(double tau) const;
};

/// Pointwise potential g: R^d -> R with optional gradient and proximal map.
/// A user-supplied prox is spot-checked on construction against a
/// coordinate grid-refinement minimizer (20 samples, tolerance 1e-6).
class PotentialSpec {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using ProxFn = std::function<Vector(const Vector&, double)>;

  struct Options {
    std::string name = "custom";
    GradientFn gradient;
    ProxFn prox;
    double lambda = 0.0;             // strong convexity of g
    std::optional<double> lipschitz;  // L of ∇g
    std::optional<Vector> argmin;
    bool verify_prox = true;
  };

  PotentialSpec(int dim, ValueFn value, Options options);

  static PotentialSpec quadratic(QuadraticForm form, std::string name = "quadratic");
  /// λ/2 ‖x − center‖².
  static PotentialSpec quadratic_isotropic(double lambda, const Vector& center);
  /// weight · ‖x‖₁, prox = soft threshold.
  static PotentialSpec absolute_value(double weight, int dim);
  static PotentialSpec zero(int dim);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  const std::optional<double>& lipschitz() const { return lipschitz_; }
  const std::optional<QuadraticForm>& quadratic_form() const { return quadratic_; }
  const std::optional<double>& l1_weight() const { return l1_weight_; }
  const std::optional<Vector>& argmin() const { return argmin_; }

  double value(const Vector& x) const { return value_(x); }
  bool has_gradient() const { return static_cast<bool>(gradient_); }
  bool has_prox() const { return static_cast<bool>(prox_); }
  /// Throws GradientUnavailable.
  Vector gradient(const Vector& x) const;
  /// Throws ProxUnavailable.
  Vector prox(const Vector& x, double tau) const;
  /// Affine prox map when g is quadratic.
  std::optional<PointMap> affine_prox(double tau) const;

  nlohmann::json describe() const;

 private:
  PotentialSpec() = default;
  void verify_prox() const;

  std::string name_;
  int dim_ = 1;
  ValueFn value_;
  GradientFn gradient_;
  ProxFn prox_;
  double lambda_ = 0.0;
  std::optional<double> lipschitz_;
  std::optional<QuadraticForm> quadratic_;
  std::optional<double> l1_weight_;
  std::optional<Vector> argmin_;
};

/// Displacement interaction kernel V(x − y), convex.
struct InteractionKernel {
  std::string name;
  std::function<double(const Vector&)> value;
  std::optional<double> quadratic_coefficient;  // V(z) = coef·‖z‖²/2

  static InteractionKernel quadratic(double coefficient);
};

/// Energy functional: potential, interaction, Gaussian entropy, or a sum.
class Functional {
 public:
  enum class Kind { Potential, Interaction, Entropy, Sum };

  static Functional potential(PotentialSpec spec);
  static Functional interaction(InteractionKernel kernel);
  static Functional entropy();
  static Functional sum(std::vector<Functional> parts);
  /// λ/2‖x − b‖² + Ent.
  static Functional free_energy(double lambda, const Vector& center);

  Kind kind() const { return kind_; }
  const PotentialSpec& potential_spec() const;
  const InteractionKernel& kernel() const;
  const std::vector<Functional>& parts() const { return parts_; }
  std::string name() const;

 private:
  Kind kind_ = Kind::Entropy;
  std::shared_ptr<const PotentialSpec> potential_;
  std::shared_ptr<const InteractionKernel> kernel_;
  std::vector<Functional> parts_;
};

/// G(μ) as an extended real; +∞ outside the functional's domain.
/// Throws EvalUnsupported for pairs with no closed-form evaluation.
double eval(const Functional& f, const Measure& mu);

Vector grad_F(const PotentialSpec& f, const Vector& x);

struct MinimizerOracle {
  Measure argmin;
  double value;
};

/// Closed-form argmin for potentials with a known minimizer, quadratic plus
/// Gaussian entropy (the Gibbs measure), and isotropic quadratic plus ℓ1.
/// Throws NoClosedFormMinimizer otherwise.
MinimizerOracle minimizer(const Functional& f);

/// Sum of quadratic potentials plus at most one entropy term, when f has that
/// shape. Used by the Gaussian closed forms.
struct GaussianModel {
  QuadraticForm quadratic;
  bool entropy = false;
};
std::optional<GaussianModel> gaussian_model(const Functional& f, int dim);

/// Built-in registry by name: "quadratic", "absolute_value", "zero",
/// "quadratic_interaction", "entropy_gaussian", "free_energy".
Functional functional_from_json(const nlohmann::json& j, int dim);
PotentialSpec potential_from_json(const nlohmann::json& j, int dim);

}  // namespace wflow
