#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "wflow/measures.hpp"

namespace wflow {

inline constexpr double kPlanFeasibilityTolerance = 1e-10;
inline constexpr long kDefaultPlanCap = 1'000'000;
inline constexpr int kQuantileGrid = 10'000;

/// Coupling between two discrete measures with its transport cost
/// Σ γ_ij ‖x_i − y_j‖^p (that is, W_p^p when the plan is optimal).
struct TransportPlan {
  DiscreteMeasure rows;
  DiscreteMeasure cols;
  Matrix coupling;
  double cost = 0.0;
  double p = 2.0;

  double distance() const;
  /// Largest absolute marginal violation.
  double marginal_residual() const;
};

nlohmann::json to_json(const TransportPlan& plan);

/// Either an assignment between equal-size uniform supports or an affine map
/// between Gaussians.
struct AffineMap {
  Matrix linear;
  Vector offset;
};
using Assignment = std::vector<int>;
using OptimalMap = std::variant<Assignment, AffineMap>;

/// W_p between one-dimensional discrete measures via the quantile coupling.
double wp_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// Exact optimal coupling for cost ‖x − y‖^p, solved with the transportation
/// simplex. Fails with SizeCapExceeded when n·m exceeds `cap`.
TransportPlan wp_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                          long cap = kDefaultPlanCap);
TransportPlan w2_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                          long cap = kDefaultPlanCap);

/// Optimal assignment for equal-size, equal-weight supports (an extreme point
/// of the Birkhoff polytope): result[i] is the atom of nu matched with atom i.
Assignment optimal_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct SinkhornResult {
  double cost = 0.0;  // Σ P_ij C_ij of the entropic plan
  double row_residual = 0.0;
  double col_residual = 0.0;
  int iterations = 0;
  Matrix plan;
};

/// Entropic approximation (log-domain Sinkhorn) of the squared-distance
/// transport problem. Diagnostic only. Throws NotConvergedError with the last
/// marginal residual when `max_iter` is reached.
SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double reg,
                           int max_iter = 100'000, double tol = 1e-10);

struct GaussianTransport {
  double squared = 0.0;  // W_2²
  std::optional<AffineMap> map;

  double distance() const;
};

/// Bures-Wasserstein distance. The optimal affine map is included when the
/// source covariance is nonsingular.
GaussianTransport w2_gaussian(const GaussianMeasure& g1, const GaussianMeasure& g2);
/// Optimal affine map x ↦ m2 + A(x − m1); throws SingularCovariance.
AffineMap bures_map(const GaussianMeasure& g1, const GaussianMeasure& g2);

/// Midpoint quantile discretization of a 1D Gaussian on `grid` equal-weight atoms.
DiscreteMeasure gaussian_quantiles_1d(const GaussianMeasure& g, int grid = kQuantileGrid);

/// Quantile-average barycenter of one-dimensional measures.
DiscreteMeasure barycenter_1d(const std::vector<DiscreteMeasure>& measures,
                              const std::vector<double>& weights);

/// Sorted, merged representation of a 1D measure (zero-weight atoms dropped).
DiscreteMeasure canonical_1d(const DiscreteMeasure& mu);

/// W_2² between any two supported measures: 1D quantile formula, exact LP,
/// Bures, or the Dirac-vs-Gaussian closed form. Mixed discrete/Gaussian pairs
/// in one dimension use the quantile discretization of the Gaussian.
double w2_squared(const Measure& a, const Measure& b);
double w2(const Measure& a, const Measure& b);
/// W_p for p in [1, 2]. Gaussian pairs in d = 1 with p < 2 use the quantile
/// discretization; in d > 1 they fall back to the W_2 upper bound.
double wp(const Measure& a, const Measure& b, double p);

}  // namespace wflow
