#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace wflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kWeightRenormalizeTolerance = 1e-9;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kEigenClamp = 1e-14;

/// Finitely supported probability measure: n weighted atoms in R^d.
/// Points are stored row-wise (n x d).
class DiscreteMeasure {
 public:
  /// Weights summing to 1 within 1e-9 are renormalized; anything further off
  /// is rejected with InvalidMeasure.
  DiscreteMeasure(Matrix points, Vector weights);

  static DiscreteMeasure dirac(const Vector& x);
  static DiscreteMeasure uniform(Matrix points);
  static DiscreteMeasure from_1d(const std::vector<double>& points,
                                 const std::vector<double>& weights);

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  Vector point(int i) const { return points_.row(i).transpose(); }
  double weight(int i) const { return weights_[i]; }

  Vector mean() const;
  bool has_equal_weights(double tol = 1e-12) const;

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b);

 private:
  Matrix points_;
  Vector weights_;
};

/// Eigen-decomposition of a covariance matrix with eigenvalues clamped at 0.
struct SpectralDecomposition {
  Vector values;   // ascending, >= 0
  Matrix vectors;  // orthonormal columns
};

/// Gaussian N(mean, cov) with PSD covariance. The spectral decomposition is
/// computed on first use and shared between copies.
class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, Matrix cov);

  static GaussianMeasure isotropic(const Vector& mean, double variance);
  static GaussianMeasure standard(int dim);
  static GaussianMeasure from_1d(double mean, double variance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }

  const SpectralDecomposition& spectrum() const;
  /// Smallest eigenvalue exceeds the clamp: a member of the regular measures.
  bool is_regular() const;
  Matrix sqrt_cov() const;
  /// Throws SingularCovariance when the covariance is not strictly positive.
  Matrix inv_sqrt_cov() const;
  double log_det() const;

  friend bool operator==(const GaussianMeasure& a, const GaussianMeasure& b);

 private:
  struct Cache;

  Vector mean_;
  Matrix cov_;
  std::shared_ptr<Cache> cache_;
};

using Measure = std::variant<DiscreteMeasure, GaussianMeasure>;

int dim(const Measure& mu);
bool is_discrete(const Measure& mu);
bool is_gaussian(const Measure& mu);
Vector mean(const Measure& mu);

/// ∫‖x‖² dμ.
double second_moment(const Measure& mu);

/// Pointwise map x -> T(x). Affine maps keep Gaussians Gaussian; general maps
/// only apply to discrete measures.
class PointMap {
 public:
  static PointMap identity(int dim);
  static PointMap affine(Matrix linear, Vector offset);
  static PointMap translation(const Vector& v);
  static PointMap scaling(double c, int dim);
  static PointMap general(std::function<Vector(const Vector&)> f);

  bool is_affine() const { return affine_.has_value(); }
  const Matrix& linear() const { return affine_->first; }
  const Vector& offset() const { return affine_->second; }

  Vector operator()(const Vector& x) const;

 private:
  std::optional<std::pair<Matrix, Vector>> affine_;
  std::function<Vector(const Vector&)> general_;
};

Measure pushforward(const Measure& mu, const PointMap& map);
DiscreteMeasure pushforward(const DiscreteMeasure& mu, const PointMap& map);
GaussianMeasure pushforward(const GaussianMeasure& mu, const PointMap& map);

/// Translate every atom / the mean by v.
Measure translate(const Measure& mu, const Vector& v);

/// Symmetric PSD square root via eigen-decomposition, eigenvalues clamped at
/// kEigenClamp before the root is taken.
Matrix sym_sqrt(const Matrix& s);

// JSON: {"type":"discrete","points":[[..]],"weights":[..]} or
//       {"type":"gaussian","mean":[..],"cov":[[..]]}
nlohmann::json to_json(const Measure& mu);
Measure measure_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace wflow
