#include "wflow/measures.hpp"

#include <cmath>
#include <mutex>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "wflow/error.hpp"

namespace wflow {

DiscreteMeasure::DiscreteMeasure(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() < 1) fail(ErrorCode::InvalidMeasure, "discrete measure needs at least one atom");
  if (points_.cols() < 1) fail(ErrorCode::InvalidMeasure, "dimension must be at least 1");
  if (weights_.size() != points_.rows())
    fail(ErrorCode::InvalidMeasure, "weights/points size mismatch");
  if (!points_.allFinite()) fail(ErrorCode::InvalidMeasure, "non-finite atom location");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || weights_[i] < 0.0)
      fail(ErrorCode::InvalidMeasure, "weights must be finite and nonnegative");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kWeightRenormalizeTolerance)
    fail(ErrorCode::InvalidMeasure, "weights sum to " + std::to_string(total) + ", not 1");
  // Leave already-normalized input untouched so JSON round trips are exact.
  if (std::abs(total - 1.0) > kWeightSumTolerance) weights_ /= total;
}

DiscreteMeasure DiscreteMeasure::dirac(const Vector& x) {
  return DiscreteMeasure(x.transpose(), Vector::Ones(1));
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix points) {
  const auto n = points.rows();
  if (n < 1) fail(ErrorCode::InvalidMeasure, "discrete measure needs at least one atom");
  return DiscreteMeasure(std::move(points), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure DiscreteMeasure::from_1d(const std::vector<double>& points,
                                         const std::vector<double>& weights) {
  Matrix p(static_cast<Eigen::Index>(points.size()), 1);
  Vector w(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t i = 0; i < points.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = points[i];
  for (std::size_t i = 0; i < weights.size(); ++i) w[static_cast<Eigen::Index>(i)] = weights[i];
  return DiscreteMeasure(std::move(p), std::move(w));
}

Vector DiscreteMeasure::mean() const { return points_.transpose() * weights_; }

bool DiscreteMeasure::has_equal_weights(double tol) const {
  const double w = 1.0 / static_cast<double>(size());
  return ((weights_.array() - w).abs() <= tol).all();
}

bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
         a.points_ == b.points_ && a.weights_ == b.weights_;
}

struct GaussianMeasure::Cache {
  std::once_flag once;
  SpectralDecomposition spectrum;
};

GaussianMeasure::GaussianMeasure(Vector mean, Matrix cov)
    : mean_(std::move(mean)), cov_(std::move(cov)), cache_(std::make_shared<Cache>()) {
  const auto d = mean_.size();
  if (d < 1) fail(ErrorCode::InvalidMeasure, "dimension must be at least 1");
  if (cov_.rows() != d || cov_.cols() != d)
    fail(ErrorCode::InvalidMeasure, "covariance shape does not match mean");
  if (!mean_.allFinite() || !cov_.allFinite())
    fail(ErrorCode::InvalidMeasure, "non-finite Gaussian parameters");
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale)
    fail(ErrorCode::InvalidMeasure, "covariance is not symmetric");
  cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
  const Eigen::LDLT<Matrix> ldlt(cov_);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -kSymmetryTolerance * scale)
    fail(ErrorCode::InvalidMeasure, "covariance is not positive semidefinite");
}

GaussianMeasure GaussianMeasure::isotropic(const Vector& mean, double variance) {
  const auto d = mean.size();
  return GaussianMeasure(mean, variance * Matrix::Identity(d, d));
}

GaussianMeasure GaussianMeasure::standard(int dim) {
  return GaussianMeasure(Vector::Zero(dim), Matrix::Identity(dim, dim));
}

GaussianMeasure GaussianMeasure::from_1d(double mean, double variance) {
  return GaussianMeasure(Vector::Constant(1, mean), Matrix::Constant(1, 1, variance));
}

const SpectralDecomposition& GaussianMeasure::spectrum() const {
  std::call_once(cache_->once, [this] {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov_);
    cache_->spectrum.values = solver.eigenvalues().cwiseMax(0.0);
    cache_->spectrum.vectors = solver.eigenvectors();
  });
  return cache_->spectrum;
}

bool GaussianMeasure::is_regular() const { return spectrum().values.minCoeff() > kEigenClamp; }

Matrix GaussianMeasure::sqrt_cov() const {
  const auto& s = spectrum();
  const Vector roots = s.values.cwiseMax(kEigenClamp).cwiseSqrt();
  return s.vectors * roots.asDiagonal() * s.vectors.transpose();
}

Matrix GaussianMeasure::inv_sqrt_cov() const {
  if (!is_regular()) fail(ErrorCode::SingularCovariance, "covariance is singular");
  const auto& s = spectrum();
  const Vector inv_roots = s.values.cwiseSqrt().cwiseInverse();
  return s.vectors * inv_roots.asDiagonal() * s.vectors.transpose();
}

double GaussianMeasure::log_det() const {
  const auto& v = spectrum().values;
  double total = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(v[i]);
  }
  return total;
}

bool operator==(const GaussianMeasure& a, const GaussianMeasure& b) {
  return a.mean_.size() == b.mean_.size() && a.mean_ == b.mean_ && a.cov_ == b.cov_;
}

int dim(const Measure& mu) {
  return std::visit([](const auto& m) { return m.dim(); }, mu);
}

bool is_discrete(const Measure& mu) { return std::holds_alternative<DiscreteMeasure>(mu); }
bool is_gaussian(const Measure& mu) { return std::holds_alternative<GaussianMeasure>(mu); }

Vector mean(const Measure& mu) {
  return std::visit([](const auto& m) -> Vector { return m.mean(); }, mu);
}

double second_moment(const Measure& mu) {
  if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
    return d->points().rowwise().squaredNorm().dot(d->weights());
  }
  const auto& g = std::get<GaussianMeasure>(mu);
  return g.mean().squaredNorm() + g.cov().trace();
}

PointMap PointMap::identity(int dim) {
  return affine(Matrix::Identity(dim, dim), Vector::Zero(dim));
}

PointMap PointMap::affine(Matrix linear, Vector offset) {
  if (linear.rows() != offset.size()) fail(ErrorCode::DimensionMismatch, "affine map shape");
  PointMap m;
  m.affine_ = std::make_pair(std::move(linear), std::move(offset));
  return m;
}

PointMap PointMap::translation(const Vector& v) {
  const auto d = v.size();
  return affine(Matrix::Identity(d, d), v);
}

PointMap PointMap::scaling(double c, int dim) {
  return affine(c * Matrix::Identity(dim, dim), Vector::Zero(dim));
}

PointMap PointMap::general(std::function<Vector(const Vector&)> f) {
  PointMap m;
  m.general_ = std::move(f);
  return m;
}

Vector PointMap::operator()(const Vector& x) const {
  if (affine_) return affine_->first * x + affine_->second;
  return general_(x);
}

DiscreteMeasure pushforward(const DiscreteMeasure& mu, const PointMap& map) {
  if (map.is_affine()) {
    if (map.linear().cols() != mu.dim()) fail(ErrorCode::DimensionMismatch, "map/measure dimension");
    Matrix out = mu.points() * map.linear().transpose();
    out.rowwise() += map.offset().transpose();
    return DiscreteMeasure(std::move(out), mu.weights());
  }
  const Vector first = map(mu.point(0));
  Matrix out(mu.size(), first.size());
  out.row(0) = first.transpose();
  for (int i = 1; i < mu.size(); ++i) out.row(i) = map(mu.point(i)).transpose();
  return DiscreteMeasure(std::move(out), mu.weights());
}

GaussianMeasure pushforward(const GaussianMeasure& mu, const PointMap& map) {
  if (!map.is_affine())
    fail(ErrorCode::NonAffineOnGaussian, "Gaussian measures only admit affine pushforwards");
  const Matrix& a = map.linear();
  if (a.cols() != mu.dim()) fail(ErrorCode::DimensionMismatch, "map/measure dimension");
  Matrix cov = a * mu.cov() * a.transpose();
  cov = (0.5 * (cov + cov.transpose())).eval();
  return GaussianMeasure(a * mu.mean() + map.offset(), std::move(cov));
}

Measure pushforward(const Measure& mu, const PointMap& map) {
  return std::visit([&](const auto& m) -> Measure { return pushforward(m, map); }, mu);
}

Measure translate(const Measure& mu, const Vector& v) {
  if (v.size() != dim(mu)) fail(ErrorCode::DimensionMismatch, "translation dimension");
  if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
    Matrix pts = d->points();
    pts.rowwise() += v.transpose();
    return DiscreteMeasure(std::move(pts), d->weights());
  }
  const auto& g = std::get<GaussianMeasure>(mu);
  return GaussianMeasure(g.mean() + v, g.cov());
}

Matrix sym_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (s + s.transpose()));
  const Vector roots = solver.eigenvalues().cwiseMax(kEigenClamp).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vector vector_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) fail(ErrorCode::InvalidMeasure, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vector_to_json(m.row(r).transpose()));
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) fail(ErrorCode::InvalidMeasure, "expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Vector first = vector_from_json(j[0]);
  Matrix m(rows, first.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)]);
    if (row.size() != first.size()) fail(ErrorCode::InvalidMeasure, "ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

nlohmann::json to_json(const Measure& mu) {
  if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
    return {{"type", "discrete"}, {"points", matrix_to_json(d->points())},
            {"weights", vector_to_json(d->weights())}};
  }
  const auto& g = std::get<GaussianMeasure>(mu);
  return {{"type", "gaussian"}, {"mean", vector_to_json(g.mean())}, {"cov", matrix_to_json(g.cov())}};
}

Measure measure_from_json(const nlohmann::json& j) {
  const auto type = j.value("type", std::string{});
  if (type == "discrete") {
    Matrix points = matrix_from_json(j.at("points"));
    // A flat list of scalars is a 1D support.
    if (j.at("points").is_array() && !j.at("points").empty() && j.at("points")[0].is_number())
      points = vector_from_json(j.at("points"));
    Vector weights = j.contains("weights")
                         ? vector_from_json(j.at("weights"))
                         : Vector::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
    return DiscreteMeasure(std::move(points), std::move(weights));
  }
  if (type == "gaussian") {
    return GaussianMeasure(vector_from_json(j.at("mean")), matrix_from_json(j.at("cov")));
  }
  fail(ErrorCode::InvalidMeasure, "unknown measure type '" + type + "'");
}

}  // namespace wflow
