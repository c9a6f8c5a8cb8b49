#include "wflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "wflow/error.hpp"

namespace wflow {

namespace {

void check_exponent(double p) {
  if (!(p >= 1.0 && p <= 2.0)) fail(ErrorCode::InvalidConfig, "exponent p must lie in [1, 2]");
}

double ground_cost(const Vector& x, const Vector& y, double p) {
  const double sq = (x - y).squaredNorm();
  if (p == 2.0) return sq;
  return std::pow(std::sqrt(sq), p);
}

struct SortedAtoms {
  std::vector<double> x;
  std::vector<double> w;
};

// Stable sort on location; zero-weight atoms carry no mass and are skipped.
SortedAtoms sorted_atoms(const DiscreteMeasure& mu) {
  std::vector<int> order(static_cast<std::size_t>(mu.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto& pts = mu.points();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pts(a, 0) < pts(b, 0); });
  SortedAtoms out;
  for (int idx : order) {
    if (mu.weight(idx) <= 0.0) continue;
    out.x.push_back(pts(idx, 0));
    out.w.push_back(mu.weight(idx));
  }
  return out;
}

// Walks the merged cumulative partition of two 1D measures, calling
// visit(mass, x, y) for every piece of the quantile coupling.
template <typename Visit>
void merge_quantiles(const SortedAtoms& a, const SortedAtoms& b, Visit&& visit) {
  std::size_t i = 0, j = 0;
  double ra = a.w.empty() ? 0.0 : a.w[0];
  double rb = b.w.empty() ? 0.0 : b.w[0];
  while (i < a.w.size() && j < b.w.size()) {
    const double mass = std::min(ra, rb);
    if (mass > 0.0) visit(mass, a.x[i], b.x[j]);
    if (ra < rb) {
      rb -= ra;
      if (++i < a.w.size()) ra = a.w[i];
    } else if (rb < ra) {
      ra -= rb;
      if (++j < b.w.size()) rb = b.w[j];
    } else {
      if (++i < a.w.size()) ra = a.w[i];
      if (++j < b.w.size()) rb = b.w[j];
    }
  }
}

// Transportation simplex on a spanning-tree basis (u-v potentials, Dantzig
// entering rule, smallest-index leaving rule among ties).
class TransportationSimplex {
 public:
  TransportationSimplex(const Matrix& cost, const Vector& supply, const Vector& demand)
      : c_(cost), n_(static_cast<int>(cost.rows())), m_(static_cast<int>(cost.cols())),
        x_(Matrix::Zero(n_, m_)), basic_(n_, std::vector<char>(static_cast<std::size_t>(m_), 0)) {
    northwest_corner(supply, demand);
  }

  Matrix solve() {
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    const double tol = 1e-13 * scale;
    const long max_pivots = 50L * (n_ + m_) * (n_ + m_) + 1000;
    Vector u(n_), v(m_);
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      potentials(u, v);
      int ei = -1, ej = -1;
      double best = -tol;
      for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < m_; ++j) {
          if (basic_[i][j]) continue;
          const double reduced = c_(i, j) - u[i] - v[j];
          if (reduced < best) {
            best = reduced;
            ei = i;
            ej = j;
          }
        }
      }
      if (ei < 0) return x_;
      pivot_on(ei, ej);
    }
    throw NotConvergedError("transportation simplex exceeded pivot budget", 0.0,
                            static_cast<int>(max_pivots));
  }

 private:
  // Node ids: rows 0..n-1, columns n..n+m-1.
  void northwest_corner(Vector a, Vector b) {
    int i = 0, j = 0;
    for (;;) {
      const double flow = std::max(0.0, std::min(a[i], b[j]));
      x_(i, j) = flow;
      basic_[i][j] = 1;
      a[i] -= flow;
      b[j] -= flow;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (i == n_ - 1) {
        ++j;
      } else if (j == m_ - 1) {
        ++i;
      } else if (a[i] < b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void adjacency(std::vector<std::vector<int>>& adj) const {
    adj.assign(static_cast<std::size_t>(n_ + m_), {});
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < m_; ++j) {
        if (!basic_[i][j]) continue;
        adj[i].push_back(n_ + j);
        adj[n_ + j].push_back(i);
      }
    }
  }

  void potentials(Vector& u, Vector& v) const {
    std::vector<std::vector<int>> adj;
    adjacency(adj);
    std::vector<char> seen(static_cast<std::size_t>(n_ + m_), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      for (int next : adj[node]) {
        if (seen[next]) continue;
        seen[next] = 1;
        if (node < n_) {
          v[next - n_] = c_(node, next - n_) - u[node];
        } else {
          u[next] = c_(next, node - n_) - v[node - n_];
        }
        queue.push_back(next);
      }
    }
  }

  void pivot_on(int ei, int ej) {
    std::vector<std::vector<int>> adj;
    adjacency(adj);
    // Tree path from column ej back to row ei.
    std::vector<int> parent(static_cast<std::size_t>(n_ + m_), -1);
    std::vector<char> seen(static_cast<std::size_t>(n_ + m_), 0);
    std::deque<int> queue{n_ + ej};
    seen[n_ + ej] = 1;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      if (node == ei) break;
      for (int next : adj[node]) {
        if (seen[next]) continue;
        seen[next] = 1;
        parent[next] = node;
        queue.push_back(next);
      }
    }
    // Cells along the path, starting at the one adjacent to the entering cell.
    std::vector<std::pair<int, int>> cells;
    for (int node = ei; parent[node] != -1; node = parent[node]) {
      const int other = parent[node];
      const int row = node < n_ ? node : other;
      const int col = node < n_ ? other - n_ : node - n_;
      cells.emplace_back(row, col);
    }
    // cells run from row ei toward column ej; the cell touching row ei (first)
    // and every other one after it lose flow.
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      const double flow = x_(cells[k].first, cells[k].second);
      if (flow < theta) {
        theta = flow;
        leave = static_cast<int>(k);
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      auto& flow = x_(cells[k].first, cells[k].second);
      flow += (k % 2 == 0) ? -theta : theta;
    }
    x_(ei, ej) = theta;
    const auto [li, lj] = cells[static_cast<std::size_t>(leave)];
    x_(li, lj) = 0.0;
    basic_[li][lj] = 0;
    basic_[ei][ej] = 1;
  }

  const Matrix& c_;
  int n_;
  int m_;
  Matrix x_;
  std::vector<std::vector<char>> basic_;
};

}  // namespace

double TransportPlan::distance() const { return std::pow(std::max(cost, 0.0), 1.0 / p); }

double TransportPlan::marginal_residual() const {
  const double r = (coupling.rowwise().sum() - rows.weights()).cwiseAbs().maxCoeff();
  const double c = (coupling.colwise().sum().transpose() - cols.weights()).cwiseAbs().maxCoeff();
  return std::max(r, c);
}

nlohmann::json to_json(const TransportPlan& plan) {
  return {{"rows", to_json(Measure(plan.rows))},
          {"cols", to_json(Measure(plan.cols))},
          {"coupling", matrix_to_json(plan.coupling)},
          {"cost", plan.cost},
          {"p", plan.p}};
}

double wp_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  check_exponent(p);
  if (mu.dim() != 1 || nu.dim() != 1)
    fail(ErrorCode::DimensionMismatch, "wp_1d requires one-dimensional measures");
  double acc = 0.0;
  merge_quantiles(sorted_atoms(mu), sorted_atoms(nu), [&](double mass, double x, double y) {
    const double gap = std::abs(x - y);
    acc += mass * (p == 2.0 ? gap * gap : std::pow(gap, p));
  });
  return std::pow(acc, 1.0 / p);
}

TransportPlan wp_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                          long cap) {
  check_exponent(p);
  if (mu.dim() != nu.dim()) fail(ErrorCode::DimensionMismatch, "measures live in different dimensions");
  const long entries = static_cast<long>(mu.size()) * static_cast<long>(nu.size());
  if (entries > cap)
    fail(ErrorCode::SizeCapExceeded, std::to_string(entries) + " plan entries exceed cap " + std::to_string(cap));
  Matrix cost(mu.size(), nu.size());
  for (int i = 0; i < mu.size(); ++i) {
    const Vector x = mu.point(i);
    for (int j = 0; j < nu.size(); ++j) cost(i, j) = ground_cost(x, nu.point(j), p);
  }
  TransportationSimplex simplex(cost, mu.weights(), nu.weights());
  Matrix coupling = simplex.solve().cwiseMax(0.0);
  const double total = coupling.cwiseProduct(cost).sum();
  return TransportPlan{mu, nu, std::move(coupling), std::max(total, 0.0), p};
}

TransportPlan w2_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu, long cap) {
  return wp_discrete(mu, nu, 2.0, cap);
}

Assignment optimal_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.size() != nu.size() || !mu.has_equal_weights() || !nu.has_equal_weights())
    fail(ErrorCode::InvalidMeasure, "assignment needs equal-size uniform supports");
  const TransportPlan plan = w2_discrete(mu, nu);
  Assignment match(static_cast<std::size_t>(mu.size()));
  for (int i = 0; i < mu.size(); ++i) {
    Eigen::Index j;
    plan.coupling.row(i).maxCoeff(&j);
    match[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return match;
}

SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double reg,
                           int max_iter, double tol) {
  if (!(reg > 0.0)) fail(ErrorCode::InvalidConfig, "Sinkhorn regularization must be positive");
  if (mu.dim() != nu.dim()) fail(ErrorCode::DimensionMismatch, "measures live in different dimensions");
  const int n = mu.size();
  const int m = nu.size();
  Matrix cost(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) cost(i, j) = (mu.point(i) - nu.point(j)).squaredNorm();
  const Vector& a = mu.weights();
  const Vector& b = nu.weights();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Vector log_a(n), log_b(m);
  for (int i = 0; i < n; ++i) log_a[i] = a[i] > 0.0 ? std::log(a[i]) : neg_inf;
  for (int j = 0; j < m; ++j) log_b[j] = b[j] > 0.0 ? std::log(b[j]) : neg_inf;

  auto logsumexp = [](const Vector& z) {
    const double mx = z.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((z.array() - mx).exp().sum());
  };

  Vector f = Vector::Zero(n), g = Vector::Zero(m);
  Vector work_m(m), work_n(n);
  double eps = reg;
  auto plan_entry = [&](int i, int j) {
    return std::exp((f[i] + g[j] - cost(i, j)) / eps + log_a[i] + log_b[j]);
  };
  auto row_residual = [&] {
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
      if (a[i] <= 0.0) continue;
      double row = 0.0;
      for (int j = 0; j < m; ++j) row += b[j] > 0.0 ? plan_entry(i, j) : 0.0;
      r += std::abs(row - a[i]);
    }
    return r;
  };

  // Small reg makes plain iterations crawl (near-deterministic plans converge
  // like 1/k), so anneal from the cost scale and warm-start the potentials.
  std::vector<double> stages;
  for (double e = std::max(cost.maxCoeff(), reg); e > reg; e *= 0.5) stages.push_back(e);
  stages.push_back(reg);

  SinkhornResult out;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    eps = stages[s];
    const bool last = s + 1 == stages.size();
    const double stage_tol = last ? tol : std::max(tol, 1e-6);
    for (;;) {
      if (it >= max_iter) throw NotConvergedError("Sinkhorn did not reach tolerance", residual, it);
      ++it;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) work_m[j] = (g[j] - cost(i, j)) / eps + log_b[j];
        f[i] = -eps * logsumexp(work_m);
      }
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) work_n[i] = (f[i] - cost(i, j)) / eps + log_a[i];
        g[j] = -eps * logsumexp(work_n);
      }
      // Columns are exact after the g-update; rows carry the residual.
      residual = row_residual();
      if (residual <= stage_tol) break;
    }
  }
  out.iterations = it;

  out.plan = Matrix::Zero(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (a[i] > 0.0 && b[j] > 0.0) out.plan(i, j) = plan_entry(i, j);
  out.cost = out.plan.cwiseProduct(cost).sum();
  out.row_residual = (out.plan.rowwise().sum() - a).cwiseAbs().sum();
  out.col_residual = (out.plan.colwise().sum().transpose() - b).cwiseAbs().sum();
  return out;
}

double GaussianTransport::distance() const { return std::sqrt(std::max(squared, 0.0)); }

namespace {

double bures_squared(const GaussianMeasure& g1, const GaussianMeasure& g2, Matrix* root_out) {
  const Matrix s1 = g1.sqrt_cov();
  const Matrix middle = s1 * g2.cov() * s1;
  const Matrix root = sym_sqrt(middle);
  if (root_out) *root_out = root;
  const double sq = (g1.mean() - g2.mean()).squaredNorm() + g1.cov().trace() + g2.cov().trace() -
                    2.0 * root.trace();
  return std::max(sq, 0.0);
}

}  // namespace

AffineMap bures_map(const GaussianMeasure& g1, const GaussianMeasure& g2) {
  if (g1.dim() != g2.dim()) fail(ErrorCode::DimensionMismatch, "Gaussians of different dimension");
  const Matrix inv_s1 = g1.inv_sqrt_cov();
  const Matrix s1 = g1.sqrt_cov();
  Matrix linear = inv_s1 * sym_sqrt(s1 * g2.cov() * s1) * inv_s1;
  linear = (0.5 * (linear + linear.transpose())).eval();
  return AffineMap{linear, g2.mean() - linear * g1.mean()};
}

GaussianTransport w2_gaussian(const GaussianMeasure& g1, const GaussianMeasure& g2) {
  if (g1.dim() != g2.dim()) fail(ErrorCode::DimensionMismatch, "Gaussians of different dimension");
  GaussianTransport out;
  out.squared = bures_squared(g1, g2, nullptr);
  if (g1.is_regular()) out.map = bures_map(g1, g2);
  return out;
}

DiscreteMeasure gaussian_quantiles_1d(const GaussianMeasure& g, int grid) {
  if (g.dim() != 1) fail(ErrorCode::DimensionMismatch, "quantile discretization needs d = 1");
  const boost::math::normal_distribution<double> standard;
  const double sd = std::sqrt(std::max(g.cov()(0, 0), 0.0));
  Matrix pts(grid, 1);
  for (int k = 0; k < grid; ++k) {
    const double t = (k + 0.5) / grid;
    pts(k, 0) = g.mean()[0] + sd * boost::math::quantile(standard, t);
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

DiscreteMeasure canonical_1d(const DiscreteMeasure& mu) {
  if (mu.dim() != 1) fail(ErrorCode::DimensionMismatch, "canonical_1d requires d = 1");
  const SortedAtoms atoms = sorted_atoms(mu);
  std::vector<double> xs, ws;
  for (std::size_t k = 0; k < atoms.x.size(); ++k) {
    if (!xs.empty() && xs.back() == atoms.x[k]) {
      ws.back() += atoms.w[k];
    } else {
      xs.push_back(atoms.x[k]);
      ws.push_back(atoms.w[k]);
    }
  }
  return DiscreteMeasure::from_1d(xs, ws);
}

DiscreteMeasure barycenter_1d(const std::vector<DiscreteMeasure>& measures,
                              const std::vector<double>& weights) {
  if (measures.empty() || measures.size() != weights.size())
    fail(ErrorCode::InvalidConfig, "barycenter needs one weight per measure");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) fail(ErrorCode::InvalidConfig, "barycenter weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightRenormalizeTolerance)
    fail(ErrorCode::InvalidConfig, "barycenter weights must sum to 1");
  std::vector<SortedAtoms> atoms;
  std::vector<double> breaks{0.0};
  for (const auto& mu : measures) {
    if (mu.dim() != 1) fail(ErrorCode::DimensionMismatch, "barycenter_1d requires d = 1");
    atoms.push_back(sorted_atoms(mu));
    double cum = 0.0;
    for (double w : atoms.back().w) {
      cum += w;
      breaks.push_back(cum);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double top = breaks.back();

  // Quantile function on the half-open interval [t_k, t_{k+1}), evaluated at
  // the interval midpoint.
  auto quantile = [](const SortedAtoms& a, double t) {
    double cum = 0.0;
    for (std::size_t k = 0; k < a.w.size(); ++k) {
      cum += a.w[k];
      if (t < cum) return a.x[k];
    }
    return a.x.back();
  };

  std::vector<double> xs, ws;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = breaks[k];
    const double hi = std::min(breaks[k + 1], top);
    if (hi - lo <= 0.0) continue;
    const double mid = 0.5 * (lo + hi);
    double x = 0.0;
    for (std::size_t s = 0; s < atoms.size(); ++s) x += weights[s] * quantile(atoms[s], mid);
    if (!xs.empty() && xs.back() == x) {
      ws.back() += hi - lo;
    } else {
      xs.push_back(x);
      ws.push_back(hi - lo);
    }
  }
  return DiscreteMeasure::from_1d(xs, ws);
}

double w2_squared(const Measure& a, const Measure& b) {
  if (dim(a) != dim(b)) fail(ErrorCode::DimensionMismatch, "measures live in different dimensions");
  const auto* da = std::get_if<DiscreteMeasure>(&a);
  const auto* db = std::get_if<DiscreteMeasure>(&b);
  const auto* ga = std::get_if<GaussianMeasure>(&a);
  const auto* gb = std::get_if<GaussianMeasure>(&b);
  if (da && db) {
    if (da->dim() == 1) {
      const double w = wp_1d(*da, *db, 2.0);
      return w * w;
    }
    if (da->size() == 1 || db->size() == 1) {
      // Only one coupling exists.
      const DiscreteMeasure& spread = da->size() == 1 ? *db : *da;
      const Vector point = (da->size() == 1 ? *da : *db).point(0);
      return (spread.points().rowwise() - point.transpose()).rowwise().squaredNorm().dot(spread.weights());
    }
    return w2_discrete(*da, *db).cost;
  }
  if (ga && gb) return w2_gaussian(*ga, *gb).squared;
  const DiscreteMeasure& d = da ? *da : *db;
  const GaussianMeasure& g = ga ? *ga : *gb;
  if (d.size() == 1) return (d.point(0) - g.mean()).squaredNorm() + g.cov().trace();
  if (d.dim() == 1) {
    const double w = wp_1d(d, gaussian_quantiles_1d(g), 2.0);
    return w * w;
  }
  fail(ErrorCode::DistanceUnsupported, "no W_2 solver for discrete vs Gaussian in d > 1");
}

double w2(const Measure& a, const Measure& b) { return std::sqrt(std::max(w2_squared(a, b), 0.0)); }

double wp(const Measure& a, const Measure& b, double p) {
  check_exponent(p);
  if (p == 2.0) return w2(a, b);
  if (dim(a) != dim(b)) fail(ErrorCode::DimensionMismatch, "measures live in different dimensions");
  const auto* da = std::get_if<DiscreteMeasure>(&a);
  const auto* db = std::get_if<DiscreteMeasure>(&b);
  if (dim(a) == 1) {
    const DiscreteMeasure qa = da ? *da : gaussian_quantiles_1d(std::get<GaussianMeasure>(a));
    const DiscreteMeasure qb = db ? *db : gaussian_quantiles_1d(std::get<GaussianMeasure>(b));
    return wp_1d(qa, qb, p);
  }
  if (da && db) return wp_discrete(*da, *db, p).distance();
  // W_p ≤ W_2 for p ≤ 2.
  return w2(a, b);
}

}  // namespace wflow
