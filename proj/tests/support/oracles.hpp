#pragma once
// Brute-force reference computations for tests. Nothing here calls into the
// library, so an agreement is a genuine cross-check.
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

// Golden-section refinement after a coarse grid scan on [lo, hi].
inline double argmin_1d(const std::function<double(double)>& f, double lo, double hi, int grid = 2001) {
  double best = lo, best_val = f(lo);
  const double h = (hi - lo) / (grid - 1);
  for (int i = 1; i < grid; ++i) {
    const double x = lo + i * h;
    const double v = f(x);
    if (v < best_val) best_val = v, best = x;
  }
  double a = std::max(lo, best - h), b = std::min(hi, best + h);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double min_1d(const std::function<double(double)>& f, double lo, double hi) { return f(argmin_1d(f, lo, hi)); }

// Coordinate descent with 1D oracle minimization; fine for smooth convex objectives in 2-3 variables.
inline std::vector<double> argmin_nd(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                     double radius, int sweeps = 60) {
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto line = [&](double t) {
        auto y = x;
        y[k] = t;
        return f(y);
      };
      x[k] = argmin_1d(line, x[k] - radius, x[k] + radius, 401);
    }
    radius = std::max(radius * 0.5, 1e-6);
  }
  return x;
}

// Minimum of a linear cost over the 2x2 transportation polytope by vertex enumeration.
inline double polytope_2x2(const double a[2], const double b[2], const double C[2][2]) {
  const double lo = std::max(0.0, a[0] - b[1]), hi = std::min(a[0], b[0]);
  auto cost = [&](double t) {
    const double p00 = t, p01 = a[0] - t, p10 = b[0] - t, p11 = a[1] - b[0] + t;
    return p00 * C[0][0] + p01 * C[0][1] + p10 * C[1][0] + p11 * C[1][1];
  };
  return std::min(cost(lo), cost(hi));
}

// For uniform weights on equal-size supports the LP optimum sits at a permutation.
inline double best_permutation_cost(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y) {
  std::vector<int> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t k = 0; k < x[i].size(); ++k) c += std::pow(x[i][k] - y[perm[i]][k], 2);
    best = std::min(best, c / x.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Generalized inverse CDF of a 1D discrete measure at t in (0,1).
inline double quantile(const std::vector<std::pair<double, double>>& atoms, double t) {
  auto sorted = atoms;
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (const auto& [x, w] : sorted) {
    acc += w;
    if (t <= acc) return x;
  }
  return sorted.back().first;
}

// Midpoint rule on the quantile coupling; error is O(1/grid) near atom boundaries.
inline double quantile_wp(const std::vector<std::pair<double, double>>& a, const std::vector<std::pair<double, double>>& b,
                          double p, int grid = 200000) {
  double s = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double t = (i + 0.5) / grid;
    s += std::pow(std::abs(quantile(a, t) - quantile(b, t)), p);
  }
  return std::pow(s / grid, 1.0 / p);
}

// Composite Simpson rule.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 20000) {
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

// ∫ρ log ρ for N(m, s²) by quadrature.
inline double gaussian_neg_entropy_quadrature(double m, double s) {
  const double pi = std::acos(-1.0);
  auto rho = [&](double x) { return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * pi)); };
  return simpson([&](double x) {
    const double r = rho(x);
    return r > 0.0 ? r * std::log(r) : 0.0;
  }, m - 14.0 * s, m + 14.0 * s);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Partial sum of a sequence, Kahan-compensated.
inline double partial_sum(const std::function<double(long)>& term, long from, long to) {
  double s = 0.0, c = 0.0;
  for (long n = from; n < to; ++n) {
    const double y = term(n) - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

}  // namespace oracle
