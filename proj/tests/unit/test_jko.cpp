#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wflow/certificates.hpp"
#include "wflow/functionals.hpp"
#include "wflow/inner_solver.hpp"
#include "wflow/jko.hpp"
#include "wflow/transport.hpp"

using namespace wflow;

namespace {

Functional half_square() { return Functional::potential(PotentialSpec::quadratic_isotropic(1.0, Vector::Zero(1))); }

double at(const Measure& mu) { return std::get<DiscreteMeasure>(mu).points()(0, 0); }

// Backward entropy step on a 1D std-dev s: minimize −½log v + (√v − s)²/(2τ).
double entropy_step_oracle(double s, double tau) {
  const double u = oracle::argmin_1d([&](double r) { return -std::log(r) + (r - s) * (r - s) / (2 * tau); }, 1e-6,
                                     s + 10.0 * (1.0 + std::sqrt(tau)));
  return u;
}

}  // namespace

TEST_CASE("jko_potential documented examples") {
  const Measure d1 = DiscreteMeasure::dirac(Vector::Ones(1));
  const double ref = oracle::argmin_1d([](double y) { return 0.5 * y * y + 0.5 * (y - 1.0) * (y - 1.0); }, -3, 3);
  CHECK(at(jko_potential(d1, 1.0, PotentialSpec::quadratic_isotropic(1.0, Vector::Zero(1)))) ==
        doctest::Approx(ref).epsilon(1e-8));

  Rng rng(41);
  const Measure cloud = testutil::random_cloud(rng, 5, 2);
  CHECK(std::get<DiscreteMeasure>(jko_potential(cloud, 0.7, PotentialSpec::zero(2))) == std::get<DiscreteMeasure>(cloud));

  const Measure d2 = DiscreteMeasure::dirac(Vector::Constant(1, 2.0));
  const double soft = oracle::argmin_1d([](double y) { return std::abs(y) + 0.5 * (y - 2.0) * (y - 2.0); }, -3, 3);
  CHECK(at(jko_potential(d2, 1.0, PotentialSpec::absolute_value(1.0, 1))) == doctest::Approx(soft).epsilon(1e-8));

  PotentialSpec::Options no_prox;
  no_prox.gradient = [](const Vector& x) { return Vector(4.0 * x.array().cube()); };
  const PotentialSpec quartic(1, [](const Vector& x) { return std::pow(x[0], 4); }, no_prox);
  CHECK_CODE(jko_potential(d1, 1.0, quartic), ErrorCode::ProxUnavailable);
}

TEST_CASE("jko_gaussian_entropy documented examples") {
  const auto out = jko_gaussian_entropy(GaussianMeasure::standard(1), 2.0);
  const double u = entropy_step_oracle(1.0, 2.0);
  CHECK(std::sqrt(out.cov()(0, 0)) == doctest::Approx(u).epsilon(1e-8));
  CHECK(out.cov()(0, 0) == doctest::Approx(4.0).epsilon(1e-14));

  const auto tiny = jko_gaussian_entropy(GaussianMeasure::from_1d(0.0, 2.25), 1e-8);
  CHECK(std::abs(std::sqrt(tiny.cov()(0, 0)) - 1.5) <= 1e-4);

  const auto shifted = jko_gaussian_entropy(GaussianMeasure::from_1d(7.0, 1.0), 2.0);
  CHECK(shifted.mean()[0] == 7.0);
  CHECK(shifted.cov()(0, 0) == out.cov()(0, 0));
}

TEST_CASE("jko_gaussian_entropy acts per eigendirection") {
  Rng rng(42);
  for (int k = 0; k < 10; ++k) {
    const auto g = testutil::random_gaussian(rng, 3);
    const double tau = 0.1 + rng.uniform();
    const auto out = jko_gaussian_entropy(g, tau);
    const auto& sp = g.spectrum();
    const Matrix back = sp.vectors.transpose() * out.cov() * sp.vectors;
    for (int i = 0; i < 3; ++i) {
      const double s = std::sqrt(sp.values[i]);
      CHECK(std::sqrt(back(i, i)) == doctest::Approx(entropy_step_oracle(s, tau)).epsilon(1e-7));
    }
    CHECK(testutil::max_abs(back - Matrix(back.diagonal().asDiagonal())) <= 1e-10);
  }
}

TEST_CASE("free-energy exact step minimizes the scalar objective") {
  // 1D: λ(m−b)²/2 + λu²/2 − log u + ((m−m0)² + (u−s)²)/(2τ)
  const double lam = 2.0, b = 1.0, m0 = 3.0, s = 0.4, tau = 0.5;
  const auto out = std::get<GaussianMeasure>(exact_jko(GaussianMeasure::from_1d(m0, s * s), tau,
                                                       Functional::free_energy(lam, Vector::Constant(1, b))));
  auto objective = [&](const std::vector<double>& p) {
    const double m = p[0], u = std::abs(p[1]);
    return 0.5 * lam * (m - b) * (m - b) + 0.5 * lam * u * u - std::log(u) + ((m - m0) * (m - m0) + (u - s) * (u - s)) / (2 * tau);
  };
  const auto best = oracle::argmin_nd(objective, {m0, s}, 2.0);
  CHECK(out.mean()[0] == doctest::Approx(best[0]).epsilon(1e-6));
  CHECK(std::sqrt(out.cov()(0, 0)) == doctest::Approx(std::abs(best[1])).epsilon(1e-6));
}

TEST_CASE("exact mode dispatches bit for bit") {
  Rng rng(43), step_rng(1);
  const auto g = PotentialSpec::quadratic_isotropic(0.8, rng.normal_vector(2));
  const Measure cloud = testutil::random_cloud(rng, 6, 2);
  const auto r = jko_step(cloud, 0.3, Functional::potential(g), StepModeSpec::exact(), step_rng);
  CHECK(std::get<DiscreteMeasure>(r.output) == std::get<DiscreteMeasure>(jko_potential(cloud, 0.3, g)));
  CHECK(r.certified_w2_error == 0.0);

  const auto gauss = testutil::random_gaussian(rng, 2);
  const auto e = jko_step(gauss, 0.3, Functional::entropy(), StepModeSpec::exact(), step_rng);
  CHECK(std::get<GaussianMeasure>(e.output) == jko_gaussian_entropy(gauss, 0.3));
  CHECK(e.certified_w2_error == 0.0);
}

TEST_CASE("distance mode translates by exactly epsilon") {
  Rng rng(44);
  const Measure d1 = DiscreteMeasure::dirac(Vector::Ones(1));
  const auto r = jko_step(d1, 1.0, half_square(), StepModeSpec::distance(0.1), rng);
  CHECK(w2(r.output, DiscreteMeasure::dirac(Vector::Constant(1, 0.5))) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(*r.certified_w2_error <= 0.1);
  REQUIRE(r.exact_output);
  CHECK(at(*r.exact_output) == 0.5);

  for (int k = 0; k < 10; ++k) {
    const int d = 1 + k % 3;
    const Measure g = testutil::random_gaussian(rng, d);
    const double eps = 0.01 + rng.uniform();
    const auto s = jko_step(g, 0.4, Functional::entropy(), StepModeSpec::distance(eps), rng);
    CHECK(w2(s.output, *s.exact_output) == doctest::Approx(eps).epsilon(1e-12));
    CHECK(*s.certified_w2_error == eps);
  }
  CHECK_CODE(jko_step(d1, 1.0, half_square(), StepModeSpec::distance(-1.0), rng), ErrorCode::InvalidConfig);
  CHECK_CODE(jko_step(d1, 0.0, half_square(), StepModeSpec::exact(), rng), ErrorCode::InvalidConfig);
}

TEST_CASE("variational mode certifies the energy gap and the implied distance") {
  Rng rng(45);
  struct Case {
    Measure mu;
    Functional f;
  };
  std::vector<Case> cases;
  cases.push_back({testutil::random_gaussian(rng, 1), Functional::entropy()});
  cases.push_back({testutil::random_gaussian(rng, 3), Functional::entropy()});
  cases.push_back({GaussianMeasure(rng.normal_vector(2), 0.3 * Matrix::Identity(2, 2)), Functional::free_energy(1.5, rng.normal_vector(2))});
  cases.push_back({testutil::random_cloud(rng, 6, 2), Functional::potential(PotentialSpec::quadratic(QuadraticForm{testutil::random_spd(rng, 2), rng.normal_vector(2), 0.0}))});
  {
    // the (m, u) parametrization needs a covariance sharing the curvature's eigenbasis
    const Matrix A = testutil::random_spd(rng, 2);
    const GaussianMeasure g(rng.normal_vector(2), 0.5 * A * A + 0.1 * Matrix::Identity(2, 2));
    cases.push_back({g, Functional::potential(PotentialSpec::quadratic(QuadraticForm{A, rng.normal_vector(2), 0.0}))});
  }
  for (const auto& c : cases) {
    for (double eps : {0.3, 0.05, 1e-3}) {
      const double tau = 0.25 + rng.uniform();
      const auto r = jko_step(c.mu, tau, c.f, StepModeSpec::variational(eps), rng);
      REQUIRE(r.certified_energy_gap);
      REQUIRE(r.exact_output);
      CHECK(*r.certified_energy_gap <= eps * eps / (2 * tau));
      const double actual_gap = jko_energy(c.mu, r.output, tau, c.f) - jko_energy(c.mu, *r.exact_output, tau, c.f);
      CHECK(actual_gap >= -1e-12);
      CHECK(actual_gap <= *r.certified_energy_gap + 1e-12);
      CHECK(w2(r.output, *r.exact_output) <= eps + 1e-6);
      CHECK(*r.certified_w2_error <= eps + 1e-12);
    }
  }
  CHECK_CODE(jko_step(cases[0].mu, 1.0, Functional::entropy(), StepModeSpec::variational(0.0), rng), ErrorCode::InvalidConfig);
}

TEST_CASE("inner solver cap raises InnerSolverStalled") {
  Rng rng(46);
  const Measure g = GaussianMeasure::from_1d(0.0, 9.0);
  CHECK_CODE(jko_step(g, 1.0, Functional::entropy(), StepModeSpec::variational(1e-6), rng, InnerSolverOptions{1}),
             ErrorCode::InnerSolverStalled);
}

TEST_CASE("unsupported exact solves") {
  Rng rng(47);
  const Measure cloud = testutil::random_cloud(rng, 3, 1);
  CHECK_CODE(exact_jko(cloud, 1.0, Functional::entropy()), ErrorCode::NoExactSolver);
  CHECK_CODE(exact_jko(cloud, 1.0, Functional::interaction(InteractionKernel::quadratic(1.0))), ErrorCode::NoExactSolver);
  Matrix A(2, 2);
  A << 2.0, 0.0, 0.0, 1.0;
  Matrix S(2, 2);
  S << 1.0, 0.5, 0.5, 1.0;
  const auto f = Functional::sum({Functional::potential(PotentialSpec::quadratic(QuadraticForm{A, Vector::Zero(2), 0.0})), Functional::entropy()});
  CHECK_CODE(exact_jko(GaussianMeasure(Vector::Zero(2), S), 1.0, f), ErrorCode::NoExactSolver);
  CHECK_FALSE(common_basis(GaussianMeasure(Vector::Zero(2), S), A).commuting);
  CHECK(common_basis(GaussianMeasure(Vector::Zero(2), S), Matrix::Identity(2, 2)).commuting);
}

TEST_CASE("jko_energy examples and minimality") {
  const Measure d1 = DiscreteMeasure::dirac(Vector::Ones(1));
  const auto f = half_square();
  const Measure j = exact_jko(d1, 1.0, f);
  const double ref = oracle::min_1d([](double y) { return 0.5 * y * y + 0.5 * (y - 1.0) * (y - 1.0); }, -3, 3);
  CHECK(jko_energy(d1, j, 1.0, f) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(jko_energy(d1, j, 1.0, f) == 0.25);
  CHECK(jko_energy(d1, d1, 1.0, f) == eval(f, d1));

  Rng rng(48);
  const Measure cloud = testutil::random_cloud(rng, 4, 2);
  const auto g = Functional::potential(PotentialSpec::quadratic(QuadraticForm{testutil::random_spd(rng, 2), rng.normal_vector(2), 0.0}));
  const Measure jc = exact_jko(cloud, 0.6, g);
  const Measure gauss = testutil::random_gaussian(rng, 2);
  const auto fe = Functional::free_energy(0.7, rng.normal_vector(2));
  const Measure jg = exact_jko(gauss, 0.6, fe);
  for (int k = 0; k < 50; ++k) {
    const auto& dc = std::get<DiscreteMeasure>(jc);
    Matrix pts = dc.points() + 0.1 * Matrix::NullaryExpr(dc.size(), 2, [&] { return rng.normal(); });
    CHECK(jko_energy(cloud, jc, 0.6, g) <= jko_energy(cloud, DiscreteMeasure(pts, dc.weights()), 0.6, g) + 1e-12);
    const auto& gg = std::get<GaussianMeasure>(jg);
    const Matrix P = 0.1 * Matrix::NullaryExpr(2, 2, [&] { return rng.normal(); });
    const GaussianMeasure cand(gg.mean() + 0.1 * rng.normal_vector(2), gg.cov() + P * P.transpose());
    CHECK(jko_energy(gauss, jg, 0.6, fe) <= jko_energy(gauss, cand, 0.6, fe) + 1e-12);
  }
}

TEST_CASE("discrete EVI and contraction toward the minimizer") {
  Rng rng(49);
  for (int k = 0; k < 100; ++k) {
    const double tau = 0.05 + 2.0 * rng.uniform();
    Measure mu = DiscreteMeasure::dirac(Vector::Zero(1)), nu = mu;
    Functional f = Functional::entropy();
    if (k % 2 == 0) {
      f = Functional::potential(PotentialSpec::quadratic_isotropic(0.1 + rng.uniform(), rng.normal_vector(1)));
      mu = testutil::random_cloud(rng, 1 + k % 6, 1);
      nu = DiscreteMeasure::dirac(rng.normal_vector(1));
    } else {
      const int d = 1 + k % 3;
      f = Functional::free_energy(0.2 + rng.uniform(), rng.normal_vector(d));
      mu = testutil::random_gaussian(rng, d);
      nu = testutil::random_gaussian(rng, d);
    }
    const Measure j = exact_jko(mu, tau, f);
    CHECK(evi_residual_jko(mu, j, nu, tau, f) <= 1e-9);
    const Measure star = minimizer(f).argmin;
    CHECK(w2(j, star) <= w2(mu, star) + 1e-12);
  }
}

TEST_CASE("step mode names") {
  CHECK(step_mode_from_string("variational") == StepMode::Variational);
  CHECK(to_string(StepMode::Distance) == "distance");
  CHECK_CODE(step_mode_from_string("approximate"), ErrorCode::InvalidConfig);
}
