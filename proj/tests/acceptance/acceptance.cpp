// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "wflow/certificates.hpp"
#include "wflow/harness.hpp"
#include "wflow/jko.hpp"
#include "wflow/proxgrad.hpp"
#include "wflow/schedules.hpp"
#include "wflow/transport.hpp"

using nlohmann::json;
using namespace wflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < budget_s;
  const bool ok = out.pass && in_time;
  if (!ok) ++failures;
  std::ostringstream line;
  line.precision(3);
  line << (ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << "  [" << out.detail << "; "
       << std::fixed << secs << " s of " << budget_s << " s" << (in_time ? "" : ", over budget") << "]";
  std::cout << line.str() << std::endl;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Matrix random_spd(Rng& rng, int d, double floor = 0.2) {
  Matrix m = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
  return m * m.transpose() / d + floor * Matrix::Identity(d, d);
}

Matrix random_rotation(Rng& rng, int d) {
  Matrix m = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(d, d);
}

DiscreteMeasure random_cloud(Rng& rng, int n, int d, double spread = 1.0) {
  Matrix pts(n, d);
  for (int i = 0; i < n; ++i) pts.row(i) = spread * rng.normal_vector(d).transpose();
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.1 + rng.uniform();
  w /= w.sum();
  return DiscreteMeasure(std::move(pts), std::move(w));
}

json distance_run_config() {
  return json::parse(R"({
    "algorithm": "jko",
    "functional": {"functional": "quadratic", "lambda": 1.0, "b": [0.0]},
    "initial": {"type": "discrete", "points": [[1.0]], "weights": [1.0]},
    "steps": {"family": "constant", "tau": 1.0},
    "mode": {"mode": "distance", "epsilon_schedule": {"family": "power", "c": 0.1, "beta": 1.5}},
    "iterations": 500,
    "seed": 20240917
  })");
}

json ula_config() {
  return json::parse(R"({
    "algorithm": "ula",
    "F": {"functional": "quadratic", "lambda": 1.0, "b": [0.0]},
    "initial": {"type": "replicated", "point": [0.0], "count": 10000},
    "steps": {"family": "power", "c": 0.05, "alpha": 0.6},
    "iterations": 2000,
    "store_every": 500,
    "seed": 7
  })");
}

}  // namespace

int main() {
  std::cout << "acceptance suite\n";

  criterion(1, "exact JKO rate constant sup sigma*gap <= 0.5", 1.0, [] {
    json cfg = json::parse(R"({
      "algorithm": "jko",
      "functional": {"functional": "quadratic", "lambda": 1.0, "b": [0.0]},
      "initial": {"type": "discrete", "points": [[1.0]], "weights": [1.0]},
      "steps": {"family": "constant", "tau": 1.0},
      "mode": "exact", "iterations": 30, "seed": 0})");
    const Trace t = run(ExperimentConfig::from_json(cfg, false));
    const RateCertificate rc = rate_certificate(t, RateTarget::ExactStepValues);
    const bool ok = rc.sup <= 0.5 + 1e-9 && rc.check.pass && rc.exact_constant && *rc.exact_constant == 0.5;
    return Outcome{ok, "sup=" + fmt(rc.sup) + ", constant W2^2(mu0,mu*)/2=" + fmt(rc.exact_constant.value_or(-1))};
  });

  criterion(2, "discrete EVI sweep, 500 triples, residual <= 1e-9", 10.0, [] {
    Rng rng(2);
    double worst = -1e300;
    for (int k = 0; k < 500; ++k) {
      const double tau = 0.05 + 2.0 * rng.uniform();
      Measure mu = DiscreteMeasure::dirac(Vector::Zero(1)), nu = mu;
      Functional G = Functional::entropy();
      switch (k % 5) {
        case 0: {  // quadratic potential, 1D clouds
          const double lam = 0.1 + 2.0 * rng.uniform();
          G = Functional::potential(PotentialSpec::quadratic_isotropic(lam, rng.normal_vector(1)));
          mu = random_cloud(rng, 1 + static_cast<int>(rng.uniform() * 8), 1);
          nu = random_cloud(rng, 1 + static_cast<int>(rng.uniform() * 8), 1);
          break;
        }
        case 1: {  // anisotropic quadratic, 2D clouds (exact LP)
          Rng sub = rng.split(k);
          const Matrix A = random_spd(sub, 2);
          G = Functional::potential(PotentialSpec::quadratic(QuadraticForm{A, sub.normal_vector(2), 0.0}));
          mu = random_cloud(sub, 1 + static_cast<int>(sub.uniform() * 5), 2);
          nu = random_cloud(sub, 1 + static_cast<int>(sub.uniform() * 5), 2);
          break;
        }
        case 2: {  // entropy on Gaussians
          const int d = 1 + static_cast<int>(rng.uniform() * 3);
          mu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          nu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          break;
        }
        case 3: {  // quadratic potential on Gaussians
          const int d = 1 + static_cast<int>(rng.uniform() * 3);
          G = Functional::potential(PotentialSpec::quadratic(QuadraticForm{random_spd(rng, d), rng.normal_vector(d), 0.3}));
          mu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          nu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          break;
        }
        default: {  // free energy on Gaussians
          const int d = 1 + static_cast<int>(rng.uniform() * 3);
          G = Functional::free_energy(0.2 + 2.0 * rng.uniform(), rng.normal_vector(d));
          mu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          nu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
          break;
        }
      }
      const Measure j = exact_jko(mu, tau, G);
      worst = std::max(worst, evi_residual_jko(mu, j, nu, tau, G));
    }
    return Outcome{worst <= 1e-9, "max residual=" + fmt(worst)};
  });

  criterion(3, "refined PG EVI, free energy, 500 Gaussian pairs x tau in {0.1,0.5,0.9}", 10.0, [] {
    Rng rng(3);
    double worst = -1e300;
    for (int k = 0; k < 500; ++k) {
      const int d = 1 + k % 3;
      const Vector b = rng.normal_vector(d);
      const PgProblem prob = PgProblem::make(PotentialSpec::quadratic_isotropic(1.0, b), Functional::entropy());
      const Functional G = prob.G();
      const Measure mu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
      const Measure nu = GaussianMeasure(rng.normal_vector(d), random_spd(rng, d, 0.05));
      for (double tau : {0.1, 0.5, 0.9}) {
        const Measure t = pg_exact(mu, tau, prob);
        worst = std::max(worst, evi_residual_pg(mu, t, nu, tau, prob.lambda, prob.L, G));
      }
    }
    return Outcome{worst <= 1e-9, "max residual=" + fmt(worst)};
  });

  criterion(4, "PG fixed point equals the minimizer; convergence from N(0,4)", 1.0, [] {
    const PgProblem prob = PgProblem::make(PotentialSpec::quadratic_isotropic(1.0, Vector::Zero(1)), Functional::entropy());
    const GaussianMeasure target = GaussianMeasure::standard(1);
    const auto oracle = minimizer(prob.G());
    double param_err = 0.0;
    for (int i = 1; i <= 9; ++i) {
      const auto t = std::get<GaussianMeasure>(pg_exact(target, 0.1 * i, prob));
      param_err = std::max({param_err, (t.mean() - target.mean()).cwiseAbs().maxCoeff(),
                            (t.cov() - target.cov()).cwiseAbs().maxCoeff()});
    }
    const bool oracle_ok = std::get<GaussianMeasure>(oracle.argmin) == target;
    Measure mu = GaussianMeasure::from_1d(0.0, 4.0);
    int reached = -1;
    for (int n = 1; n <= 200; ++n) {
      mu = pg_exact(mu, 0.5, prob);
      if (w2(mu, target) <= 1e-6) {
        reached = n;
        break;
      }
    }
    const bool ok = param_err <= 1e-12 && oracle_ok && reached > 0;
    return Outcome{ok, "fixed-point parameter error=" + fmt(param_err) + ", W2<=1e-6 at n=" + std::to_string(reached)};
  });

  Trace distance_trace;
  criterion(5, "distance-type inexact JKO, N=500", 30.0, [&] {
    const ExperimentConfig cfg = ExperimentConfig::from_json(distance_run_config(), false);
    const ConditionReport cond = conditions_for(cfg);
    distance_trace = run(cfg);
    const Trace& t = distance_trace;
    const CheckResult fejer = fejer_check(t);
    const RegularityResult reg = asymptotic_regularity(t);
    const RateCertificate rc = rate_certificate(t, RateTarget::ExactStepValues);
    const double w1_final = t.final->w1_star.value();
    const bool ok = cond.all_hold() && fejer.pass && fejer.worst_margin >= -1e-9 && reg.check.pass &&
                    rc.check.pass && std::isfinite(rc.sup) && w1_final <= 1e-2;
    return Outcome{ok, std::string("conditions ") + (cond.all_hold() ? "hold" : "fail") +
                           ", fejer worst margin=" + fmt(fejer.worst_margin) + ", plateau " +
                           (reg.check.pass ? "yes" : "no") + ", sup sigma*gap=" + fmt(rc.sup) +
                           " (bound " + fmt(rc.bound.back()) + "), W1(mu_500,mu*)=" + fmt(w1_final)};
  });

  criterion(6, "variational-type inexact steps (PG free energy, entropy JKO, JKO free energy)", 60.0, [] {
    auto step_checks = [](const Trace& t, double& worst_gap, double& worst_w2) {
      bool ok = true;
      for (const auto& r : t.records) {
        const double gap_margin = r.eps * r.eps / (2.0 * r.tau) - r.certified_energy_gap.value_or(1e300);
        const double w2_margin = r.eps + 1e-6 - r.w2_out_step.value_or(1e300);
        worst_gap = std::min(worst_gap, gap_margin);
        worst_w2 = std::min(worst_w2, w2_margin - 1e-6);
        ok = ok && gap_margin >= 0.0 && w2_margin >= 0.0;
      }
      return ok;
    };
    double worst_gap = 1e300, worst_w2 = 1e300;
    // Forward-backward on the free energy; PG variational needs Σ n ε_n < ∞.
    json pg = json::parse(R"({
      "algorithm": "proxgrad",
      "F": {"functional": "quadratic", "lambda": 1.0, "b": [0.5, -1.0]},
      "H": "entropy_gaussian",
      "initial": {"type": "gaussian", "mean": [2.0, 0.0], "cov": [[4.0, 0.0], [0.0, 0.25]]},
      "steps": {"family": "constant", "tau": 0.5},
      "mode": {"mode": "variational", "epsilon_schedule": {"family": "power", "c": 0.1, "beta": 2.5}},
      "iterations": 200, "seed": 5})");
    const Trace tp = run(ExperimentConfig::from_json(pg, false));
    bool ok = step_checks(tp, worst_gap, worst_w2);
    const RateCertificate rp = rate_certificate(tp, RateTarget::IterateValues);
    json ent = json::parse(R"({
      "algorithm": "jko",
      "functional": "entropy_gaussian",
      "initial": {"type": "gaussian", "mean": [1.0, 0.0], "cov": [[2.0, 0.5], [0.5, 1.0]]},
      "steps": {"family": "constant", "tau": 0.25},
      "mode": {"mode": "variational", "epsilon_schedule": {"family": "power", "c": 0.05, "beta": 1.5}},
      "iterations": 200, "seed": 6})");
    const Trace te = run(ExperimentConfig::from_json(ent, false));
    ok = step_checks(te, worst_gap, worst_w2) && ok;
    json fe = json::parse(R"({
      "algorithm": "jko",
      "functional": {"functional": "free_energy", "lambda": 2.0, "b": [1.0]},
      "initial": {"type": "gaussian", "mean": [3.0], "cov": [[0.1]]},
      "steps": {"family": "constant", "tau": 0.5},
      "mode": {"mode": "variational", "epsilon_schedule": {"family": "power", "c": 0.1, "beta": 1.5}},
      "iterations": 200, "seed": 8})");
    const Trace tf = run(ExperimentConfig::from_json(fe, false));
    ok = step_checks(tf, worst_gap, worst_w2) && ok;
    const RateCertificate rf = rate_certificate(tf, RateTarget::IterateValues);
    ok = ok && rp.check.pass && rf.check.pass && std::isfinite(rp.sup) && std::isfinite(rf.sup);
    return Outcome{ok, "worst gap margin=" + fmt(worst_gap) + ", worst W2 margin=" + fmt(worst_w2) +
                           ", sup sigma*gap PG=" + fmt(rp.sup) + " (bound " + fmt(rp.bound.back()) +
                           "), JKO=" + fmt(rf.sup) + " (bound " + fmt(rf.bound.back()) + ")"};
  });

  criterion(7, "schedule classification (four summable cases hold, harmonic fails)", 1.0, [] {
    const auto eps = ErrorSchedule::power(1.0, 1.5);
    const bool zero = check_conditions(StepSchedule::constant(1.0), ErrorSchedule::zero(), Algorithm::JkoDistance).all_hold();
    const bool bounded = check_conditions(StepSchedule::constant(0.7), eps, Algorithm::JkoDistance).all_hold();
    const bool harmonic_steps =
        check_conditions(StepSchedule::power(1.0, 1.0), ErrorSchedule::power(1.0, 1.5), Algorithm::JkoDistance).all_hold();
    const bool increasing = check_conditions(StepSchedule::power(0.5, -0.5), eps, Algorithm::JkoDistance).all_hold();
    const auto harmonic = check_conditions(StepSchedule::constant(1.0), ErrorSchedule::power(1.0, 1.0), Algorithm::JkoDistance);
    const bool harmonic_fails = harmonic.get("sum_eps_finite").verdict == Verdict::Fails && !harmonic.all_hold();
    const bool ok = zero && bounded && harmonic_steps && increasing && harmonic_fails;
    return Outcome{ok, std::string("zero:") + (zero ? "holds" : "no") + " bounded-tau:" + (bounded ? "holds" : "no") +
                           " tau=1/n:" + (harmonic_steps ? "holds" : "no") + " increasing-tau:" +
                           (increasing ? "holds" : "no") + " harmonic eps:" + (harmonic_fails ? "fails" : "not flagged")};
  });

  criterion(8, "transport cross-oracles (LP vs quantile, Bures vs per-coordinate, Sinkhorn vs LP)", 30.0, [] {
    Rng rng(8);
    double lp_gap = 0.0;
    for (int k = 0; k < 200; ++k) {
      const auto a = random_cloud(rng, 1 + static_cast<int>(rng.uniform() * 12), 1, 2.0);
      const auto b = random_cloud(rng, 1 + static_cast<int>(rng.uniform() * 12), 1, 2.0);
      const double q = wp_1d(a, b, 2.0);
      lp_gap = std::max(lp_gap, std::abs(w2_discrete(a, b).cost - q * q));
    }
    double bures_gap = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int d = 1 + k % 4;
      const Matrix Q = random_rotation(rng, d);
      Vector s(d), t(d);
      for (int i = 0; i < d; ++i) {
        s[i] = 0.05 + 3.0 * rng.uniform();
        t[i] = 0.05 + 3.0 * rng.uniform();
      }
      const Vector m1 = rng.normal_vector(d), m2 = rng.normal_vector(d);
      const GaussianMeasure g1(m1, Q * s.asDiagonal() * Q.transpose());
      const GaussianMeasure g2(m2, Q * t.asDiagonal() * Q.transpose());
      double expect = (m1 - m2).squaredNorm();
      for (int i = 0; i < d; ++i) expect += std::pow(std::sqrt(s[i]) - std::sqrt(t[i]), 2);
      bures_gap = std::max(bures_gap, std::abs(w2_gaussian(g1, g2).squared - expect));
    }
    double below = 0.0, off = 0.0;
    for (int k = 0; k < 20; ++k) {
      Rng sub = rng.split(k);
      const auto a = random_cloud(sub, 5, 2, 0.5), b = random_cloud(sub, 5, 2, 0.5);
      const double lp = w2_discrete(a, b).cost;
      const double sk = w2_sinkhorn(a, b, 1e-3).cost;
      below = std::max(below, lp - sk);
      off = std::max(off, std::abs(sk - lp));
    }
    const bool ok = lp_gap <= 1e-9 && bures_gap <= 1e-9 && below <= 1e-6 && off <= 1e-3;
    return Outcome{ok, "LP vs quantile=" + fmt(lp_gap) + ", Bures vs reduction=" + fmt(bures_gap) +
                           ", LP-Sinkhorn max=" + fmt(below) + ", |Sinkhorn-LP| max=" + fmt(off)};
  });

  Trace ula_trace;
  criterion(9, "ULA sanity: W2(empirical, N(0,1)) <= 0.05 after 2000 steps", 120.0, [&] {
    ula_trace = run(ExperimentConfig::from_json(ula_config(), false));
    const double w = ula_trace.final->w2_star.value();
    return Outcome{w <= 0.05, "W2=" + fmt(w)};
  });

  criterion(10, "determinism: criteria 5 and 9 reproduce byte-identical traces", 150.0, [&] {
    const std::string d1 = to_json(distance_trace).dump(1);
    const std::string d2 = to_json(run(ExperimentConfig::from_json(distance_run_config(), false))).dump(1);
    const std::string u1 = to_json(ula_trace).dump(1);
    const std::string u2 = to_json(run(ExperimentConfig::from_json(ula_config(), false))).dump(1);
    const bool ok = !distance_trace.records.empty() && !ula_trace.records.empty() && d1 == d2 && u1 == u2;
    return Outcome{ok, "distance trace " + std::to_string(d1.size()) + " bytes, ULA trace " +
                           std::to_string(u1.size()) + " bytes"};
  });

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << "\n";
  return failures;
}
