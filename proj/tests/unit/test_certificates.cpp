#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wflow/certificates.hpp"
#include "wflow/harness.hpp"
#include "wflow/jko.hpp"
#include "wflow/transport.hpp"

using namespace wflow;
using nlohmann::json;

namespace {

json quadratic_run(long n, const json& mode = "exact", double start = 1.0) {
  return json{{"algorithm", "jko"},
              {"functional", {{"functional", "quadratic"}, {"lambda", 1.0}, {"b", {0.0}}}},
              {"initial", {{"type", "discrete"}, {"points", {{start}}}, {"weights", {1.0}}}},
              {"steps", {{"family", "constant"}, {"tau", 1.0}}},
              {"mode", mode},
              {"iterations", n},
              {"seed", 3}};
}

json distance_mode(double c = 0.1, double beta = 1.5) {
  return {{"mode", "distance"}, {"epsilon_schedule", {{"family", "power"}, {"c", c}, {"beta", beta}}}};
}

Trace run_json(const json& j) { return run(ExperimentConfig::from_json(j, false)); }

json pg_free_energy_run(long n, double tau, const json& mode = "exact") {
  return json{{"algorithm", "proxgrad"},
              {"F", {{"functional", "quadratic"}, {"lambda", 1.0}, {"b", {0.0}}}},
              {"H", "entropy_gaussian"},
              {"initial", {{"type", "gaussian"}, {"mean", {0.0}}, {"cov", {{4.0}}}}},
              {"steps", {{"family", "constant"}, {"tau", tau}}},
              {"mode", mode},
              {"iterations", n},
              {"seed", 4}};
}

}  // namespace

TEST_CASE("EVI residual examples") {
  const auto G = Functional::potential(PotentialSpec::quadratic_isotropic(1.0, Vector::Zero(1)));
  const Measure mu = DiscreteMeasure::dirac(Vector::Ones(1));
  const Measure j = exact_jko(mu, 1.0, G);
  CHECK(evi_residual_jko(mu, j, j, 1.0, G) == 0.0);

  Rng rng(61);
  for (int k = 0; k < 200; ++k) {
    const Measure nu = DiscreteMeasure::dirac(Vector::Constant(1, 5.0 * rng.normal()));
    CHECK(evi_residual_jko(mu, j, nu, 1.0, G) <= 1e-9);
  }
  // replace the exact step δ_½ by δ_{½+t}, ν = δ_0: 2(½+t)² − 1 + (t−½)²
  const double t = 10.0;
  const Measure far = DiscreteMeasure::dirac(Vector::Constant(1, 0.5 + t));
  const double expect = 2 * (0.5 + t) * (0.5 + t) - 1 + (t - 0.5) * (t - 0.5);
  CHECK(evi_residual_jko(mu, far, DiscreteMeasure::dirac(Vector::Zero(1)), 1.0, G) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect > 0.0);
}

TEST_CASE("exact run: iterates, Fejer monotonicity, decrease, regularity") {
  const Trace t = run_json(quadratic_run(20));
  REQUIRE(t.records.size() == 20);
  for (const auto& r : t.records) {
    const double x = std::get<DiscreteMeasure>(*r.measure).points()(0, 0);
    CHECK(std::abs(x - std::pow(2.0, -static_cast<double>(r.n))) <= 1e-12);
    CHECK(*r.displacement == doctest::Approx(std::pow(2.0, -static_cast<double>(r.n)) / 2).epsilon(1e-12));
  }
  const auto fejer = fejer_check(t);
  CHECK(fejer.pass);
  CHECK(fejer.worst_margin >= -1e-9);
  for (size_t i = 1; i < t.records.size(); ++i) CHECK(*t.records[i].w2_mu_star <= *t.records[i - 1].w2_mu_star);

  const auto dec = decrease_check(t);
  CHECK(dec.pass);
  for (size_t i = 1; i < t.records.size(); ++i) CHECK(*t.records[i].G_step <= *t.records[i - 1].G_step);
  // hand values: G(step_0) = 1/8, G(step_1) = 1/32, W2²(step_1, μ_1)/2 = 1/32
  CHECK(*t.records[0].G_step == 0.125);
  CHECK(*t.records[1].G_step + std::pow(*t.records[1].displacement, 2) / 2 == doctest::Approx(1.0 / 16));
  // single Fejér step: W2(Jμ_0, ν*) = ½ ≤ W2(μ_0, ν*) = 1
  CHECK(*t.records[0].w2_step_star == 0.5);
  CHECK(*t.records[0].w2_mu_star == 1.0);

  const auto reg = asymptotic_regularity(t);
  double s = 0.0;
  for (size_t n = 0; n < reg.sums.size(); ++n) {
    s += std::pow(0.5, 2.0 * n + 2.0);
    CHECK(reg.sums[n] == doctest::Approx(s).epsilon(1e-12));
  }
  CHECK(reg.check.pass);
  CHECK_FALSE(reg.check.authoritative);
}

TEST_CASE("stationary start") {
  const Trace t = run_json(quadratic_run(10, "exact", 0.0));
  const auto reg = asymptotic_regularity(t);
  for (double v : reg.sums) CHECK(v == 0.0);
  const auto rc = rate_certificate(t, RateTarget::ExactStepValues);
  for (double g : rc.gap) CHECK(g == 0.0);
  const auto weak = weak_convergence_surrogate(t, {1.0, 1.5, 2.0});
  for (const auto& series : weak.series)
    for (double v : series) CHECK(v == 0.0);
}

TEST_CASE("exact rate certificate on the quadratic example") {
  const Trace t = run_json(quadratic_run(30));
  const auto rc = rate_certificate(t, RateTarget::ExactStepValues);
  REQUIRE(rc.exact_constant);
  CHECK(*rc.exact_constant == 0.5);
  CHECK(rc.sup <= 0.5 + 1e-9);
  CHECK(rc.check.pass);
  for (size_t k = 0; k < rc.n.size(); ++k) {
    // entry m pairs σ_m = m with the gap of J μ_{m−1} = δ_{2^{-m}}, i.e. ½·4^{-m}
    const double m = static_cast<double>(rc.n[k]);
    CHECK(rc.gap[k] == doctest::Approx(0.5 * std::pow(4.0, -m)).epsilon(1e-12));
    CHECK(rc.sigma[k] == m);
  }
  const auto best = rate_certificate(t, RateTarget::BestIterate);
  CHECK(best.check.pass);
  CHECK(best.sup <= 0.5 + 1e-9);
  for (size_t k = 1; k < best.best_index.size(); ++k) CHECK(best.best_index[k] >= best.best_index[k - 1]);
}

TEST_CASE("rate certificate errors") {
  Trace t = run_json(quadratic_run(5));
  Trace bad = t;
  bad.records[2].G_step = -1.0;
  CHECK_CODE(rate_certificate(bad, RateTarget::ExactStepValues), ErrorCode::NegativeGap);
  Trace no_oracle = t;
  no_oracle.header.minimizer.reset();
  CHECK_CODE(rate_certificate(no_oracle, RateTarget::ExactStepValues), ErrorCode::OracleUnavailable);
  CHECK_CODE(fejer_check(no_oracle), ErrorCode::OracleUnavailable);
  CHECK_CODE(weak_convergence_surrogate(no_oracle, {1.0}), ErrorCode::OracleUnavailable);
  // certify degrades to n/a rather than failing
  const auto report = certify(no_oracle);
  const auto* f = report.find("fejer");
  REQUIRE(f);
  CHECK_FALSE(f->applicable);
}

TEST_CASE("distance-mode run satisfies every inequality") {
  const Trace t = run_json(quadratic_run(300, distance_mode()));
  const auto fejer = fejer_check(t);
  CHECK(fejer.worst_margin >= -1e-9);
  CHECK(decrease_check(t).worst_margin >= -1e-9);
  CHECK(step_error_check(t).pass);
  CHECK(asymptotic_regularity(t).check.pass);
  const auto rc = rate_certificate(t, RateTarget::ExactStepValues);
  CHECK(std::isfinite(rc.sup));
  CHECK(rc.check.pass);
  const auto weak = weak_convergence_surrogate(t, {1.0, 1.5, 2.0});
  CHECK(weak.series[0].back() < 1e-2);
  // W_1 ≤ W_1.5 ≤ W_2 along the run
  for (size_t i = 0; i < weak.n.size(); ++i) {
    CHECK(weak.series[0][i] <= weak.series[1][i] + 1e-12);
    CHECK(weak.series[1][i] <= weak.series[2][i] + 1e-12);
  }
}

TEST_CASE("summable-error run plateaus by n = 200") {
  const Trace t = run_json(quadratic_run(200, distance_mode(0.2, 1.5)));
  CHECK(asymptotic_regularity(t).check.pass);
}

TEST_CASE("weak convergence surrogate follows the forward-backward scalar recursion") {
  const Trace t = run_json(pg_free_energy_run(40, 0.5));
  const auto weak = weak_convergence_surrogate(t, {2.0});
  double s = 2.0;
  for (size_t i = 0; i < weak.n.size(); ++i) {
    CHECK(std::abs(weak.series[0][i] - std::abs(s - 1.0)) <= 1e-9 * std::abs(s - 1.0) + 1e-7);
    s = (0.5 * s + std::sqrt(0.25 * s * s + 2.0)) / 2.0;
  }
  const auto evi = evi_check(t);
  CHECK(evi.pass);
  CHECK(decrease_check(t).pass);
}

TEST_CASE("variational runs certify iterate values") {
  const json mode = {{"mode", "variational"}, {"epsilon_schedule", {{"family", "power"}, {"c", 0.1}, {"beta", 2.5}}}};
  const Trace t = run_json(pg_free_energy_run(100, 0.5, mode));
  CHECK(step_error_check(t).pass);
  const auto rc = rate_certificate(t, RateTarget::IterateValues);
  CHECK(rc.check.pass);
  CHECK(std::isfinite(rc.sup));
  for (size_t k = 0; k < rc.bound.size(); ++k) CHECK(rc.product[k] <= rc.bound[k] + 1e-9);
  CHECK(decrease_check(t).pass);
}

TEST_CASE("recorded values re-derive from stored measures") {
  const Trace t = run_json(quadratic_run(30, distance_mode()));
  const auto G = Functional::potential(PotentialSpec::quadratic_isotropic(1.0, Vector::Zero(1)));
  const auto c = recorded_values_check(t, &G);
  CHECK(c.pass);
  CHECK(c.margins.size() > 100);
  Trace tampered = t;
  tampered.records[3].w2_mu_star = *tampered.records[3].w2_mu_star + 1e-6;
  const auto bad = recorded_values_check(tampered, &G);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_n == 3);
}

TEST_CASE("certify is a pure function of the trace file") {
  const Trace t = run_json(pg_free_energy_run(30, 0.5));
  const std::string a = certify_trace(t).to_json().dump();
  const std::string b = certify_trace(trace_from_json(json::parse(to_json(t).dump()))).to_json().dump();
  CHECK(a == b);
  CHECK(certify_trace(t).all_pass());
}

TEST_CASE("plot data") {
  const Trace empty = run_json(quadratic_run(0));
  const RunReport er = certify(empty);
  CHECK(plot_csv(empty, er) == "n,sigma_n,gap,sigma_times_gap,w1,w2,evi_margin,eps\n");

  const Trace t = run_json(quadratic_run(30));
  const RunReport r = certify_trace(t);
  const std::string csv = plot_csv(t, r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() > 3 && !cells[3].empty()) worst = std::max(worst, std::stod(cells[3]));
  }
  CHECK(rows == 31);
  CHECK(worst <= 0.5);
  CHECK(plot_csv(trace_from_json(json::parse(to_json(t).dump())), r) == csv);
}
