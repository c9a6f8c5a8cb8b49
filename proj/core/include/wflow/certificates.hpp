#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wflow/functionals.hpp"
#include "wflow/schedules.hpp"
#include "wflow/trace.hpp"

namespace wflow {

/// Margin = right-hand side − left-hand side of an inequality; a check passes
/// when its worst margin is ≥ −tolerance.
struct CheckResult {
  std::string name;
  bool pass = true;
  double worst_margin = 0.0;
  long worst_n = -1;
  bool authoritative = true;
  bool applicable = true;
  std::string note;
  std::vector<double> margins;

  void add(long n, double margin, double tolerance);
  nlohmann::json to_json() const;
};

/// W_2²(Jμ,ν) − W_2²(μ,ν) − 2τ(G(ν) − G(Jμ)) + W_2²(Jμ,μ).
double evi_residual_jko(const Measure& mu, const Measure& j_mu, const Measure& nu, double tau, const Functional& G);

/// W_2²(Tμ,ν) − (1−τλ)W_2²(μ,ν) + 2τ(G(Tμ) − G(ν)) + (1−τL)W_2²(μ,Tμ).
/// Throws StepTooLarge when τL ≥ 1.
double evi_residual_pg(const Measure& mu, const Measure& t_mu, const Measure& nu, double tau, double lambda,
                       double L, const Functional& G);

/// Recorded EVI residuals at the minimizer.
CheckResult evi_check(const Trace& trace);

/// W_2(μ_{n+1},ν*) ≤ W_2(step_n,ν*) + ε_n and W_2(step_n,ν*) ≤ W_2(μ_n,ν*).
/// Throws OracleUnavailable.
CheckResult fejer_check(const Trace& trace);

/// Realized and certified step errors against ε_n (and ε_n²/(2τ_n) for
/// variational steps).
CheckResult step_error_check(const Trace& trace);

/// JKO: G(step_n) + W_2²(step_n,μ_n)/(2τ_n) ≤ G(step_{n−1}) + ε_{n−1}²/(2τ_n).
/// Forward-backward: G(step_n) − G(step_{n−1}) ≤
///   (ε_{n−1}/τ_n)(W_2(step_{n−1},η_n) + W_2(step_n,η_n) + ε_{n−1}).
CheckResult decrease_check(const Trace& trace);

struct RegularityResult {
  std::vector<double> sums;  // running Σ W_2²(step_n, μ_n)
  CheckResult check;         // plateau heuristic
};
RegularityResult asymptotic_regularity(const Trace& trace);

enum class RateTarget { BestIterate, ExactStepValues, IterateValues };
std::string to_string(RateTarget t);

/// σ·gap series with a bound recomputed from the trace. For exact runs the
/// bound is the constant W_2²(μ_0,μ*)/2.
struct RateCertificate {
  RateTarget target = RateTarget::ExactStepValues;
  std::vector<long> n;
  std::vector<double> sigma, gap, product, bound;
  std::vector<long> best_index;  // j_n for the best-iterate target
  double sup = 0.0;
  std::optional<double> exact_constant;
  CheckResult check;
};
/// Throws OracleUnavailable, NegativeGap.
RateCertificate rate_certificate(const Trace& trace, RateTarget target);

struct WeakConvergence {
  std::vector<double> p;
  std::vector<long> n;
  std::vector<std::vector<double>> series;  // series[k][i] = W_{p_k}(μ_{n_i}, μ*)
  CheckResult check;
};
/// p ∈ {1, 1.5, 2} come from the recorded values; other exponents are
/// recomputed on the stored measures. Throws OracleUnavailable.
WeakConvergence weak_convergence_surrogate(const Trace& trace, const std::vector<double>& p_list,
                                           std::optional<double> tolerance = std::nullopt);

/// Recomputes recorded energies and distances from the stored measures.
CheckResult recorded_values_check(const Trace& trace, const Functional* G);

struct CertifyOptions {
  std::optional<Functional> G;
  std::optional<ConditionReport> conditions;
  std::optional<double> wp_tolerance;
};

struct RunReport {
  std::vector<CheckResult> checks;
  std::vector<RateCertificate> rates;
  std::optional<WeakConvergence> weak;
  std::optional<RegularityResult> regularity;

  /// Every applicable authoritative check passes.
  bool all_pass() const;
  const CheckResult* find(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string table() const;
};

RunReport certify(const Trace& trace, const CertifyOptions& options = {});

/// n, sigma_n, gap, sigma_times_gap, w1, w2, evi_margin, eps.
std::string plot_csv(const Trace& trace, const RunReport& report);

}  // namespace wflow
