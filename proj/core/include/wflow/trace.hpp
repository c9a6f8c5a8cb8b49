#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wflow/measures.hpp"

namespace wflow {

inline constexpr int kTraceSchemaVersion = 1;

/// One iteration n: μ_n, the exact step from μ_n (J_{τ_n}μ_n or T_{τ_n}μ_n),
/// and the scalars every certificate reads. "out" is μ_{n+1}, "star" the
/// oracle minimizer.
struct IterationRecord {
  long n = 0;
  double tau = 0.0;
  double sigma = 0.0;  // σ_n
  double eps = 0.0;
  std::string mode;
  std::optional<double> certified_w2_error;
  std::optional<double> certified_energy_gap;
  int inner_iterations = 0;

  std::optional<Measure> measure;  // μ_n (thinned)
  std::optional<Measure> step;     // exact step (thinned)

  std::optional<double> G_mu, G_step, G_out;
  std::optional<double> w2_mu_star, w2_step_star, w2_out_star;
  std::optional<double> w1_mu_star, w15_mu_star;
  std::optional<double> displacement;  // W_2(step, μ_n)
  std::optional<double> w2_out_step;   // W_2(μ_{n+1}, step)
  std::optional<double> evi_residual;  // at the minimizer

  // Forward-backward runs.
  std::optional<double> eta_mean_norm, eta_second_moment;
  std::optional<double> w2_eta_out, w2_eta_step, w2_prev_step_eta;
  std::optional<double> grad_norm_out;  // (∫‖∇F‖² dμ_{n+1})^{1/2}
};

struct FinalRecord {
  long n = 0;
  double sigma = 0.0;
  std::optional<Measure> measure;
  std::optional<double> G, w2_star, w1_star, w15_star;
};

struct TraceHeader {
  std::string version;
  int schema_version = kTraceSchemaVersion;
  std::string algorithm;  // jko | proxgrad | ula
  std::uint64_t seed = 0;
  int dim = 1;
  nlohmann::json config;
  std::optional<double> lambda, L;
  std::optional<Measure> minimizer;
  std::optional<double> min_value;
  double tolerance = 1e-9;
  long store_every = 1;
};

struct Trace {
  TraceHeader header;
  std::vector<IterationRecord> records;
  std::optional<FinalRecord> final;
  std::optional<nlohmann::json> aborted;  // {"n":..,"error":..}
};

/// Non-finite numbers are written as the strings "inf", "-inf", "nan".
nlohmann::json number_to_json(std::optional<double> x);
std::optional<double> number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& j);

void write_trace(const Trace& trace, const std::string& path);
Trace read_trace(const std::string& path);

/// n, tau, sigma, mode, eps, certified_w2_error, certified_energy_gap,
/// G_of_output, G_of_exact (+ eta statistics, lambda, L for forward-backward).
std::string trace_csv(const Trace& trace);

}  // namespace wflow
