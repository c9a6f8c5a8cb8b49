#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wflow/certificates.hpp"
#include "wflow/functionals.hpp"
#include "wflow/jko.hpp"
#include "wflow/proxgrad.hpp"
#include "wflow/schedules.hpp"
#include "wflow/trace.hpp"

namespace wflow {

std::string version();

struct OutputPaths {
  std::string trace, csv, plot;
};

/// Parsed experiment file. Keys: algorithm (jko | proxgrad | ula),
/// functional (jko) or F and H (proxgrad; F only for ula), initial, steps,
/// errors, mode, iterations, seed, store_every, noise, inner_max_iterations,
/// certify {wp_tolerance}, output {trace, csv, plot}.
struct ExperimentConfig {
  std::string algorithm = "jko";
  nlohmann::json raw;
  int dim = 1;
  nlohmann::json functional, F, H, initial;
  StepSchedule steps = StepSchedule::constant(1.0);
  ErrorSchedule errors = ErrorSchedule::zero();
  StepMode mode = StepMode::Exact;
  long iterations = 0;
  std::uint64_t seed = 0;
  long store_every = 1;
  bool noise = true;
  int inner_max_iterations = InnerSolverOptions{}.max_iterations;
  std::optional<double> wp_tolerance;
  OutputPaths output;

  /// WFLOW_SEED overrides the seed when `use_env` is set.
  static ExperimentConfig from_json(const nlohmann::json& j, bool use_env = true);
  static ExperimentConfig load(const std::string& path, bool use_env = true);
  /// Config echo with the effective seed.
  nlohmann::json echo() const;
};

/// Objects built from a config.
struct Experiment {
  std::optional<Functional> G;  // energy the certificates evaluate
  std::optional<Functional> jko_functional;
  std::optional<PgProblem> pg;
  std::optional<PotentialSpec> ula_potential;
  Measure initial;
  std::optional<MinimizerOracle> oracle;
};

/// Builds every object and checks module preconditions (step cap, exact
/// solver availability, error magnitudes). Throws on the first violation.
Experiment build_experiment(const ExperimentConfig& config);

Algorithm condition_algorithm(const ExperimentConfig& config);
ConditionReport conditions_for(const ExperimentConfig& config);

/// Runs the iterations. A module error aborts the run with the iteration
/// index; the partial trace is written first when a trace path is set.
Trace run(const ExperimentConfig& config);
/// run() plus the configured trace, CSV and plot files.
Trace run_and_write(const ExperimentConfig& config);

/// Certificates with the energy and schedules rebuilt from the trace header.
CertifyOptions certify_options(const Trace& trace);
RunReport certify_trace(const Trace& trace);

struct SweepPoint {
  nlohmann::json params;
  std::string trace_path;
  bool ok = false;
  std::string error;
  bool all_pass = false;
  bool conditions_hold = false;
  std::optional<double> rate_sup, w1, w15, w2;
};

/// Cartesian product over dotted config paths, e.g. {"steps.alpha":[0.5,1]}.
/// Points run on `workers` threads; a failing point is recorded and the sweep
/// continues.
std::vector<SweepPoint> sweep(const nlohmann::json& base, const nlohmann::json& grid, const std::string& out_dir,
                              unsigned workers = 0);
std::string sweep_summary_csv(const std::vector<SweepPoint>& points);

}  // namespace wflow
