#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wflow/error.hpp"
#include "wflow/harness.hpp"
#include "wflow/transport.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCertification = 3;

bool is_validation(wflow::ErrorCode code) {
  using wflow::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidSchedule:
    case ErrorCode::InvalidMeasure:
    case ErrorCode::InvalidPotential:
    case ErrorCode::InvalidTrace:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::StepTooLarge:
    case ErrorCode::NoExactSolver:
    case ErrorCode::ProxUnavailable:
    case ErrorCode::GradientUnavailable:
    case ErrorCode::NonAffineOnGaussian:
    case ErrorCode::SingularCovariance:
      return true;
    default:
      return false;
  }
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) wflow::fail(wflow::ErrorCode::InvalidConfig, "cannot read '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    wflow::fail(wflow::ErrorCode::InvalidConfig, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) wflow::fail(wflow::ErrorCode::InvalidConfig, "cannot write '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and inexact JKO / proximal-gradient flows in Wasserstein space"};
  app.require_subcommand(1);
  app.set_version_flag("--version", wflow::version());

  std::string config_path, trace_path, plot_path, csv_path, grid_path, out_dir = "sweep_out", a_path, b_path;
  bool as_json = false;
  double p = 2.0;
  unsigned workers = 0;
  long horizon = wflow::kScheduleHorizon;

  auto* run = app.add_subcommand("run", "run an experiment and write its trace");
  run->add_option("-c,--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--trace", trace_path, "trace output (overrides the config)");
  run->add_option("--csv", csv_path, "trace CSV output (overrides the config)");
  run->add_option("--plot", plot_path, "plot CSV output (overrides the config)");

  auto* certify = app.add_subcommand("certify", "check every inequality recorded in a trace");
  certify->add_option("--trace", trace_path, "trace file")->required()->check(CLI::ExistingFile);
  certify->add_flag("--json", as_json, "print the machine-readable report");
  certify->add_option("--plot", plot_path, "also write plot CSV");

  auto* conditions = app.add_subcommand("check-conditions", "classify the schedule hypotheses");
  conditions->add_option("-c,--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  conditions->add_flag("--json", as_json, "print JSON");
  conditions->add_option("--horizon", horizon, "partial-sum horizon");

  auto* sweep = app.add_subcommand("sweep", "run a grid of configs");
  sweep->add_option("-c,--config", config_path, "base config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid_path, "grid of dotted config paths (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--workers", workers, "worker threads (default: all cores)");

  auto* dist = app.add_subcommand("dist", "W_p distance between two measure files");
  dist->add_option("--p", p, "exponent in [1, 2]");
  dist->add_option("--a", a_path, "first measure (JSON)")->required()->check(CLI::ExistingFile);
  dist->add_option("--b", b_path, "second measure (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto config = wflow::ExperimentConfig::load(config_path);
      if (!trace_path.empty()) config.output.trace = trace_path;
      if (!csv_path.empty()) config.output.csv = csv_path;
      if (!plot_path.empty()) config.output.plot = plot_path;
      const auto trace = wflow::run_and_write(config);
      std::cout << "ran " << trace.records.size() << " iterations (seed " << config.seed << ")";
      if (!config.output.trace.empty()) std::cout << ", trace: " << config.output.trace;
      std::cout << "\n";
      return 0;
    }
    if (certify->parsed()) {
      const auto trace = wflow::read_trace(trace_path);
      const auto report = wflow::certify_trace(trace);
      if (as_json)
        std::cout << report.to_json().dump(2) << "\n";
      else
        std::cout << report.table();
      if (!plot_path.empty()) write_file(plot_path, wflow::plot_csv(trace, report));
      return report.all_pass() ? 0 : kExitCertification;
    }
    if (conditions->parsed()) {
      const auto config = wflow::ExperimentConfig::load(config_path);
      std::optional<double> L;
      if (config.algorithm != "jko") L = wflow::potential_from_json(config.F, config.dim).lipschitz();
      const auto report =
          wflow::check_conditions(config.steps, config.errors, wflow::condition_algorithm(config), L, horizon);
      if (as_json)
        std::cout << report.to_json().dump(2) << "\n";
      else
        std::cout << report.table();
      return report.all_hold() ? 0 : kExitCertification;
    }
    if (sweep->parsed()) {
      const auto points = wflow::sweep(read_json(config_path), read_json(grid_path), out_dir, workers);
      const std::string summary = wflow::sweep_summary_csv(points);
      write_file(out_dir + "/summary.csv", summary);
      std::cout << summary;
      return 0;
    }
    if (dist->parsed()) {
      const auto a = wflow::measure_from_json(read_json(a_path));
      const auto b = wflow::measure_from_json(read_json(b_path));
      std::printf("%.12g\n", wflow::wp(a, b, p));
      return 0;
    }
  } catch (const wflow::Error& e) {
    std::cerr << "wflow: " << e.what() << "\n";
    return is_validation(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "wflow: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
