#include "wflow/trace.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "wflow/error.hpp"

namespace wflow {

using nlohmann::json;

json number_to_json(std::optional<double> x) {
  if (!x) return nullptr;
  if (std::isnan(*x)) return "nan";
  if (std::isinf(*x)) return *x > 0 ? "inf" : "-inf";
  return *x;
}

std::optional<double> number_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorCode::InvalidTrace, "expected a number, got " + j.dump());
}

namespace {

using OptField = std::optional<double> IterationRecord::*;

const std::vector<std::pair<const char*, OptField>>& record_fields() {
  static const std::vector<std::pair<const char*, OptField>> fields = {
      {"certified_w2_error", &IterationRecord::certified_w2_error},
      {"certified_energy_gap", &IterationRecord::certified_energy_gap},
      {"G_mu", &IterationRecord::G_mu},
      {"G_step", &IterationRecord::G_step},
      {"G_out", &IterationRecord::G_out},
      {"w2_mu_star", &IterationRecord::w2_mu_star},
      {"w2_step_star", &IterationRecord::w2_step_star},
      {"w2_out_star", &IterationRecord::w2_out_star},
      {"w1_mu_star", &IterationRecord::w1_mu_star},
      {"w15_mu_star", &IterationRecord::w15_mu_star},
      {"displacement", &IterationRecord::displacement},
      {"w2_out_step", &IterationRecord::w2_out_step},
      {"evi_residual", &IterationRecord::evi_residual},
      {"eta_mean_norm", &IterationRecord::eta_mean_norm},
      {"eta_second_moment", &IterationRecord::eta_second_moment},
      {"w2_eta_out", &IterationRecord::w2_eta_out},
      {"w2_eta_step", &IterationRecord::w2_eta_step},
      {"w2_prev_step_eta", &IterationRecord::w2_prev_step_eta},
      {"grad_norm_out", &IterationRecord::grad_norm_out},
  };
  return fields;
}

json optional_measure(const std::optional<Measure>& m) { return m ? to_json(*m) : json(nullptr); }

std::optional<Measure> optional_measure_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return measure_from_json(j.at(key));
}

std::optional<double> opt_number(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return number_from_json(j.at(key));
}

}  // namespace

json to_json(const Trace& trace) {
  const auto& h = trace.header;
  json header = {{"format", "wflow-trace"},
                 {"schema_version", h.schema_version},
                 {"version", h.version},
                 {"algorithm", h.algorithm},
                 {"seed", h.seed},
                 {"dim", h.dim},
                 {"config", h.config},
                 {"lambda", number_to_json(h.lambda)},
                 {"L", number_to_json(h.L)},
                 {"minimizer", optional_measure(h.minimizer)},
                 {"min_value", number_to_json(h.min_value)},
                 {"tolerance", h.tolerance},
                 {"store_every", h.store_every}};
  json records = json::array();
  for (const auto& r : trace.records) {
    json jr = {{"n", r.n},
               {"tau", r.tau},
               {"sigma", r.sigma},
               {"eps", r.eps},
               {"mode", r.mode},
               {"inner_iterations", r.inner_iterations}};
    for (const auto& [name, field] : record_fields()) jr[name] = number_to_json(r.*field);
    jr["measure"] = optional_measure(r.measure);
    jr["step"] = optional_measure(r.step);
    records.push_back(std::move(jr));
  }
  json out = {{"header", header}, {"records", records}};
  if (trace.final) {
    const auto& f = *trace.final;
    out["final"] = {{"n", f.n},
                    {"sigma", f.sigma},
                    {"measure", optional_measure(f.measure)},
                    {"G", number_to_json(f.G)},
                    {"w2_star", number_to_json(f.w2_star)},
                    {"w1_star", number_to_json(f.w1_star)},
                    {"w15_star", number_to_json(f.w15_star)}};
  } else {
    out["final"] = nullptr;
  }
  out["aborted"] = trace.aborted ? *trace.aborted : json(nullptr);
  return out;
}

Trace trace_from_json(const json& j) {
  try {
    Trace t;
    const auto& h = j.at("header");
    if (h.value("format", std::string()) != "wflow-trace") fail(ErrorCode::InvalidTrace, "not a wflow trace");
    t.header.schema_version = h.at("schema_version").get<int>();
    if (t.header.schema_version != kTraceSchemaVersion)
      fail(ErrorCode::InvalidTrace, "unsupported trace schema " + std::to_string(t.header.schema_version));
    t.header.version = h.at("version").get<std::string>();
    t.header.algorithm = h.at("algorithm").get<std::string>();
    t.header.seed = h.at("seed").get<std::uint64_t>();
    t.header.dim = h.at("dim").get<int>();
    t.header.config = h.at("config");
    t.header.lambda = opt_number(h, "lambda");
    t.header.L = opt_number(h, "L");
    t.header.minimizer = optional_measure_from(h, "minimizer");
    t.header.min_value = opt_number(h, "min_value");
    t.header.tolerance = h.at("tolerance").get<double>();
    t.header.store_every = h.at("store_every").get<long>();
    for (const auto& jr : j.at("records")) {
      IterationRecord r;
      r.n = jr.at("n").get<long>();
      r.tau = jr.at("tau").get<double>();
      r.sigma = jr.at("sigma").get<double>();
      r.eps = jr.at("eps").get<double>();
      r.mode = jr.at("mode").get<std::string>();
      r.inner_iterations = jr.at("inner_iterations").get<int>();
      for (const auto& [name, field] : record_fields()) r.*field = opt_number(jr, name);
      r.measure = optional_measure_from(jr, "measure");
      r.step = optional_measure_from(jr, "step");
      t.records.push_back(std::move(r));
    }
    if (j.contains("final") && !j.at("final").is_null()) {
      const auto& jf = j.at("final");
      FinalRecord f;
      f.n = jf.at("n").get<long>();
      f.sigma = jf.at("sigma").get<double>();
      f.measure = optional_measure_from(jf, "measure");
      f.G = opt_number(jf, "G");
      f.w2_star = opt_number(jf, "w2_star");
      f.w1_star = opt_number(jf, "w1_star");
      f.w15_star = opt_number(jf, "w15_star");
      t.final = std::move(f);
    }
    if (j.contains("aborted") && !j.at("aborted").is_null()) t.aborted = j.at("aborted");
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidTrace, std::string("malformed trace: ") + e.what());
  }
}

void write_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidConfig, "cannot write trace to '" + path + "'");
  out << to_json(trace).dump(1) << '\n';
}

Trace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidTrace, "cannot read trace '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidTrace, std::string("trace is not valid JSON: ") + e.what());
  }
  return trace_from_json(j);
}

namespace {

std::string cell(std::optional<double> x) {
  if (!x) return "";
  std::ostringstream os;
  os.precision(17);
  os << *x;
  return os.str();
}

}  // namespace

std::string trace_csv(const Trace& trace) {
  const bool pg = trace.header.algorithm == "proxgrad";
  std::ostringstream os;
  os << "n,tau,sigma,mode,eps,certified_w2_error,certified_energy_gap,G_of_output,G_of_exact";
  if (pg) os << ",eta_mean_norm,eta_second_moment,lambda,L";
  os << '\n';
  for (const auto& r : trace.records) {
    os << r.n << ',' << cell(r.tau) << ',' << cell(r.sigma) << ',' << r.mode << ',' << cell(r.eps) << ','
       << cell(r.certified_w2_error) << ',' << cell(r.certified_energy_gap) << ',' << cell(r.G_out) << ','
       << cell(r.G_step);
    if (pg)
      os << ',' << cell(r.eta_mean_norm) << ',' << cell(r.eta_second_moment) << ',' << cell(trace.header.lambda)
         << ',' << cell(trace.header.L);
    os << '\n';
  }
  return os.str();
}

}  // namespace wflow
