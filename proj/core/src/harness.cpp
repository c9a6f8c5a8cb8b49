#include "wflow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

using nlohmann::json;

std::string version() { return "0.1.0"; }

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::InvalidConfig, what); }

int infer_dim(const json& initial) {
  if (initial.contains("point")) return static_cast<int>(initial.at("point").size());
  if (initial.contains("mean")) return initial.at("mean").is_array() ? static_cast<int>(initial.at("mean").size()) : 1;
  const auto& pts = initial.at("points");
  if (pts.empty()) invalid("initial measure has no points");
  return pts.front().is_array() ? static_cast<int>(pts.front().size()) : 1;
}

// ULA initial clouds: {"type":"replicated","point":[..],"count":n} or
// {"type":"samples","mean":[..],"cov":[[..]],"count":n}.
Measure ula_initial(const json& j, int dim, std::uint64_t seed) {
  const std::string type = j.value("type", std::string());
  if (type == "replicated") {
    const Vector x = vector_from_json(j.at("point"));
    const long count = j.at("count").get<long>();
    if (count < 1) invalid("particle count must be positive");
    Matrix pts = x.transpose().replicate(count, 1);
    return DiscreteMeasure::uniform(std::move(pts));
  }
  if (type == "samples") {
    const long count = j.at("count").get<long>();
    if (count < 1) invalid("particle count must be positive");
    const Vector m = vector_from_json(j.at("mean"));
    const GaussianMeasure g(m, matrix_from_json(j.at("cov")));
    const Matrix root = g.sqrt_cov();
    // Stream id outside the per-step range.
    Rng rng = Rng(seed).split(0xA5A5A5A5ULL);
    Matrix pts(count, dim);
    for (long i = 0; i < count; ++i) pts.row(i) = (m + root * rng.normal_vector(dim)).transpose();
    return DiscreteMeasure::uniform(std::move(pts));
  }
  return measure_from_json(j);
}

std::optional<double> safe_eval(const Functional& f, const Measure& mu) {
  try {
    return eval(f, mu);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EvalUnsupported) return std::nullopt;
    throw;
  }
}

std::optional<double> safe_wp(const Measure& a, const Measure& b, double p) {
  try {
    return p == 2.0 ? w2(a, b) : wp(a, b, p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DistanceUnsupported || e.code() == ErrorCode::SizeCapExceeded) return std::nullopt;
    throw;
  }
}

std::optional<double> safe_w2(const Measure& a, const Measure& b) { return safe_wp(a, b, 2.0); }

double gradient_norm(const PotentialSpec& F, const Measure& mu) {
  if (const auto* d = std::get_if<DiscreteMeasure>(&mu)) {
    double s = 0.0;
    for (int i = 0; i < d->size(); ++i)
      if (d->weight(i) > 0.0) s += d->weight(i) * F.gradient(d->point(i)).squaredNorm();
    return std::sqrt(s);
  }
  const auto& g = std::get<GaussianMeasure>(mu);
  const auto& q = F.quadratic_form();
  if (!q) fail(ErrorCode::NonAffineOnGaussian, "gradient moments need a quadratic potential");
  return std::sqrt((q->A * g.mean() + q->b).squaredNorm() + (q->A * g.cov() * q->A).trace());
}

StepModeSpec mode_at(const ExperimentConfig& c, long n) {
  return StepModeSpec{c.mode, c.mode == StepMode::Exact ? 0.0 : c.errors.eps(n)};
}

// Per-measure quantities reused between consecutive records.
struct Snapshot {
  std::optional<double> G, w2, w1, w15;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, bool use_env) {
  try {
    ExperimentConfig c;
    c.raw = j;
    c.algorithm = j.value("algorithm", std::string("jko"));
    if (c.algorithm != "jko" && c.algorithm != "proxgrad" && c.algorithm != "ula")
      invalid("unknown algorithm '" + c.algorithm + "'");
    c.initial = j.at("initial");
    c.dim = j.contains("dim") ? j.at("dim").get<int>() : infer_dim(c.initial);
    if (c.dim < 1) invalid("dimension must be positive");
    if (c.algorithm == "jko") {
      c.functional = j.at("functional");
    } else {
      c.F = j.at("F");
      c.H = c.algorithm == "proxgrad" ? j.at("H") : json("entropy_gaussian");
    }
    if (j.contains("steps")) c.steps = StepSchedule::from_json(j.at("steps"));
    if (j.contains("errors")) c.errors = ErrorSchedule::from_json(j.at("errors"));
    if (j.contains("mode")) {
      const auto& m = j.at("mode");
      if (m.is_string()) {
        c.mode = step_mode_from_string(m.get<std::string>());
      } else {
        c.mode = step_mode_from_string(m.at("mode").get<std::string>());
        if (m.contains("epsilon_schedule")) c.errors = ErrorSchedule::from_json(m.at("epsilon_schedule"));
      }
    }
    c.iterations = j.value("iterations", 0L);
    if (c.iterations < 0) invalid("iteration count must be nonnegative");
    c.seed = j.value("seed", std::uint64_t{0});
    if (use_env) {
      if (const char* env = std::getenv("WFLOW_SEED"); env && *env) {
        try {
          c.seed = std::stoull(env);
        } catch (const std::exception&) {
          invalid(std::string("WFLOW_SEED is not an unsigned integer: ") + env);
        }
      }
    }
    c.store_every = j.value("store_every", c.iterations <= 1000 ? 1L : (c.iterations + 999) / 1000);
    if (c.store_every < 1) invalid("store_every must be positive");
    c.noise = j.value("noise", true);
    c.inner_max_iterations = j.value("inner_max_iterations", c.inner_max_iterations);
    if (j.contains("certify")) {
      const auto& cj = j.at("certify");
      if (cj.contains("wp_tolerance")) c.wp_tolerance = cj.at("wp_tolerance").get<double>();
    }
    if (j.contains("output")) {
      const auto& o = j.at("output");
      c.output.trace = o.value("trace", std::string());
      c.output.csv = o.value("csv", std::string());
      c.output.plot = o.value("plot", std::string());
    }
    return c;
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path, bool use_env) {
  std::ifstream in(path);
  if (!in) invalid("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j, use_env);
}

json ExperimentConfig::echo() const {
  json j = raw;
  j["seed"] = seed;
  // Output locations are not part of the experiment.
  j.erase("output");
  return j;
}

Experiment build_experiment(const ExperimentConfig& c) {
  const int d = c.dim;
  std::optional<Functional> G, jko_f;
  std::optional<PgProblem> pg;
  std::optional<PotentialSpec> ula_F;
  if (c.algorithm == "jko") {
    jko_f = functional_from_json(c.functional, d);
    G = jko_f;
  } else if (c.algorithm == "proxgrad") {
    pg = PgProblem::make(potential_from_json(c.F, d), functional_from_json(c.H, d));
    G = pg->G();
  } else {
    ula_F = potential_from_json(c.F, d);
    if (!ula_F->has_gradient()) fail(ErrorCode::GradientUnavailable, "ULA needs the gradient of F");
  }
  Measure initial = c.algorithm == "ula" ? ula_initial(c.initial, d, c.seed) : measure_from_json(c.initial);
  if (dim(initial) != d) fail(ErrorCode::DimensionMismatch, "initial measure dimension differs from dim");

  // Schedules must cover the run.
  for (auto len : {c.steps.length(), c.errors.length()})
    if (len && *len < c.iterations) fail(ErrorCode::InvalidSchedule, "explicit schedule shorter than the run");
  if (c.mode == StepMode::Exact && c.errors.family() != ErrorSchedule::Family::Zero) {
    for (long n = 0; n < c.iterations; ++n)
      if (c.errors.eps(n) != 0.0) invalid("exact mode with a nonzero error schedule");
  }
  if (c.mode == StepMode::Variational)
    for (long n = 0; n < c.iterations; ++n)
      if (!(c.errors.eps(n) > 0.0)) invalid("variational mode needs positive error magnitudes");

  if (pg && pg->L > 0.0) {
    double sup = c.steps.sup();
    if (c.steps.family() == StepSchedule::Family::Explicit) {
      sup = 0.0;
      for (long n = 0; n < c.iterations; ++n) sup = std::max(sup, c.steps.tau(n));
    }
    if (!(sup * pg->L < 1.0)) fail(ErrorCode::StepTooLarge, "stepsizes must stay below 1/L");
  }

  std::optional<MinimizerOracle> oracle;
  try {
    if (ula_F)
      oracle = minimizer(Functional::sum({Functional::potential(*ula_F), Functional::entropy()}));
    else
      oracle = minimizer(*G);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoClosedFormMinimizer) throw;
  }

  // The first step must be computable in the requested mode.
  if (c.iterations > 0 && !ula_F) {
    const double tau = c.steps.tau(0);
    try {
      if (c.mode != StepMode::Variational) {
        if (jko_f) (void)exact_jko(initial, tau, *jko_f);
        if (pg) (void)pg_exact(initial, tau, *pg);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoExactSolver || e.code() == ErrorCode::ProxUnavailable ||
          e.code() == ErrorCode::NonAffineOnGaussian)
        invalid(std::string("step not computable: ") + e.what());
      throw;
    }
  }
  return Experiment{G, jko_f, pg, ula_F, std::move(initial), oracle};
}

Algorithm condition_algorithm(const ExperimentConfig& c) {
  const bool var = c.mode == StepMode::Variational;
  if (c.algorithm == "jko") return var ? Algorithm::JkoVariational : Algorithm::JkoDistance;
  return var ? Algorithm::PgVariational : Algorithm::PgDistance;
}

ConditionReport conditions_for(const ExperimentConfig& c) {
  std::optional<double> L;
  if (c.algorithm != "jko") {
    const PotentialSpec F = potential_from_json(c.F, c.dim);
    L = F.lipschitz();
  }
  return check_conditions(c.steps, c.errors, condition_algorithm(c), L);
}

Trace run(const ExperimentConfig& c) {
  Experiment ex = build_experiment(c);
  Trace trace;
  auto& h = trace.header;
  h.version = version();
  h.algorithm = c.algorithm;
  h.seed = c.seed;
  h.dim = c.dim;
  h.config = c.echo();
  h.store_every = c.store_every;
  if (ex.pg) {
    h.lambda = ex.pg->lambda;
    h.L = ex.pg->L;
  } else if (ex.ula_potential) {
    h.lambda = ex.ula_potential->lambda();
    h.L = ex.ula_potential->lipschitz();
  }
  if (ex.oracle) {
    h.minimizer = ex.oracle->argmin;
    h.min_value = ex.oracle->value;
  }
  // Exact transport solves on clouds in d > 1 are less accurate than the
  // closed forms.
  const bool lp = is_discrete(ex.initial) && c.dim > 1 && !(ex.oracle && is_discrete(ex.oracle->argmin) &&
                                                             std::get<DiscreteMeasure>(ex.oracle->argmin).size() == 1);
  h.tolerance = lp ? 1e-6 : 1e-9;

  // A fixed discretization of a one-dimensional Gaussian target avoids
  // rebuilding it for every particle cloud; the numbers are identical.
  std::optional<Measure> star;
  if (ex.oracle) {
    star = ex.oracle->argmin;
    if (ex.ula_potential && c.dim == 1 && is_gaussian(*star))
      star = Measure(gaussian_quantiles_1d(std::get<GaussianMeasure>(*star)));
  }
  auto snapshot = [&](const Measure& m) {
    Snapshot s;
    if (ex.G) s.G = safe_eval(*ex.G, m);
    if (star) {
      s.w2 = safe_w2(m, *star);
      s.w1 = safe_wp(m, *star, 1.0);
      s.w15 = safe_wp(m, *star, 1.5);
    }
    return s;
  };

  const InnerSolverOptions inner{c.inner_max_iterations};
  const Rng master(c.seed);
  Measure mu = ex.initial;
  Snapshot cur = snapshot(mu);
  std::optional<Measure> prev_step;
  long n = 0;
  try {
    for (; n < c.iterations; ++n) {
      IterationRecord r;
      r.n = n;
      r.tau = c.steps.tau(n);
      r.sigma = c.steps.sigma(n);
      r.eps = c.mode == StepMode::Exact ? 0.0 : c.errors.eps(n);
      r.mode = c.algorithm == "ula" ? "ula" : to_string(c.mode);
      Rng rng = master.split(static_cast<std::uint64_t>(n));
      const bool store = n % c.store_every == 0;

      if (ex.ula_potential) {
        Measure out = ula_step(std::get<DiscreteMeasure>(mu), r.tau, *ex.ula_potential, rng, c.noise);
        r.w2_mu_star = cur.w2;
        r.w1_mu_star = cur.w1;
        r.w15_mu_star = cur.w15;
        if (store) r.measure = mu;
        Snapshot next = snapshot(out);
        r.w2_out_star = next.w2;
        trace.records.push_back(std::move(r));
        mu = std::move(out);
        cur = next;
        continue;
      }

      std::optional<Measure> eta;
      JkoStepResult res = [&] {
        if (ex.pg) {
          PgStepResult p = pg_step(mu, r.tau, *ex.pg, mode_at(c, n), rng, inner);
          eta = std::move(p.eta);
          return std::move(p.backward);
        }
        return jko_step(mu, r.tau, *ex.jko_functional, mode_at(c, n), rng, inner);
      }();
      r.certified_w2_error = res.certified_w2_error;
      r.certified_energy_gap = res.certified_energy_gap;
      r.inner_iterations = res.inner_iterations;
      const Measure& out = res.output;
      Snapshot next = snapshot(out);

      r.G_mu = cur.G;
      r.G_out = next.G;
      r.w2_mu_star = cur.w2;
      r.w1_mu_star = cur.w1;
      r.w15_mu_star = cur.w15;
      r.w2_out_star = next.w2;
      if (res.exact_output) {
        const Measure& step = *res.exact_output;
        if (ex.G) r.G_step = safe_eval(*ex.G, step);
        if (star) r.w2_step_star = safe_w2(step, *star);
        r.displacement = safe_w2(step, mu);
        r.w2_out_step = safe_w2(out, step);
        if (star && r.w2_step_star && r.w2_mu_star && r.G_step && r.displacement && ex.oracle) {
          const double a = *r.w2_step_star * *r.w2_step_star;
          const double b = *r.w2_mu_star * *r.w2_mu_star;
          const double disp = *r.displacement * *r.displacement;
          const double g_nu = ex.oracle->value;
          if (ex.pg) {
            r.evi_residual = a - (1.0 - r.tau * ex.pg->lambda) * b + 2.0 * r.tau * (*r.G_step - g_nu) +
                             (1.0 - r.tau * ex.pg->L) * disp;
          } else {
            r.evi_residual = a - b - 2.0 * r.tau * (g_nu - *r.G_step) + disp;
          }
        }
        if (store) r.step = step;
      }
      if (eta) {
        r.eta_mean_norm = wflow::mean(*eta).norm();
        r.eta_second_moment = second_moment(*eta);
        r.w2_eta_out = safe_w2(out, *eta);
        if (res.exact_output) r.w2_eta_step = safe_w2(*res.exact_output, *eta);
        if (prev_step) r.w2_prev_step_eta = safe_w2(*prev_step, *eta);
        r.grad_norm_out = gradient_norm(ex.pg->F, out);
      }
      if (store) r.measure = mu;
      prev_step = res.exact_output;
      trace.records.push_back(std::move(r));
      mu = out;
      cur = next;
    }
  } catch (const Error& e) {
    trace.aborted = json{{"n", n}, {"error", e.what()}};
    if (!c.output.trace.empty()) write_trace(trace, c.output.trace);
    throw Error(e.code(), "iteration " + std::to_string(n) + ": " + e.what());
  }

  FinalRecord f;
  f.n = c.iterations;
  f.sigma = c.steps.sigma(c.iterations);
  f.measure = mu;
  f.G = cur.G;
  f.w2_star = cur.w2;
  f.w1_star = cur.w1;
  f.w15_star = cur.w15;
  trace.final = std::move(f);
  return trace;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) invalid("cannot write '" + path + "'");
  out << text;
}

}  // namespace

Trace run_and_write(const ExperimentConfig& c) {
  Trace trace = run(c);
  if (!c.output.trace.empty()) write_trace(trace, c.output.trace);
  if (!c.output.csv.empty()) write_text(c.output.csv, trace_csv(trace));
  if (!c.output.plot.empty()) write_text(c.output.plot, plot_csv(trace, certify_trace(trace)));
  return trace;
}

CertifyOptions certify_options(const Trace& trace) {
  CertifyOptions opts;
  const ExperimentConfig c = ExperimentConfig::from_json(trace.header.config, false);
  if (c.algorithm == "jko") {
    opts.G = functional_from_json(c.functional, c.dim);
  } else if (c.algorithm == "proxgrad") {
    opts.G = PgProblem::make(potential_from_json(c.F, c.dim), functional_from_json(c.H, c.dim)).G();
  }
  opts.conditions = conditions_for(c);
  opts.wp_tolerance = c.wp_tolerance;
  return opts;
}

RunReport certify_trace(const Trace& trace) { return certify(trace, certify_options(trace)); }

namespace {

void set_path(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::stringstream ss(dotted);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  if (keys.empty()) invalid("empty grid path");
  for (size_t i = 0; i + 1 < keys.size(); ++i) {
    if (node->is_string()) *node = json{{"mode", node->get<std::string>()}};
    node = &(*node)[keys[i]];
  }
  (*node)[keys.back()] = value;
}

}  // namespace

std::vector<SweepPoint> sweep(const json& base, const json& grid, const std::string& out_dir, unsigned workers) {
  if (!grid.is_object() || grid.empty()) invalid("grid must be a non-empty object of dotted paths");
  std::vector<std::pair<std::string, std::vector<json>>> axes;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (!it.value().is_array() || it.value().empty()) invalid("grid axis '" + it.key() + "' must be a non-empty list");
    axes.emplace_back(it.key(), it.value().get<std::vector<json>>());
  }
  std::vector<json> params(1, json::object());
  for (const auto& [path, values] : axes) {
    std::vector<json> next;
    for (const auto& p : params)
      for (const auto& v : values) {
        json q = p;
        q[path] = v;
        next.push_back(q);
      }
    params = std::move(next);
  }
  std::filesystem::create_directories(out_dir);
  std::vector<SweepPoint> points(params.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&] {
    for (size_t i = cursor++; i < params.size(); i = cursor++) {
      SweepPoint& pt = points[i];
      pt.params = params[i];
      pt.trace_path = (std::filesystem::path(out_dir) / ("point_" + std::to_string(i) + ".json")).string();
      try {
        json cfg = base;
        for (auto it = params[i].begin(); it != params[i].end(); ++it) set_path(cfg, it.key(), it.value());
        cfg["output"] = json{{"trace", pt.trace_path}};
        const ExperimentConfig c = ExperimentConfig::from_json(cfg);
        pt.conditions_hold = conditions_for(c).all_hold();
        const Trace t = run_and_write(c);
        const RunReport report = certify_trace(t);
        pt.all_pass = report.all_pass();
        for (const auto& r : report.rates)
          if (r.target != RateTarget::BestIterate) pt.rate_sup = r.sup;
        if (t.final) {
          pt.w1 = t.final->w1_star;
          pt.w15 = t.final->w15_star;
          pt.w2 = t.final->w2_star;
        }
        pt.ok = true;
      } catch (const std::exception& e) {
        pt.ok = false;
        pt.error = e.what();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(params.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return points;
}

std::string sweep_summary_csv(const std::vector<SweepPoint>& points) {
  auto cell = [](const std::optional<double>& x) {
    if (!x) return std::string();
    std::ostringstream os;
    os.precision(12);
    os << *x;
    return os.str();
  };
  auto quote = [](std::string s) {
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
  };
  std::ostringstream os;
  os << "index,params,status,conditions_hold,certified,rate_sup,w1,w1_5,w2,trace,error\n";
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    os << i << ',' << quote(p.params.dump()) << ',' << (p.ok ? "ok" : "error") << ','
       << (p.conditions_hold ? "yes" : "no") << ',' << (p.all_pass ? "yes" : "no") << ',' << cell(p.rate_sup) << ','
       << cell(p.w1) << ',' << cell(p.w15) << ',' << cell(p.w2) << ',' << quote(p.trace_path) << ','
       << quote(p.error) << '\n';
  }
  return os.str();
}

}  // namespace wflow
