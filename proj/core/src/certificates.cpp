#include "wflow/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_pg(const Trace& t) { return t.header.algorithm == "proxgrad"; }

bool all_errors_zero(const Trace& t) {
  return std::all_of(t.records.begin(), t.records.end(), [](const IterationRecord& r) { return r.eps == 0.0; });
}

bool variational(const IterationRecord& r) { return r.mode == "variational"; }

CheckResult not_applicable(const std::string& name, const std::string& note) {
  CheckResult c;
  c.name = name;
  c.applicable = false;
  c.note = note;
  c.worst_margin = kInf;
  return c;
}

CheckResult fresh(const std::string& name) {
  CheckResult c;
  c.name = name;
  c.worst_margin = kInf;
  return c;
}

double sigma_after(const Trace& t, size_t i) {
  if (i + 1 < t.records.size()) return t.records[i + 1].sigma;
  if (t.final) return t.final->sigma;
  return t.records[i].sigma + t.records[i].tau;
}

}  // namespace

void CheckResult::add(long n, double margin, double tolerance) {
  margins.push_back(margin);
  if (margins.size() == 1 || !(margin >= worst_margin)) {
    worst_margin = margin;
    worst_n = n;
  }
  pass = pass && margin >= -tolerance;
}

nlohmann::json CheckResult::to_json() const {
  return {{"pass", pass},
          {"worst_margin", number_to_json(worst_margin)},
          {"worst_n", worst_n},
          {"authoritative", authoritative},
          {"applicable", applicable},
          {"note", note}};
}

double evi_residual_jko(const Measure& mu, const Measure& j_mu, const Measure& nu, double tau, const Functional& G) {
  return w2_squared(j_mu, nu) - w2_squared(mu, nu) - 2.0 * tau * (eval(G, nu) - eval(G, j_mu)) +
         w2_squared(j_mu, mu);
}

double evi_residual_pg(const Measure& mu, const Measure& t_mu, const Measure& nu, double tau, double lambda,
                       double L, const Functional& G) {
  if (tau * L >= 1.0) fail(ErrorCode::StepTooLarge, "EVI needs tau < 1/L");
  return w2_squared(t_mu, nu) - (1.0 - tau * lambda) * w2_squared(mu, nu) +
         2.0 * tau * (eval(G, t_mu) - eval(G, nu)) + (1.0 - tau * L) * w2_squared(mu, t_mu);
}

CheckResult evi_check(const Trace& trace) {
  CheckResult c = fresh("evi");
  for (const auto& r : trace.records)
    if (r.evi_residual) c.add(r.n, -*r.evi_residual, trace.header.tolerance);
  if (c.margins.empty()) return not_applicable("evi", "no residuals recorded");
  return c;
}

CheckResult fejer_check(const Trace& trace) {
  if (!trace.header.minimizer) fail(ErrorCode::OracleUnavailable, "quasi-Fejer check needs a minimizer");
  CheckResult c = fresh("fejer");
  for (const auto& r : trace.records) {
    if (!r.w2_step_star || !r.w2_mu_star || !r.w2_out_star) continue;
    const double tol = trace.header.tolerance;
    c.add(r.n, *r.w2_step_star + r.eps - *r.w2_out_star, tol);
    c.add(r.n, *r.w2_mu_star - *r.w2_step_star, tol);
  }
  if (c.margins.empty()) return not_applicable("fejer", "no exact steps recorded");
  return c;
}

CheckResult step_error_check(const Trace& trace) {
  CheckResult c = fresh("step_error");
  for (const auto& r : trace.records) {
    // The gap-to-distance implication carries the inner solver's rounding.
    const double tol = variational(r) ? std::max(trace.header.tolerance, 1e-6) : trace.header.tolerance;
    if (r.w2_out_step) c.add(r.n, r.eps - *r.w2_out_step, tol);
    if (r.certified_w2_error) c.add(r.n, r.eps - *r.certified_w2_error, trace.header.tolerance);
    if (variational(r) && r.certified_energy_gap)
      c.add(r.n, r.eps * r.eps / (2.0 * r.tau) - *r.certified_energy_gap, 0.0);
  }
  if (c.margins.empty()) return not_applicable("step_error", "no step errors recorded");
  return c;
}

CheckResult decrease_check(const Trace& trace) {
  CheckResult c = fresh("decrease");
  const bool pg = is_pg(trace);
  const double tol = trace.header.tolerance;
  for (size_t i = 1; i < trace.records.size(); ++i) {
    const auto& prev = trace.records[i - 1];
    const auto& r = trace.records[i];
    if (!r.G_step || !prev.G_step || !std::isfinite(*r.G_step) || !std::isfinite(*prev.G_step)) continue;
    const double e = prev.eps;
    if (pg) {
      if (e > 0.0 && (!r.w2_prev_step_eta || !r.w2_eta_step)) continue;
      const double slack = e > 0.0 ? (e / r.tau) * (*r.w2_prev_step_eta + *r.w2_eta_step + e) : 0.0;
      c.add(r.n, slack - (*r.G_step - *prev.G_step), tol);
    } else {
      if (!r.displacement) continue;
      const double lhs = *r.G_step + *r.displacement * *r.displacement / (2.0 * r.tau);
      const double rhs = *prev.G_step + e * e / (2.0 * r.tau);
      c.add(r.n, rhs - lhs, tol);
    }
  }
  if (c.margins.empty()) return not_applicable("decrease", "needs two consecutive exact-step values");
  return c;
}

RegularityResult asymptotic_regularity(const Trace& trace) {
  RegularityResult res;
  double s = 0.0;
  for (const auto& r : trace.records) {
    if (r.displacement) s += *r.displacement * *r.displacement;
    res.sums.push_back(s);
  }
  res.check = fresh("asymptotic_regularity");
  res.check.authoritative = false;
  res.check.note = "heuristic: last-quarter increment below 5% of the total";
  if (res.sums.empty() || std::none_of(trace.records.begin(), trace.records.end(),
                                       [](const IterationRecord& r) { return r.displacement.has_value(); })) {
    res.check.applicable = false;
    res.check.note = "no displacements recorded";
    return res;
  }
  const size_t n = res.sums.size();
  const double total = res.sums.back();
  const double before = n >= 4 ? res.sums[n - 1 - n / 4] : 0.0;
  const double increment = total - before;
  const double margin = total > 0.0 ? 0.05 * total - increment : 0.0;
  res.check.add(static_cast<long>(n) - 1, margin, 0.0);
  res.check.pass = total == 0.0 || increment < 0.05 * total;
  return res;
}

std::string to_string(RateTarget t) {
  switch (t) {
    case RateTarget::BestIterate: return "best_iterate";
    case RateTarget::ExactStepValues: return "exact_step_values";
    case RateTarget::IterateValues: return "iterate_values";
  }
  return "exact_step_values";
}

RateCertificate rate_certificate(const Trace& trace, RateTarget target) {
  if (!trace.header.minimizer || !trace.header.min_value)
    fail(ErrorCode::OracleUnavailable, "rate certificate needs a minimizer with its value");
  const double inf_g = *trace.header.min_value;
  const double tol = trace.header.tolerance;
  const bool pg = is_pg(trace);
  const auto& recs = trace.records;

  RateCertificate rc;
  rc.target = target;
  rc.check = fresh("rate_" + to_string(target));
  if (recs.empty()) {
    rc.check.applicable = false;
    rc.check.note = "empty trace";
    return rc;
  }
  if (!recs[0].w2_mu_star) fail(ErrorCode::OracleUnavailable, "initial distance to the minimizer not recorded");
  const double w0 = *recs[0].w2_mu_star * *recs[0].w2_mu_star;

  auto gap_of = [&](double g, long n) {
    const double gap = g - inf_g;
    if (gap < -tol * (1.0 + std::abs(inf_g)))
      fail(ErrorCode::NegativeGap, "G below its infimum at n=" + std::to_string(n));
    return std::max(gap, 0.0);
  };
  // ε̃_k bounds W_2²(μ_{k+1},ν) − W_2²(step_k,ν) through the triangle inequality.
  auto tilde = [&](const IterationRecord& r) {
    const double c = r.w2_step_star.value_or(0.0);
    return 2.0 * r.eps * c + r.eps * r.eps;
  };
  auto push = [&](long n, double sigma, double gap, double bound) {
    const double product = sigma == 0.0 ? 0.0 : sigma * gap;
    rc.n.push_back(n);
    rc.sigma.push_back(sigma);
    rc.gap.push_back(gap);
    rc.product.push_back(product);
    rc.bound.push_back(bound);
    rc.sup = std::max(rc.sup, product);
    rc.check.add(n, bound - product, tol * (1.0 + sigma));
  };
  if (all_errors_zero(trace)) rc.exact_constant = w0 / 2.0;

  switch (target) {
    case RateTarget::ExactStepValues: {
      double tilde_sum = 0.0, decrease_sum = 0.0;
      for (size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        if (!r.G_step) fail(ErrorCode::OracleUnavailable, "exact-step values not recorded");
        tilde_sum += tilde(r);
        if (i >= 1) {
          const double e = recs[i - 1].eps;
          double d = 0.0;
          if (pg) {
            if (e > 0.0) d = (e / r.tau) * (r.w2_prev_step_eta.value_or(kInf) + r.w2_eta_step.value_or(kInf) + e);
          } else {
            d = e * e / (2.0 * r.tau);
          }
          decrease_sum += r.sigma * d;
        }
        push(r.n + 1, sigma_after(trace, i), gap_of(*r.G_step, r.n), (w0 + tilde_sum) / 2.0 + decrease_sum);
      }
      break;
    }
    case RateTarget::BestIterate: {
      double tilde_sum = 0.0;
      double best = kInf;
      long best_n = -1;
      for (size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        if (!r.G_step) fail(ErrorCode::OracleUnavailable, "exact-step values not recorded");
        tilde_sum += tilde(r);
        if (*r.G_step < best) {
          best = *r.G_step;
          best_n = r.n;
        }
        rc.best_index.push_back(best_n);
        push(r.n + 1, sigma_after(trace, i), gap_of(best, r.n), (w0 + tilde_sum) / 2.0);
      }
      break;
    }
    case RateTarget::IterateValues: {
      double tilde_sum = 0.0, q_tau = 0.0, q_sigma = 0.0;
      auto q_of = [&](const IterationRecord& r) {
        const double e = r.eps;
        if (e == 0.0) return 0.0;
        if (!pg) return e * e / (2.0 * r.tau);
        const double c1 = r.w2_eta_out.value_or(kInf) + r.w2_eta_step.value_or(kInf);
        const double c2 = 2.0 * r.tau * r.grad_norm_out.value_or(kInf);
        return (c1 * e + e * e + c2 * e) / (2.0 * r.tau);
      };
      for (size_t i = 0; i <= recs.size(); ++i) {
        std::optional<double> g;
        long n;
        double sigma;
        if (i < recs.size()) {
          g = recs[i].G_mu;
          n = recs[i].n;
          sigma = recs[i].sigma;
        } else {
          if (!trace.final) break;
          g = trace.final->G;
          n = trace.final->n;
          sigma = trace.final->sigma;
        }
        if (!g) fail(ErrorCode::OracleUnavailable, "iterate values not recorded");
        const double bound = (w0 + tilde_sum) / 2.0 + q_tau + q_sigma;
        if (sigma == 0.0)
          push(n, sigma, std::isfinite(*g) ? gap_of(*g, n) : kInf, bound);
        else
          push(n, sigma, gap_of(*g, n), bound);
        if (i < recs.size()) {
          const auto& r = recs[i];
          tilde_sum += tilde(r);
          const double q = q_of(r);
          q_tau += r.tau * q;
          q_sigma += r.sigma * q;
        }
      }
      break;
    }
  }
  if (!std::isfinite(rc.sup)) rc.check.pass = false;
  return rc;
}

WeakConvergence weak_convergence_surrogate(const Trace& trace, const std::vector<double>& p_list,
                                           std::optional<double> tolerance) {
  if (!trace.header.minimizer) fail(ErrorCode::OracleUnavailable, "W_p series need a minimizer");
  const Measure& star = *trace.header.minimizer;
  WeakConvergence wc;
  wc.p = p_list;
  wc.series.assign(p_list.size(), {});
  wc.check = fresh("weak_convergence");
  wc.check.authoritative = tolerance.has_value();
  auto value = [&](double p, const std::optional<double>& w1, const std::optional<double>& w15,
                   const std::optional<double>& w2v, const std::optional<Measure>& m) -> std::optional<double> {
    if (p == 1.0 && w1) return w1;
    if (p == 1.5 && w15) return w15;
    if (p == 2.0 && w2v) return w2v;
    if (m) return wp(*m, star, p);
    return std::nullopt;
  };
  auto append = [&](long n, const std::optional<double>& w1, const std::optional<double>& w15,
                    const std::optional<double>& w2v, const std::optional<Measure>& m) {
    std::vector<std::optional<double>> row;
    for (double p : p_list) row.push_back(value(p, w1, w15, w2v, m));
    if (std::any_of(row.begin(), row.end(), [](const auto& x) { return !x; })) return;
    wc.n.push_back(n);
    for (size_t k = 0; k < p_list.size(); ++k) wc.series[k].push_back(*row[k]);
  };
  for (const auto& r : trace.records) append(r.n, r.w1_mu_star, r.w15_mu_star, r.w2_mu_star, r.measure);
  if (trace.final) append(trace.final->n, trace.final->w1_star, trace.final->w15_star, trace.final->w2_star,
                          trace.final->measure);
  if (wc.n.empty()) {
    wc.check.applicable = false;
    wc.check.note = "no W_p values";
    return wc;
  }
  if (tolerance) {
    for (size_t k = 0; k < p_list.size(); ++k) wc.check.add(wc.n.back(), *tolerance - wc.series[k].back(), 0.0);
    wc.check.note = "final W_p below the declared tolerance";
  } else {
    wc.check.note = "reported only (no tolerance declared)";
    wc.check.worst_margin = kInf;
  }
  return wc;
}

CheckResult recorded_values_check(const Trace& trace, const Functional* G) {
  CheckResult c = fresh("recorded_values");
  const double tol = trace.header.tolerance;
  const auto& star = trace.header.minimizer;
  auto compare = [&](long n, const std::optional<double>& recorded, double recomputed) {
    if (!recorded) return;
    const double a = *recorded;
    if (!std::isfinite(a) || !std::isfinite(recomputed)) {
      c.add(n, a == recomputed ? 0.0 : -kInf, tol);
      return;
    }
    c.add(n, tol * (1.0 + std::abs(a)) - std::abs(a - recomputed), tol);
  };
  for (const auto& r : trace.records) {
    if (r.measure) {
      if (star && r.w2_mu_star) compare(r.n, r.w2_mu_star, w2(*r.measure, *star));
      if (G && r.G_mu) compare(r.n, r.G_mu, eval(*G, *r.measure));
      if (r.step && r.displacement) compare(r.n, r.displacement, w2(*r.step, *r.measure));
    }
    if (r.step) {
      if (star && r.w2_step_star) compare(r.n, r.w2_step_star, w2(*r.step, *star));
      if (G && r.G_step) compare(r.n, r.G_step, eval(*G, *r.step));
    }
  }
  if (trace.final && trace.final->measure) {
    if (star && trace.final->w2_star) compare(trace.final->n, trace.final->w2_star, w2(*trace.final->measure, *star));
    if (G && trace.final->G) compare(trace.final->n, trace.final->G, eval(*G, *trace.final->measure));
  }
  if (c.margins.empty()) return not_applicable("recorded_values", "no stored measures to re-derive from");
  // Margins here already include the relative tolerance.
  c.pass = c.worst_margin >= 0.0;
  return c;
}

bool RunReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return !c.applicable || !c.authoritative || c.pass; });
}

const CheckResult* RunReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json out;
  nlohmann::json jc = nlohmann::json::object();
  for (const auto& c : checks) jc[c.name] = c.to_json();
  out["checks"] = jc;
  nlohmann::json jr = nlohmann::json::object();
  for (const auto& r : rates) {
    jr[to_string(r.target)] = {{"sup_sigma_times_gap", number_to_json(r.sup)},
                               {"exact_constant", number_to_json(r.exact_constant)},
                               {"final_bound", r.bound.empty() ? nlohmann::json(nullptr) : number_to_json(r.bound.back())},
                               {"best_index", r.best_index}};
  }
  out["rates"] = jr;
  if (weak) {
    nlohmann::json jw = nlohmann::json::object();
    for (size_t k = 0; k < weak->p.size(); ++k) {
      std::ostringstream key;
      key << weak->p[k];
      jw[key.str()] = weak->series[k].empty() ? nlohmann::json(nullptr) : number_to_json(weak->series[k].back());
    }
    out["final_wp"] = jw;
  }
  if (regularity && !regularity->sums.empty()) out["regularity_sum"] = number_to_json(regularity->sums.back());
  out["all_pass"] = all_pass();
  return out;
}

std::string RunReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(30) << "check" << std::setw(8) << "result" << std::setw(16) << "worst margin"
     << std::setw(9) << "worst n"
     << "kind\n";
  for (const auto& c : checks) {
    const char* result = !c.applicable ? "n/a" : (c.pass ? "pass" : "FAIL");
    os << std::left << std::setw(30) << c.name << std::setw(8) << result << std::setw(16) << std::setprecision(6)
       << c.worst_margin << std::setw(9) << c.worst_n << (c.authoritative ? "authoritative" : "heuristic");
    if (!c.note.empty()) os << "  (" << c.note << ")";
    os << "\n";
  }
  for (const auto& r : rates) {
    os << "sup sigma*gap [" << to_string(r.target) << "] = " << std::setprecision(10) << r.sup;
    if (r.exact_constant) os << "  (exact constant " << *r.exact_constant << ")";
    if (!r.bound.empty()) os << "  final bound " << r.bound.back();
    os << "\n";
  }
  if (weak && !weak->n.empty()) {
    os << "final W_p to minimizer:";
    for (size_t k = 0; k < weak->p.size(); ++k) os << "  p=" << weak->p[k] << ": " << weak->series[k].back();
    os << "\n";
  }
  os << "overall: " << (all_pass() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

RunReport certify(const Trace& trace, const CertifyOptions& options) {
  RunReport report;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OracleUnavailable) {
        report.checks.push_back(not_applicable(name, e.what()));
      } else {
        CheckResult c = fresh(name);
        c.pass = false;
        c.note = e.what();
        report.checks.push_back(c);
      }
    }
  };
  if (options.conditions) {
    CheckResult c = fresh("conditions");
    c.pass = options.conditions->all_hold();
    c.worst_margin = c.pass ? 0.0 : -1.0;
    c.note = "analytic schedule verdicts";
    report.checks.push_back(c);
  }
  if (trace.aborted) {
    CheckResult c = fresh("completed");
    c.pass = false;
    c.note = trace.aborted->dump();
    report.checks.push_back(c);
  }
  report.checks.push_back(evi_check(trace));
  guarded("fejer", [&] { report.checks.push_back(fejer_check(trace)); });
  report.checks.push_back(step_error_check(trace));
  report.checks.push_back(decrease_check(trace));
  report.regularity = asymptotic_regularity(trace);
  report.checks.push_back(report.regularity->check);

  const bool any_variational =
      std::any_of(trace.records.begin(), trace.records.end(), [](const IterationRecord& r) { return variational(r); });
  const bool has_steps = std::any_of(trace.records.begin(), trace.records.end(),
                                     [](const IterationRecord& r) { return r.G_step.has_value(); });
  std::vector<RateTarget> targets;
  if (has_steps) targets.push_back(RateTarget::BestIterate);
  if (any_variational) targets.push_back(RateTarget::IterateValues);
  else if (has_steps) targets.push_back(RateTarget::ExactStepValues);
  for (auto target : targets) {
    guarded("rate_" + to_string(target), [&] {
      RateCertificate rc = rate_certificate(trace, target);
      report.checks.push_back(rc.check);
      report.rates.push_back(std::move(rc));
    });
  }
  guarded("weak_convergence", [&] {
    report.weak = weak_convergence_surrogate(trace, {1.0, 1.5, 2.0}, options.wp_tolerance);
    report.checks.push_back(report.weak->check);
  });
  guarded("recorded_values", [&] {
    report.checks.push_back(recorded_values_check(trace, options.G ? &*options.G : nullptr));
  });
  return report;
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

std::string plot_csv(const Trace& trace, const RunReport& report) {
  std::ostringstream os;
  os << "n,sigma_n,gap,sigma_times_gap,w1,w2,evi_margin,eps\n";
  const RateCertificate* rate = nullptr;
  for (const auto& r : report.rates)
    if (r.target != RateTarget::BestIterate) rate = &r;
  if (!rate && !report.rates.empty()) rate = &report.rates.front();

  auto rate_at = [&](long n) -> std::optional<size_t> {
    if (!rate) return std::nullopt;
    auto it = std::find(rate->n.begin(), rate->n.end(), n);
    if (it == rate->n.end()) return std::nullopt;
    return static_cast<size_t>(it - rate->n.begin());
  };
  auto row = [&](long n, double sigma, std::optional<double> w1, std::optional<double> w2v,
                 std::optional<double> evi, std::optional<double> eps) {
    auto k = rate_at(n);
    os << n << ',' << cell(k ? rate->sigma[*k] : sigma) << ',' << cell(k ? std::optional(rate->gap[*k]) : std::nullopt)
       << ',' << cell(k ? std::optional(rate->product[*k]) : std::nullopt) << ',' << cell(w1) << ',' << cell(w2v)
       << ',' << cell(evi ? std::optional(-*evi) : std::nullopt) << ',' << cell(eps) << '\n';
  };
  for (const auto& r : trace.records) row(r.n, r.sigma, r.w1_mu_star, r.w2_mu_star, r.evi_residual, r.eps);
  if (trace.final && !trace.records.empty())
    row(trace.final->n, trace.final->sigma, trace.final->w1_star, trace.final->w2_star, std::nullopt, std::nullopt);
  return os.str();
}

}  // namespace wflow
