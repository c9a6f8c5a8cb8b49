#include "wflow/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "wflow/error.hpp"

namespace wflow {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidSchedule, what);
}

}  // namespace

StepSchedule StepSchedule::constant(double tau) {
  require(tau > 0.0 && std::isfinite(tau), "constant stepsize must be positive");
  StepSchedule s;
  s.family_ = Family::Constant;
  s.c_ = tau;
  return s;
}

StepSchedule StepSchedule::power(double c, double alpha) {
  require(c > 0.0 && std::isfinite(c) && std::isfinite(alpha), "power stepsize needs c > 0 and finite alpha");
  StepSchedule s;
  s.family_ = Family::Power;
  s.c_ = c;
  s.alpha_ = alpha;
  return s;
}

StepSchedule StepSchedule::explicit_list(std::vector<double> values) {
  require(!values.empty(), "explicit stepsize list is empty");
  for (double v : values) require(v > 0.0 && std::isfinite(v), "stepsizes must be positive");
  StepSchedule s;
  s.family_ = Family::Explicit;
  s.values_ = std::move(values);
  return s;
}

std::optional<long> StepSchedule::length() const {
  if (family_ == Family::Explicit) return static_cast<long>(values_.size());
  return std::nullopt;
}

double StepSchedule::tau(long n) const {
  require(n >= 0, "negative schedule index");
  switch (family_) {
    case Family::Constant: return c_;
    case Family::Power: return c_ / std::pow(static_cast<double>(n + 1), alpha_);
    case Family::Explicit:
      require(n < static_cast<long>(values_.size()), "index beyond explicit stepsize list");
      return values_[static_cast<size_t>(n)];
  }
  return c_;
}

double StepSchedule::sigma(long n) const {
  require(n >= 0, "negative schedule index");
  if (family_ == Family::Constant) return static_cast<double>(n) * c_;
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += tau(i);
  return s;
}

double StepSchedule::sup() const {
  switch (family_) {
    case Family::Constant: return c_;
    case Family::Power: return alpha_ >= 0.0 ? c_ : std::numeric_limits<double>::infinity();
    case Family::Explicit: return *std::max_element(values_.begin(), values_.end());
  }
  return c_;
}

nlohmann::json StepSchedule::to_json() const {
  switch (family_) {
    case Family::Constant: return {{"family", "constant"}, {"tau", c_}};
    case Family::Power: return {{"family", "power"}, {"c", c_}, {"alpha", alpha_}};
    case Family::Explicit: return {{"family", "explicit"}, {"values", values_}};
  }
  return {};
}

StepSchedule StepSchedule::from_json(const nlohmann::json& j) {
  try {
    if (j.is_number()) return constant(j.get<double>());
    const std::string family = j.at("family").get<std::string>();
    if (family == "constant") return constant(j.contains("tau") ? j.at("tau").get<double>() : j.at("c").get<double>());
    if (family == "power") return power(j.at("c").get<double>(), j.value("alpha", 0.0));
    if (family == "explicit") return explicit_list(j.at("values").get<std::vector<double>>());
    fail(ErrorCode::InvalidSchedule, "unknown stepsize family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidSchedule, std::string("stepsize schedule: ") + e.what());
  }
}

ErrorSchedule ErrorSchedule::zero() { return ErrorSchedule{}; }

ErrorSchedule ErrorSchedule::power(double c, double beta) {
  require(c >= 0.0 && std::isfinite(c) && std::isfinite(beta), "power error schedule needs c >= 0 and finite beta");
  ErrorSchedule e;
  e.family_ = c == 0.0 ? Family::Zero : Family::Power;
  e.c_ = c;
  e.beta_ = beta;
  return e;
}

ErrorSchedule ErrorSchedule::explicit_list(std::vector<double> values) {
  require(!values.empty(), "explicit error list is empty");
  for (double v : values) require(v >= 0.0 && std::isfinite(v), "error magnitudes must be nonnegative");
  ErrorSchedule e;
  e.family_ = Family::Explicit;
  e.values_ = std::move(values);
  return e;
}

std::optional<long> ErrorSchedule::length() const {
  if (family_ == Family::Explicit) return static_cast<long>(values_.size());
  return std::nullopt;
}

double ErrorSchedule::eps(long n) const {
  require(n >= 0, "negative schedule index");
  switch (family_) {
    case Family::Zero: return 0.0;
    case Family::Power: return c_ / std::pow(static_cast<double>(n + 1), beta_);
    case Family::Explicit:
      require(n < static_cast<long>(values_.size()), "index beyond explicit error list");
      return values_[static_cast<size_t>(n)];
  }
  return 0.0;
}

nlohmann::json ErrorSchedule::to_json() const {
  switch (family_) {
    case Family::Zero: return {{"family", "zero"}};
    case Family::Power: return {{"family", "power"}, {"c", c_}, {"beta", beta_}};
    case Family::Explicit: return {{"family", "explicit"}, {"values", values_}};
  }
  return {};
}

ErrorSchedule ErrorSchedule::from_json(const nlohmann::json& j) {
  try {
    if (j.is_null()) return zero();
    if (j.is_string() && j.get<std::string>() == "zero") return zero();
    const std::string family = j.at("family").get<std::string>();
    if (family == "zero") return zero();
    if (family == "power") return power(j.at("c").get<double>(), j.at("beta").get<double>());
    if (family == "explicit") return explicit_list(j.at("values").get<std::vector<double>>());
    fail(ErrorCode::InvalidSchedule, "unknown error family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidSchedule, std::string("error schedule: ") + e.what());
  }
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::JkoDistance: return "jko_distance";
    case Algorithm::JkoVariational: return "jko_variational";
    case Algorithm::PgDistance: return "pg_distance";
    case Algorithm::PgVariational: return "pg_variational";
  }
  return "jko_distance";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "jko_distance") return Algorithm::JkoDistance;
  if (s == "jko_variational") return Algorithm::JkoVariational;
  if (s == "pg_distance") return Algorithm::PgDistance;
  if (s == "pg_variational") return Algorithm::PgVariational;
  fail(ErrorCode::InvalidConfig, "unknown algorithm '" + s + "'");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

bool ConditionReport::all_hold() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const Condition& c) { return !c.required || c.verdict == Verdict::Holds; });
}

const Condition& ConditionReport::get(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return c;
  fail(ErrorCode::InvalidConfig, "no condition named '" + name + "'");
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json out;
  out["algorithm"] = to_string(algorithm);
  out["all_hold"] = all_hold();
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json partial = std::isfinite(c.partial_sum) ? nlohmann::json(c.partial_sum) : nlohmann::json("inf");
    list.push_back({{"name", c.name},
                    {"verdict", to_string(c.verdict)},
                    {"partial_sum", partial},
                    {"horizon", c.horizon},
                    {"required", c.required}});
  }
  out["conditions"] = list;
  return out;
}

std::string ConditionReport::table() const {
  std::ostringstream os;
  os << "algorithm: " << to_string(algorithm) << "\n";
  os << std::left << std::setw(24) << "condition" << std::setw(10) << "verdict" << std::setw(18) << "partial sum"
     << std::setw(10) << "horizon"
     << "required\n";
  for (const auto& c : conditions) {
    os << std::left << std::setw(24) << c.name << std::setw(10) << to_string(c.verdict) << std::setw(18)
       << std::setprecision(10) << c.partial_sum << std::setw(10) << c.horizon << (c.required ? "yes" : "no") << "\n";
  }
  os << "all required hold: " << (all_hold() ? "yes" : "no") << "\n";
  return os.str();
}

ConditionReport check_conditions(const StepSchedule& s, const ErrorSchedule& e, Algorithm algorithm,
                                 std::optional<double> L, long horizon) {
  require(horizon > 0, "horizon must be positive");
  const bool step_symbolic = s.family() != StepSchedule::Family::Explicit;
  const bool err_symbolic = e.family() != ErrorSchedule::Family::Explicit;
  const bool err_zero = e.family() == ErrorSchedule::Family::Zero;

  long h_tau = std::min(horizon, s.length().value_or(horizon));
  long h_eps = std::min(horizon, e.length().value_or(horizon));
  // The shifted sums read ε_{n−1} up to n = h, so one extra index is allowed.
  long h_joint = std::min(h_tau, h_eps);
  long h_shift = std::min(h_tau, h_eps + 1);

  double sum_eps = 0.0;
  for (long n = 0; n < h_eps; ++n) sum_eps += e.eps(n);
  double sum_tau = 0.0;
  for (long n = 0; n < h_tau; ++n) sum_tau += s.tau(n);

  double jd = 0.0, jv = 0.0, pd = 0.0, pv = 0.0;
  double sigma = 0.0;
  for (long n = 0; n < std::max(h_joint, h_shift); ++n) {
    const double tau = s.tau(n);
    const double ratio = sigma / tau;
    if (n < h_joint) {
      const double en = e.eps(n);
      jv += ratio * en * en;
      pv += ratio * en;
    }
    if (n >= 1 && n < h_shift) {
      const double prev = e.eps(n - 1);
      jd += ratio * prev * prev;
      pd += ratio * prev;
    }
    sigma += tau;
  }

  // Symbolic classification: σ_n/τ_n ≍ n^e (times log n when α = 1) with
  // e = 1 for α ≤ 1 and e = α otherwise; Σ n^e ε^k converges iff kβ > e + 1.
  const double alpha = s.family() == StepSchedule::Family::Power ? s.alpha() : 0.0;
  const double growth = alpha <= 1.0 ? 1.0 : alpha;
  auto weighted = [&](int k) {
    if (!step_symbolic && !err_zero) return Verdict::Unknown;
    if (err_zero) return Verdict::Holds;
    if (!err_symbolic) return Verdict::Unknown;
    return k * e.beta() > growth + 1.0 ? Verdict::Holds : Verdict::Fails;
  };

  ConditionReport report{algorithm, {}};
  const bool pg = algorithm == Algorithm::PgDistance || algorithm == Algorithm::PgVariational;

  Verdict eps_verdict = err_zero ? Verdict::Holds
                        : err_symbolic ? (e.beta() > 1.0 ? Verdict::Holds : Verdict::Fails)
                                       : Verdict::Unknown;
  report.conditions.push_back({"sum_eps_finite", eps_verdict, sum_eps, h_eps, true});

  Verdict tau_verdict = step_symbolic ? (alpha <= 1.0 ? Verdict::Holds : Verdict::Fails) : Verdict::Unknown;
  report.conditions.push_back({"sum_tau_infinite", tau_verdict, sum_tau, h_tau, true});

  report.conditions.push_back({"jko_distance_rate", weighted(2), jd, h_shift, algorithm == Algorithm::JkoDistance});
  report.conditions.push_back(
      {"jko_variational_rate", weighted(2), jv, h_joint, algorithm == Algorithm::JkoVariational});
  report.conditions.push_back({"pg_distance_rate", weighted(1), pd, h_shift, algorithm == Algorithm::PgDistance});
  report.conditions.push_back({"pg_variational_rate", weighted(1), pv, h_joint, algorithm == Algorithm::PgVariational});

  if (pg || L) {
    Verdict cap = Verdict::Unknown;
    const double sup = s.sup();
    if (L) cap = (*L <= 0.0 || sup * *L < 1.0) ? Verdict::Holds : Verdict::Fails;
    report.conditions.push_back({"sup_tau_below_1_over_L", cap, sup, h_tau, pg});
  }
  return report;
}

}  // namespace wflow
