#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wflow {

inline constexpr long kScheduleHorizon = 100'000;

/// τ_n: constant, power c/(n+1)^α, or an explicit finite list.
/// α < 0 (nondecreasing steps) is accepted.
class StepSchedule {
 public:
  enum class Family { Constant, Power, Explicit };

  static StepSchedule constant(double tau);
  static StepSchedule power(double c, double alpha);
  static StepSchedule explicit_list(std::vector<double> values);

  Family family() const { return family_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& values() const { return values_; }
  /// Length for explicit lists, unbounded otherwise.
  std::optional<long> length() const;

  double tau(long n) const;
  /// σ_n = Σ_{i<n} τ_i.
  double sigma(long n) const;
  /// sup_n τ_n; +∞ for increasing power families.
  double sup() const;

  nlohmann::json to_json() const;
  static StepSchedule from_json(const nlohmann::json& j);

 private:
  Family family_ = Family::Constant;
  double c_ = 1.0;
  double alpha_ = 0.0;
  std::vector<double> values_;
};

/// ε_n: zero, power c/(n+1)^β, or an explicit finite list.
class ErrorSchedule {
 public:
  enum class Family { Zero, Power, Explicit };

  static ErrorSchedule zero();
  static ErrorSchedule power(double c, double beta);
  static ErrorSchedule explicit_list(std::vector<double> values);

  Family family() const { return family_; }
  double c() const { return c_; }
  double beta() const { return beta_; }
  const std::vector<double>& values() const { return values_; }
  std::optional<long> length() const;

  double eps(long n) const;

  nlohmann::json to_json() const;
  static ErrorSchedule from_json(const nlohmann::json& j);

 private:
  Family family_ = Family::Zero;
  double c_ = 0.0;
  double beta_ = 1.0;
  std::vector<double> values_;
};

enum class Algorithm { JkoDistance, JkoVariational, PgDistance, PgVariational };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class Verdict { Holds, Fails, Unknown };
std::string to_string(Verdict v);

struct Condition {
  std::string name;
  Verdict verdict = Verdict::Unknown;
  double partial_sum = 0.0;  // up to the horizon; sup for the step cap
  long horizon = 0;
  bool required = false;     // hypothesis of the selected algorithm
};

struct ConditionReport {
  Algorithm algorithm;
  std::vector<Condition> conditions;

  /// Every required condition holds.
  bool all_hold() const;
  const Condition& get(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string table() const;
};

/// Analytic verdicts for symbolic families; explicit lists get partial sums
/// and "unknown" for the asymptotic conditions.
ConditionReport check_conditions(const StepSchedule& s, const ErrorSchedule& e, Algorithm algorithm,
                                 std::optional<double> L = std::nullopt, long horizon = kScheduleHorizon);

}  // namespace wflow
