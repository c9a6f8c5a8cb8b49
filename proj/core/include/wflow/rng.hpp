#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace wflow {

// Counter-based generator (SplitMix64 over a 64-bit counter). Streams are
// derived from (seed, stream id) by hashing, so per-step and per-particle
// generators are independent of evaluation order and identical on every
// platform. Normal variates use Box-Muller on top of the raw stream; the
// standard library distributions are implementation-defined and would break
// byte-identical traces across toolchains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed)), counter_(0) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  /// Uniform on the open interval (0, 1).
  double uniform();

  double normal();

  Eigen::VectorXd normal_vector(int dim);

  /// Uniform direction on the unit sphere in R^dim (±1 when dim == 1).
  Eigen::VectorXd unit_direction(int dim);

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wflow
