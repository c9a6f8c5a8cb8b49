#include "wflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace wflow {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::split(std::uint64_t stream) const {
  Rng child(0);
  child.key_ = mix(key_ ^ mix(stream + 0xD1B54A32D192ED03ULL));
  return child;
}

double Rng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

Eigen::VectorXd Rng::normal_vector(int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Eigen::VectorXd Rng::unit_direction(int dim) {
  if (dim == 1) {
    Eigen::VectorXd v(1);
    v[0] = ((*this)() >> 63) ? 1.0 : -1.0;
    return v;
  }
  for (;;) {
    Eigen::VectorXd v = normal_vector(dim);
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

}  // namespace wflow
