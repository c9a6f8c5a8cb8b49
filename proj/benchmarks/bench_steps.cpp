#include <benchmark/benchmark.h>

#include "wflow/jko.hpp"
#include "wflow/proxgrad.hpp"

namespace {

void BM_JkoVariationalGaussian(benchmark::State& state) {
  const auto f = wflow::Functional::free_energy(1.0, wflow::Vector::Zero(2));
  const wflow::Measure mu = wflow::GaussianMeasure::isotropic(wflow::Vector::Ones(2), 4.0);
  const double eps = 1e-3 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    wflow::Rng rng(1);
    benchmark::DoNotOptimize(wflow::jko_step(mu, 0.5, f, wflow::StepModeSpec::variational(eps), rng));
  }
}
BENCHMARK(BM_JkoVariationalGaussian)->Arg(1)->Arg(100)->Arg(10000);

void BM_JkoVariationalParticles(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto f = wflow::Functional::potential(wflow::PotentialSpec::quadratic_isotropic(1.0, wflow::Vector::Zero(1)));
  wflow::Rng init(3);
  wflow::Matrix pts(n, 1);
  for (int i = 0; i < n; ++i) pts(i, 0) = init.normal();
  const wflow::Measure mu = wflow::DiscreteMeasure::uniform(std::move(pts));
  for (auto _ : state) {
    wflow::Rng rng(1);
    benchmark::DoNotOptimize(wflow::jko_step(mu, 1.0, f, wflow::StepModeSpec::variational(1e-4), rng));
  }
}
BENCHMARK(BM_JkoVariationalParticles)->Arg(16)->Arg(256)->Arg(4096);

void BM_UlaStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto F = wflow::PotentialSpec::quadratic_isotropic(1.0, wflow::Vector::Zero(1));
  const auto particles = wflow::DiscreteMeasure::uniform(wflow::Matrix::Zero(n, 1));
  const wflow::Rng rng(11);
  for (auto _ : state) benchmark::DoNotOptimize(wflow::ula_step(particles, 0.05, F, rng));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_UlaStep)->Arg(1000)->Arg(10000);

}  // namespace
