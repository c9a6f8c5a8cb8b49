#include <benchmark/benchmark.h>

#include "wflow/rng.hpp"
#include "wflow/transport.hpp"

namespace {

wflow::DiscreteMeasure cloud(int n, int d, std::uint64_t seed) {
  wflow::Rng rng(seed);
  wflow::Matrix pts(n, d);
  for (int i = 0; i < n; ++i) pts.row(i) = rng.normal_vector(d).transpose();
  wflow::Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform();
  w /= w.sum();
  return wflow::DiscreteMeasure(std::move(pts), std::move(w));
}

void BM_Wp1d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = cloud(n, 1, 1), b = cloud(n, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wflow::wp_1d(a, b, 2.0));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Wp1d)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

void BM_TransportLP(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = cloud(n, 2, 3), b = cloud(n, 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(wflow::w2_discrete(a, b).cost);
}
BENCHMARK(BM_TransportLP)->RangeMultiplier(2)->Range(8, 128);

void BM_Sinkhorn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = cloud(n, 2, 5), b = cloud(n, 2, 6);
  for (auto _ : state) benchmark::DoNotOptimize(wflow::w2_sinkhorn(a, b, 0.05).cost);
}
BENCHMARK(BM_Sinkhorn)->RangeMultiplier(2)->Range(8, 128);

void BM_Bures(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  wflow::Rng rng(7);
  wflow::Matrix m1 = wflow::Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
  wflow::Matrix m2 = wflow::Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
  const wflow::GaussianMeasure g1(wflow::Vector::Zero(d), m1 * m1.transpose() + wflow::Matrix::Identity(d, d));
  const wflow::GaussianMeasure g2(wflow::Vector::Ones(d), m2 * m2.transpose() + wflow::Matrix::Identity(d, d));
  for (auto _ : state) benchmark::DoNotOptimize(wflow::w2_gaussian(g1, g2).squared);
}
BENCHMARK(BM_Bures)->Arg(2)->Arg(8)->Arg(32);

}  // namespace
