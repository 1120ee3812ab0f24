#include <benchmark/benchmark.h>

#include <random>

#include "halo/geometry.hpp"

namespace {

using namespace halo;

BallPoint random_point(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return BallPoint(v * (0.5 / v.norm()));
}

void BM_MobiusAdd(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int n = static_cast<int>(state.range(0));
  const ManifoldParams m;
  const BallPoint x = random_point(rng, n), y = random_point(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(mobius_add(x, y, m));
}
BENCHMARK(BM_MobiusAdd)->Arg(2)->Arg(16)->Arg(64);

void BM_ExpMap(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int n = static_cast<int>(state.range(0));
  const ManifoldParams m;
  const BallPoint x = random_point(rng, n);
  const Vec v = random_point(rng, n).coords;
  for (auto _ : state) benchmark::DoNotOptimize(exp_map(x, v, m));
}
BENCHMARK(BM_ExpMap)->Arg(2)->Arg(16)->Arg(64);

void BM_Distance(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const ManifoldParams m;
  const BallPoint x = random_point(rng, 16), y = random_point(rng, 16);
  for (auto _ : state) benchmark::DoNotOptimize(poincare_distance(x, y, m));
}
BENCHMARK(BM_Distance);

}  // namespace
