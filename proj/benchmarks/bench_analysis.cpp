#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "halo/acquisition.hpp"
#include "halo/analysis.hpp"

namespace {

using namespace halo;

void BM_SelectPixels(benchmark::State& state) {
  const int images = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreMap scores = ScoreMap::zeros(images, 64, 64, ScoreKind::other);
  for (auto& s : scores.values) s = u(rng);
  const LabelMask mask = LabelMask::empty(images, 64, 64);
  const std::size_t quota = scores.values.size() / 100;
  for (auto _ : state) benchmark::DoNotOptimize(select_pixels(scores, mask, quota));
}
BENCHMARK(BM_SelectPixels)->Arg(10)->Arg(50);

void BM_RegionScores(benchmark::State& state) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreMap scores = ScoreMap::zeros(10, 64, 64, ScoreKind::other);
  for (auto& s : scores.values) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(region_scores(scores, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_RegionScores)->Arg(3)->Arg(9);

void BM_FrechetMean(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<BallPoint> pts;
  for (int i = 0; i < state.range(0); ++i) {
    Vec v(16);
    for (int k = 0; k < 16; ++k) v(k) = g(rng);
    pts.emplace_back(v * (0.6 / std::max(1.0, v.norm())));
  }
  const ManifoldParams m;
  for (auto _ : state) benchmark::DoNotOptimize(frechet_mean(pts, m));
}
BENCHMARK(BM_FrechetMean)->Arg(64)->Arg(256);

}  // namespace
