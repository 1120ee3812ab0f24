#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "halo/network.hpp"

namespace {

using namespace halo;

struct Batch {
  RowMatrix x;
  std::vector<int> y;
};

Batch make_batch(int rows, int dim, int classes) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> c(0, classes - 1);
  Batch b{RowMatrix(rows, dim), std::vector<int>(static_cast<std::size_t>(rows))};
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = g(rng);
  for (auto& y : b.y) y = c(rng);
  return b;
}

void BM_Forward(benchmark::State& state) {
  ModelConfig cfg;
  const Model model = init_model(cfg, 1);
  const Batch b = make_batch(static_cast<int>(state.range(0)), cfg.dims.input_dim, cfg.dims.num_classes);
  ForwardCache cache;
  for (auto _ : state) {
    forward(model, b.x, Mode::train, cache);
    benchmark::DoNotOptimize(cache.logits.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(256)->Arg(4096);

void BM_ForwardBackward(benchmark::State& state) {
  ModelConfig cfg;
  const Model model = init_model(cfg, 1);
  const Batch b = make_batch(static_cast<int>(state.range(0)), cfg.dims.input_dim, cfg.dims.num_classes);
  ForwardCache cache;
  for (auto _ : state) {
    forward(model, b.x, Mode::train, cache);
    const LossResult loss = softmax_ce_loss(cache.logits, b.y);
    benchmark::DoNotOptimize(backward(model, cache, loss, b.y));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(256)->Arg(4096);

}  // namespace
