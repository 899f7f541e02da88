// Copyright 2026 The Super Token Transformer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Wall-clock cost of super token attention against global attention, plus
// whole-model forward and training steps at the Tiny scale.

#include <benchmark/benchmark.h>

#include "stt/blocks.hpp"
#include "stt/dataset.hpp"
#include "stt/flops.hpp"
#include "stt/sta.hpp"
#include "stt/train.hpp"

namespace stt {
namespace {

constexpr std::int64_t kChannels = 64;

// Argument: token-map side; cells are 4 x 4 (m = N / 16).
void BM_StaForward(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  Rng rng(1);
  const auto x = rng.normal_tensor<float>(Shape{1, kChannels, side, side});
  const auto w = StaWeights<float>::init(kChannels, rng);
  StaConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  cfg.heads = 2;
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sta_forward(x, cfg, w));
  const Count n = side * side;
  state.counters["MACs"] = static_cast<double>(flops_sta_iterated(n, kChannels, n / 16, cfg.n_iter));
}
BENCHMARK(BM_StaForward)->Arg(16)->Arg(32)->Arg(56)->Unit(benchmark::kMillisecond);

void BM_GsaForward(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  Rng rng(1);
  const auto x = rng.normal_tensor<float>(Shape{1, kChannels, side, side});
  const auto w = StaWeights<float>::init(kChannels, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(gsa_forward(x, w, 2));
  state.counters["MACs"] = static_cast<double>(flops_gsa(side * side, kChannels));
}
BENCHMARK(BM_GsaForward)->Arg(16)->Arg(32)->Arg(56)->Unit(benchmark::kMillisecond);

// Argument: iterations of the association update.
void BM_Sts(benchmark::State& state) {
  Rng rng(2);
  const auto x = rng.normal_tensor<float>(Shape{1, kChannels, 32, 32});
  StaConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  cfg.n_iter = static_cast<int>(state.range(0));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sts(x, cfg));
}
BENCHMARK(BM_Sts)->Arg(0)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_TinyForward(benchmark::State& state) {
  auto model = SvitModel::build(ArchConfig::preset("tiny"), 3);
  Rng rng(3);
  const auto x = rng.uniform_tensor<float>(Shape{state.range(0), 3, 32, 32}, 0.0, 1.0);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, ForwardContext{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TinyForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TinyTrainStep(benchmark::State& state) {
  auto cfg = ArchConfig::preset("tiny");
  auto model = SvitModel::build(cfg, 4);
  SyntheticDatasetSpec spec;
  spec.samples_per_class = 16;
  const auto data = gen_dataset(spec);
  std::vector<std::int64_t> batch(32);
  for (std::int64_t i = 0; i < 32; ++i) batch[static_cast<std::size_t>(i)] = i;
  const auto x = data.images(batch);
  const auto labels = data.labels_of(batch);
  OptimizerConfig opt;
  Optimizer optimizer(model.parameters(), opt);
  ForwardContext ctx;
  ctx.training = true;
  for (auto _ : state) {
    auto loss = cross_entropy(model.forward(x, ctx), labels);
    backward(loss);
    benchmark::DoNotOptimize(optimizer.step(opt.lr));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TinyTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace stt

BENCHMARK_MAIN();
