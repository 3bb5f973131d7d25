// Copyright 2026 The citysound Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "citysound/models.hpp"
#include "citysound/nnet/layers.hpp"
#include "citysound/rng.hpp"

namespace {

using namespace citysound::nnet;

Tensor4<float> random_tensor(Shape4 s, std::uint64_t seed) {
  citysound::Rng rng(seed);
  Tensor4<float> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
  return t;
}

// The second conv block dominates training time on (63, 128) inputs.
void BM_Conv2dForward(benchmark::State& state) {
  const Shape4 in{static_cast<std::size_t>(state.range(0)), 32, 64, 32};
  auto layer = make_layer<float>(LayerSpec::conv2d(64, {7, 7}), in, 1);
  const auto x = random_tensor(in, 2);
  for (auto _ : state) {
    auto y = layer->forward(x, Mode::kTrain);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const Shape4 in{static_cast<std::size_t>(state.range(0)), 32, 64, 32};
  auto layer = make_layer<float>(LayerSpec::conv2d(64, {7, 7}), in, 1);
  const auto x = random_tensor(in, 2);
  const auto y = layer->forward(x, Mode::kTrain);
  const auto dy = random_tensor(y.shape(), 3);
  for (auto _ : state) {
    auto dx = layer->backward(dy);
    benchmark::DoNotOptimize(dx.data().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_BatchNormForward(benchmark::State& state) {
  const Shape4 in{32, 63, 128, 32};
  auto layer = make_layer<float>(LayerSpec::batch_norm(), in, 1);
  const auto x = random_tensor(in, 4);
  for (auto _ : state) {
    auto y = layer->forward(x, Mode::kTrain);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_BatchNormForward)->Unit(benchmark::kMillisecond);

// One optimisation step of the full city6 network on a batch of 32.
void BM_TrainStep(benchmark::State& state) {
  const auto spec = citysound::models::build_baseline(6, {63, 128, 1});
  Network<float> net(spec, 5);
  const auto x = random_tensor({32, 63, 128, 1}, 6);
  Tensor4<float> t(Shape4{32, 1, 1, 6});
  for (std::size_t i = 0; i < 32; ++i) t(i, 0, 0, i % 6) = 1.0f;
  const std::vector<Tensor4<float>> targets{t};
  for (auto _ : state) {
    auto loss = net.forward_backward(x, targets, Mode::kTrain);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
