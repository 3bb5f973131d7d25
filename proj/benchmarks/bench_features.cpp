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

#include <vector>

#include "citysound/features.hpp"
#include "citysound/rng.hpp"

namespace {

using citysound::Rng;
namespace features = citysound::features;

std::vector<float> noise(std::size_t n) {
  Rng rng(42);
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return x;
}

// One 10 s, 48 kHz clip is 480000 samples; the argument is seconds.
void BM_StftMagnitude(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)) * 48000);
  features::StftConfig cfg;
  for (auto _ : state) {
    auto m = features::stft_magnitude(x, cfg);
    benchmark::DoNotOptimize(m.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(x.size()));
}
BENCHMARK(BM_StftMagnitude)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_LogMelExtract(benchmark::State& state) {
  citysound::dataset::AudioClip clip;
  clip.samples = noise(static_cast<std::size_t>(state.range(0)) * 48000);
  clip.sample_rate = 48000;
  features::LogMelExtractor extractor(features::FeatureConfig{});
  for (auto _ : state) {
    auto fm = extractor.extract(clip);
    benchmark::DoNotOptimize(fm.values.data());
  }
}
BENCHMARK(BM_LogMelExtract)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_SmoothTime(benchmark::State& state) {
  features::FeatureMatrix fm{features::FloatMatrix::Random(938, 128)};
  for (auto _ : state) {
    auto out = features::smooth_time(fm, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(out.values.data());
  }
}
BENCHMARK(BM_SmoothTime)->Arg(25)->Unit(benchmark::kMicrosecond);

}  // namespace
