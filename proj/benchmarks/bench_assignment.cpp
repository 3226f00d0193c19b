/**
 * Copyright 2026 The MixIT Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <random>

#include "mixit/assignment.hpp"
#include "mixit/metrics.hpp"

namespace {

mixit::SourceSet random_set(std::size_t n, std::size_t len, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  std::vector<mixit::Waveform> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(len);
    for (auto& x : v) x = dist(rng);
    out.emplace_back(std::move(v), 8000);
  }
  return mixit::SourceSet(std::move(out));
}

void BM_MixitLoss(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  auto mixtures = random_set(2, 8000, rng);
  auto estimates = random_set(M, 8000, rng);
  mixit::LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(mixit::mixit_loss(mixtures, estimates, cfg));
  state.SetLabel("K=2, T=8000");
}
BENCHMARK(BM_MixitLoss)->Arg(2)->Arg(4)->Arg(8);

void BM_PitLoss(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  auto refs = random_set(M, 8000, rng);
  auto estimates = random_set(M, 8000, rng);
  mixit::LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(mixit::pit_loss(refs, estimates, cfg));
}
BENCHMARK(BM_PitLoss)->Arg(2)->Arg(4)->Arg(8);

void BM_Msi(benchmark::State& state) {
  std::mt19937_64 rng(3);
  auto refs = random_set(2, 8000, rng);
  auto estimates = random_set(4, 8000, rng);
  auto mixture = mixit::mix(refs);
  for (auto _ : state) benchmark::DoNotOptimize(mixit::msi(refs, estimates, mixture));
}
BENCHMARK(BM_Msi);

}  // namespace
