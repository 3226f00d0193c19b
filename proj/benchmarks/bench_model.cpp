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

#include "mixit/datagen.hpp"
#include "mixit/model.hpp"
#include "mixit/train.hpp"

namespace {

void BM_Separate(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  auto model = mixit::init_parameters(mixit::ModelConfig::desk_scale(), 0);
  mixit::Rng rng(5);
  auto x = mixit::synth_toy_source(mixit::SourceKind::kModulatedNoise,
                                   static_cast<double>(len) / 8000.0, 8000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mixit::separate(model, x));
}
BENCHMARK(BM_Separate)->Arg(1024)->Arg(8000)->Unit(benchmark::kMillisecond);

// One full optimizer update of the desk-scale model on toy MoMs.
void BM_TrainStep(benchmark::State& state) {
  mixit::ToyCorpusOptions data;
  data.num_mixtures = 64;
  data.duration_s = 0.25;
  data.seed = 11;
  mixit::TrainConfig cfg;
  cfg.mode = mixit::TrainMode::kUnsupervised;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  cfg.crop_length = static_cast<std::size_t>(state.range(1));
  cfg.steps = 1u << 30;
  mixit::Trainer trainer(cfg, mixit::TrainData{mixit::make_toy_corpus(data), {}, {}});
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
  state.SetLabel("B=" + std::to_string(cfg.batch_size) + " T=" + std::to_string(cfg.crop_length));
}
BENCHMARK(BM_TrainStep)
    ->Args({4, 1024})
    ->Args({8, 1024})
    ->Args({8, 2000})
    ->Args({16, 2000})
    ->Unit(benchmark::kMillisecond);

}  // namespace
