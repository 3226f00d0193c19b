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

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mixit/signal.hpp"

namespace mixit::testing {

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

inline Waveform random_wave(std::size_t n, std::mt19937_64& gen, double scale = 1.0) {
  return Waveform(random_vector(n, gen, scale), kDefaultSampleRate);
}

inline SourceSet random_set(std::size_t count, std::size_t n, std::mt19937_64& gen,
                            double scale = 1.0) {
  std::vector<Waveform> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_wave(n, gen, scale));
  return SourceSet(std::move(out));
}

inline Waveform wave(std::vector<double> v) { return Waveform(std::move(v), kDefaultSampleRate); }

inline Waveform silent(std::size_t n) { return Waveform::zeros(n, kDefaultSampleRate); }

}  // namespace mixit::testing
