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

#include "mixit/consistency.hpp"

#include "mixit/error.hpp"

namespace mixit {

SourceSet mixture_consistency_project(const ProjectionInput& input) {
  const SourceSet& raw = input.raw_estimates;
  if (raw.empty()) throw InvalidInput("consistency projection needs at least one estimate");
  check_combinable(raw[0], input.mixture);

  const std::size_t len = raw.length();
  const double share = 1.0 / static_cast<double>(raw.size());
  std::vector<double> residual(input.mixture.samples().begin(), input.mixture.samples().end());
  for (const auto& s : raw) {
    auto v = s.samples();
    for (std::size_t t = 0; t < len; ++t) residual[t] -= v[t];
  }
  std::vector<Waveform> out;
  out.reserve(raw.size());
  for (const auto& s : raw) {
    std::vector<double> projected(s.samples().begin(), s.samples().end());
    for (std::size_t t = 0; t < len; ++t) projected[t] += share * residual[t];
    out.emplace_back(std::move(projected), s.sample_rate());
  }
  return SourceSet(std::move(out));
}

}  // namespace mixit
