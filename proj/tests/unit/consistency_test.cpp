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

#include <gtest/gtest.h>

#include <random>

#include "mixit/consistency.hpp"
#include "mixit/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mixit {
namespace {

using testing::projection_oracle;
using testing::random_set;
using testing::random_wave;
using testing::wave;

TEST(Consistency, SymmetricResidualSplit) {
  const SourceSet out = mixture_consistency_project({SourceSet({wave({0.5}), wave({0.5})}), wave({2.0})});
  EXPECT_DOUBLE_EQ(out[0].samples()[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1].samples()[0], 1.0);
}

TEST(Consistency, ConsistentInputUnchanged) {
  std::mt19937_64 gen(31);
  const SourceSet s = random_set(3, 32, gen);
  const SourceSet out = mixture_consistency_project({s, mix(s)});
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t t = 0; t < 32; ++t) EXPECT_NEAR(out[m].samples()[t], s[m].samples()[t], 1e-14);
  }
}

TEST(Consistency, SumsToMixtureIdempotentAndMatchesLeastSquares) {
  std::mt19937_64 gen(32);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t M = 2 + static_cast<std::size_t>(rep % 4);
    const SourceSet raw = random_set(M, 24, gen);
    const Waveform x = random_wave(24, gen);
    const SourceSet out = mixture_consistency_project({raw, x});
    const Waveform sum = mix(out);
    for (std::size_t t = 0; t < 24; ++t) {
      EXPECT_NEAR(sum.samples()[t], x.samples()[t], 1e-10 * std::max(1.0, std::abs(x.samples()[t])));
    }
    const SourceSet again = mixture_consistency_project({out, x});
    const SourceSet oracle = projection_oracle(raw, x);
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t t = 0; t < 24; ++t) {
        EXPECT_NEAR(again[m].samples()[t], out[m].samples()[t], 1e-12);
        EXPECT_NEAR(out[m].samples()[t], oracle[m].samples()[t], 1e-12);
      }
    }
  }
}

TEST(Consistency, LengthMismatchRejected) {
  EXPECT_THROW(mixture_consistency_project({SourceSet({wave({1, 2})}), wave({1})}), InvalidInput);
}

}  // namespace
}  // namespace mixit
