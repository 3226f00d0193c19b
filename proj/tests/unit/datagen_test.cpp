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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mixit/datagen.hpp"
#include "mixit/error.hpp"
#include "mixit/manifest.hpp"
#include "test_util.hpp"

namespace mixit {
namespace {

double rms_db(const Waveform& w) {
  return 10.0 * std::log10(w.energy() / static_cast<double>(w.size()));
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.index(7), 7u);
    b.index(7);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(6);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(ToySources, SameSeedSameSamples) {
  for (auto kind : {SourceKind::kTonal, SourceKind::kModulatedNoise, SourceKind::kTransient}) {
    const auto a = synth_toy_sources(kind, 3, 0.25, 8000, 77);
    const auto b = synth_toy_sources(kind, 3, 0.25, 8000, 77);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(a[i].size(), 2000u);
      EXPECT_TRUE(std::equal(a[i].samples().begin(), a[i].samples().end(), b[i].samples().begin()));
    }
  }
}

TEST(ToySources, RmsWithinConfiguredRange) {
  ToySourceOptions opt;
  for (auto kind : {SourceKind::kTonal, SourceKind::kModulatedNoise, SourceKind::kTransient}) {
    for (const auto& w : synth_toy_sources(kind, 20, 0.5, 8000, 3, opt)) {
      EXPECT_GE(rms_db(w), opt.base_level_db - opt.level_range_db - 1e-9);
      EXPECT_LE(rms_db(w), opt.base_level_db + opt.level_range_db + 1e-9);
    }
  }
}

TEST(ToySources, DisjointBandTonesAreNearlyUncorrelated) {
  ToySourceOptions low, high;
  low.band_low_hz = 100;
  low.band_high_hz = 600;
  high.band_low_hz = 1500;
  high.band_high_hz = 3500;
  const auto a = synth_toy_sources(SourceKind::kTonal, 10, 1.0, 8000, 1, low);
  const auto b = synth_toy_sources(SourceKind::kTonal, 10, 1.0, 8000, 2, high);
  for (std::size_t i = 0; i < 10; ++i) {
    const double c = dot(a[i].samples(), b[i].samples()) / std::sqrt(a[i].energy() * b[i].energy());
    EXPECT_LT(std::abs(c), 0.1);
  }
}

std::vector<TrainExample> supervised_corpus(std::size_t n, std::size_t sources, std::uint64_t seed) {
  ToyCorpusOptions opt;
  opt.num_mixtures = n;
  opt.min_sources = opt.max_sources = sources;
  opt.duration_s = 0.05;
  opt.seed = seed;
  return make_toy_corpus(opt);
}

TEST(ToyCorpus, WorkerCountDoesNotChangeOutput) {
  ToyCorpusOptions opt;
  opt.num_mixtures = 12;
  opt.duration_s = 0.05;
  opt.seed = 4;
  const auto one = make_toy_corpus(opt);
  opt.workers = 3;
  const auto three = make_toy_corpus(opt);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_TRUE(std::equal(one[i].mixture.samples().begin(), one[i].mixture.samples().end(),
                           three[i].mixture.samples().begin()));
    EXPECT_EQ(one[i].true_source_count, three[i].true_source_count);
  }
}

TEST(ToyCorpus, ReferencesSumToMixtureAndPadToMax) {
  ToyCorpusOptions opt;
  opt.num_mixtures = 30;
  opt.min_sources = 1;
  opt.max_sources = 2;
  opt.duration_s = 0.05;
  std::set<std::size_t> counts;
  for (const auto& ex : make_toy_corpus(opt)) {
    ASSERT_TRUE(ex.references);
    EXPECT_EQ(ex.references->size(), 2u);
    counts.insert(ex.true_source_count);
    const Waveform sum = mix(*ex.references);
    EXPECT_TRUE(std::equal(sum.samples().begin(), sum.samples().end(), ex.mixture.samples().begin()));
  }
  EXPECT_EQ(counts, (std::set<std::size_t>{1, 2}));
}

TEST(MakeMom, NoZeroingSumsComponents) {
  const auto corpus = supervised_corpus(10, 1, 1);
  EpochSampler sampler(corpus.size(), 2);
  Rng rng(3);
  BatchSpec spec;
  const MomExample mom = make_mom(corpus, sampler, spec, rng);
  ASSERT_EQ(mom.components.size(), 2u);
  EXPECT_FALSE(mom.zeroed_component);
  const Waveform sum = mix(mom.component_mixtures());
  EXPECT_TRUE(std::equal(sum.samples().begin(), sum.samples().end(), mom.mom.samples().begin()));
}

TEST(MakeMom, CertainZeroingLeavesOneMixture) {
  const auto corpus = supervised_corpus(10, 2, 4);
  EpochSampler sampler(corpus.size(), 5);
  Rng rng(6);
  BatchSpec spec;
  spec.zero_probability = 1.0;
  const MomExample mom = make_mom(corpus, sampler, spec, rng);
  ASSERT_TRUE(mom.zeroed_component);
  const std::size_t z = *mom.zeroed_component;
  const TrainExample& kept = mom.components[1 - z];
  EXPECT_TRUE(mom.components[z].mixture.is_silent());
  EXPECT_TRUE(std::equal(kept.mixture.samples().begin(), kept.mixture.samples().end(),
                         mom.mom.samples().begin()));
  const auto refs = mom.references(4);
  ASSERT_TRUE(refs);
  std::size_t silent = 0;
  for (const auto& r : *refs) silent += r.is_silent() ? 1 : 0;
  EXPECT_EQ(silent, 2u);
  EXPECT_EQ(mom.true_source_count(), 2u);
}

TEST(MakeMom, ZeroingFrequencyMatchesP0) {
  const auto corpus = supervised_corpus(20, 1, 7);
  EpochSampler sampler(corpus.size(), 8);
  Rng rng(9);
  BatchSpec spec;
  spec.zero_probability = 0.2;
  int zeroed = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) zeroed += make_mom(corpus, sampler, spec, rng).zeroed_component ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(zeroed) / n, 0.2, 0.01);
}

TEST(MakeMom, UnsupervisedComponentsAreNeverZeroed) {
  std::vector<TrainExample> corpus;
  for (const auto& ex : supervised_corpus(6, 1, 10)) corpus.push_back(TrainExample::make_unsupervised(ex.mixture));
  EpochSampler sampler(corpus.size(), 11);
  Rng rng(12);
  BatchSpec spec;
  spec.zero_probability = 1.0;
  const MomExample mom = make_mom(corpus, sampler, spec, rng);
  EXPECT_FALSE(mom.zeroed_component);
  EXPECT_FALSE(mom.references(4));
}

TEST(EpochSampler, EachEpochIsAPermutation) {
  EpochSampler s(10, 1);
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 5; ++i)
    for (auto v : s.draw(2)) seen.insert(v);
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 10u);
}

std::vector<TrainExample> tagged(std::size_t n, std::string_view split) {
  std::vector<TrainExample> out;
  for (const auto& ex : supervised_corpus(n, 1, 20)) {
    out.push_back(TrainExample::make_unsupervised(ex.mixture, std::string(split)));
  }
  return out;
}

TEST(EnhancementPair, ConstraintAndSplitValidation) {
  const auto speech = tagged(4, kSplitSpeechPlusNoise);
  const auto noise = tagged(4, kSplitNoiseOnly);
  EpochSampler ss(4, 1), ns(4, 2);
  Rng rng(3);
  const MomExample pair = make_enhancement_pair(speech, ss, noise, ns, rng);
  ASSERT_TRUE(pair.constraint);
  const auto admitted = enumerate_mixing_matrices(2, 3, pair.constraint);
  for (const auto& a : admitted) EXPECT_EQ(a.mixture_of(0), 0u);
  EXPECT_EQ(pair.components[0].split, kSplitSpeechPlusNoise);
  EXPECT_THROW(make_enhancement_pair(noise, ss, speech, ns, rng), InvalidInput);
}

TEST(DynamicRemix, ReferencesSumAndEpochDraws) {
  const auto pool = synth_toy_sources(SourceKind::kTonal, 8, 0.05, 8000, 5);
  DynamicRemixer remixer(pool, 2, 6);
  std::set<std::size_t> used;
  for (int i = 0; i < 4; ++i) {
    const TrainExample ex = remixer.next();
    const Waveform sum = mix(*ex.references);
    EXPECT_TRUE(std::equal(sum.samples().begin(), sum.samples().end(), ex.mixture.samples().begin()));
    for (auto idx : remixer.last_draw()) EXPECT_TRUE(used.insert(idx).second) << "source reused";
  }
}

TEST(DynamicRemix, PairsAreUniform) {
  const std::size_t P = 6;
  std::vector<Waveform> pool;
  for (std::size_t i = 0; i < P; ++i) pool.push_back(testing::wave(std::vector<double>(4, double(i + 1))));
  DynamicRemixer remixer(pool, 2, 7);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    remixer.next();
    auto d = remixer.last_draw();
    counts[{std::min(d[0], d[1]), std::max(d[0], d[1])}]++;
  }
  const double pairs = P * (P - 1) / 2.0;
  ASSERT_EQ(counts.size(), static_cast<std::size_t>(pairs));
  double chi2 = 0.0;
  for (const auto& [_, c] : counts) chi2 += (c - n / pairs) * (c - n / pairs) / (n / pairs);
  EXPECT_LT(chi2, 29.14);  // chi-square(14) at p = 0.01
}

class CorpusIoTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "mixit_corpus_test";
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(CorpusIoTest, WriteLoadRoundTrip) {
  ToyCorpusOptions opt;
  opt.num_mixtures = 6;
  opt.duration_s = 0.05;
  const auto corpus = make_toy_corpus(opt);
  const auto manifest = write_corpus(dir_, corpus, true);
  EXPECT_EQ(read_manifest(manifest).size(), 6u);
  const auto back = load_corpus(manifest, 8000, true);
  ASSERT_EQ(back.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back[i].true_source_count, corpus[i].true_source_count);
    for (std::size_t t = 0; t < corpus[i].mixture.size(); ++t) {
      EXPECT_NEAR(back[i].mixture.samples()[t], corpus[i].mixture.samples()[t], 1e-6);
    }
  }
  const auto no_refs = load_corpus(manifest, 8000, false);
  EXPECT_FALSE(no_refs[0].supervised());
  EXPECT_THROW(load_corpus(manifest, 16000, true), DataError);
}

TEST_F(CorpusIoTest, MissingReferenceFileIsDataError) {
  ToyCorpusOptions opt;
  opt.num_mixtures = 2;
  opt.duration_s = 0.05;
  const auto manifest = write_corpus(dir_, make_toy_corpus(opt), true);
  std::filesystem::remove(dir_ / "mix_00000_src0.wav");
  EXPECT_THROW(load_corpus(manifest, 0, true), DataError);
}

TEST(Crop, PadsShortInputs) {
  const Waveform w = testing::wave({1, 2, 3});
  const Waveform c = crop(w, 5, 0);
  EXPECT_EQ(c.size(), 5u);
  EXPECT_EQ(c.samples()[4], 0.0);
  EXPECT_EQ(crop(w, 2, 1).samples()[0], 2.0);
}

}  // namespace
}  // namespace mixit
