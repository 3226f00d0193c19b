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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mixit/assignment.hpp"
#include "mixit/manifest.hpp"
#include "mixit/signal.hpp"

namespace mixit {

// mt19937_64 with hand-written transforms: std:: distributions are
// implementation-defined, these are not, so a seed yields the same stream with
// any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  std::size_t index(std::size_t n);      // uniform in [0, n)

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

// Mixes (seed, stream, index) into an independent child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

enum class SourceKind { kTonal, kModulatedNoise, kTransient };

SourceKind parse_source_kind(const std::string& name);
std::string source_kind_name(SourceKind kind);

struct ToySourceOptions {
  // Frequency band in Hz; 0 selects the per-kind default (tonal 100-1200,
  // modulated noise 1800-3600, transient 300-3000, clipped below Nyquist).
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;
  // RMS level is 10^(base/20) scaled by a gain drawn from +-level_range_db.
  double base_level_db = -20.0;
  double level_range_db = 5.0;
};

Waveform synth_toy_source(SourceKind kind, double duration_s, int sample_rate, Rng& rng,
                          const ToySourceOptions& options = {});
std::vector<Waveform> synth_toy_sources(SourceKind kind, std::size_t count, double duration_s,
                                        int sample_rate, std::uint64_t seed,
                                        const ToySourceOptions& options = {});

// A mixture, plus its reference sources when supervised. Inactive reference
// slots are all-zero waveforms.
struct TrainExample {
  Waveform mixture;
  std::optional<SourceSet> references;
  std::size_t true_source_count = 0;
  std::string split = std::string(kSplitGeneric);
  std::vector<SourceKind> source_kinds;

  bool supervised() const { return references.has_value(); }

  // mixture := mix(references), so the two agree bit-exactly.
  static TrainExample make_supervised(SourceSet references, std::size_t true_source_count,
                                      std::string split = std::string(kSplitGeneric));
  static TrainExample make_unsupervised(Waveform mixture,
                                        std::string split = std::string(kSplitGeneric));
};

// K component mixtures and their sum.
struct MomExample {
  std::vector<TrainExample> components;
  Waveform mom;
  std::optional<AssignmentConstraint> constraint;
  std::optional<std::size_t> zeroed_component;

  SourceSet component_mixtures() const;
  // Every component's references in order, zero-padded to `num_outputs`.
  // Empty when any component is unsupervised.
  std::optional<SourceSet> references(std::size_t num_outputs) const;
  std::size_t true_source_count() const;
};

// Shuffled index stream without replacement; reshuffles (a new epoch) when
// fewer than `group` indices remain.
class EpochSampler {
 public:
  EpochSampler(std::size_t population, std::uint64_t seed);

  std::vector<std::size_t> draw(std::size_t group);
  std::size_t epoch() const { return epoch_; }
  std::size_t population() const { return order_.size(); }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
};

// Fixed-length crop at a seeded offset; shorter inputs are zero-padded.
Waveform crop(const Waveform& wave, std::size_t length, std::size_t offset);
TrainExample crop_example(const TrainExample& example, std::size_t length, Rng& rng);

// Draws K mixtures without replacement and sums them. When every component is
// supervised, one component (and its references) is zeroed with probability
// p0; the survivor is not rescaled.
MomExample make_mom(const std::vector<TrainExample>& corpus, EpochSampler& sampler,
                    const BatchSpec& spec, Rng& rng, std::size_t crop_length = 0);

// x1 from the speech-plus-noise split, x2 from the noise-only split, with the
// three-output enhancement constraint attached.
MomExample make_enhancement_pair(const std::vector<TrainExample>& speech_noise,
                                 EpochSampler& speech_sampler,
                                 const std::vector<TrainExample>& noise_only,
                                 EpochSampler& noise_sampler, Rng& rng,
                                 std::size_t crop_length = 0);

// Fresh supervised mixtures from a pool of isolated sources; successive draws
// within one pass over the pool never reuse a source.
class DynamicRemixer {
 public:
  DynamicRemixer(std::vector<Waveform> pool, std::size_t num_sources, std::uint64_t seed);

  TrainExample next();
  std::vector<std::size_t> last_draw() const { return last_; }

 private:
  std::vector<Waveform> pool_;
  std::size_t num_sources_;
  EpochSampler sampler_;
  std::vector<std::size_t> last_;
};

TrainExample dynamic_remix(const std::vector<Waveform>& pool, std::size_t num_sources,
                           std::uint64_t seed);

struct ToyCorpusOptions {
  std::size_t num_mixtures = 100;
  std::size_t min_sources = 1;
  std::size_t max_sources = 2;
  double duration_s = 1.0;
  int sample_rate = kDefaultSampleRate;
  // Source j of a mixture uses kinds[(start + j) % kinds.size()], with a
  // random start when shuffle_kinds is set.
  std::vector<SourceKind> kinds = {SourceKind::kTonal, SourceKind::kModulatedNoise};
  bool shuffle_kinds = true;
  std::string split = std::string(kSplitGeneric);
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  ToySourceOptions source_options;
};

// Supervised toy mixtures. Example i depends only on (seed, i), so the output
// is identical for any worker count.
std::vector<TrainExample> make_toy_corpus(const ToyCorpusOptions& options);
TrainExample make_toy_example(const ToyCorpusOptions& options, std::size_t index);

// Writes mixture/reference WAVs plus a manifest; returns the manifest path.
std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<TrainExample>& corpus, bool include_refs,
                                   const std::string& manifest_name = "manifest.jsonl");

// Loads a manifest. Records with refs become supervised examples whose
// mixture is rebuilt from the references (checked against the stored file);
// `sample_rate` > 0 enforces a rate.
std::vector<TrainExample> load_corpus(const std::filesystem::path& manifest_path,
                                      int sample_rate = 0, bool load_refs = true);

}  // namespace mixit
