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
#include <optional>
#include <vector>

#include "mixit/signal.hpp"

namespace mixit {

// K x M binary matrix with one-hot columns, stored as the mixture index each
// estimated source is routed to.
class MixingMatrix {
 public:
  MixingMatrix(std::size_t num_mixtures, std::vector<std::size_t> mixture_of_source);

  // Validates a dense 0/1 matrix given as rows (one per mixture).
  static MixingMatrix from_rows(const std::vector<std::vector<int>>& rows);

  std::size_t num_mixtures() const { return num_mixtures_; }
  std::size_t num_sources() const { return mixture_of_source_.size(); }
  std::size_t mixture_of(std::size_t source) const { return mixture_of_source_[source]; }
  const std::vector<std::size_t>& mixture_of_source() const { return mixture_of_source_; }
  int entry(std::size_t mixture, std::size_t source) const {
    return mixture_of_source_[source] == mixture ? 1 : 0;
  }
  std::vector<std::vector<int>> rows() const;

  // Row-wise remix A * estimates: one waveform per mixture.
  SourceSet remix(const SourceSet& estimates) const;

  bool operator==(const MixingMatrix&) const = default;

 private:
  std::size_t num_mixtures_;
  std::vector<std::size_t> mixture_of_source_;
};

// M x M permutation. Output slot m takes estimate source_for_slot[m], i.e.
// [P s]_m = s_{source_for_slot[m]}.
class PermutationMatrix {
 public:
  explicit PermutationMatrix(std::vector<std::size_t> source_for_slot);

  std::size_t size() const { return source_for_slot_.size(); }
  std::size_t source_for_slot(std::size_t slot) const { return source_for_slot_[slot]; }
  const std::vector<std::size_t>& source_for_slot() const { return source_for_slot_; }
  int entry(std::size_t row, std::size_t col) const {
    return source_for_slot_[row] == col ? 1 : 0;
  }
  SourceSet apply(const SourceSet& estimates) const;

  bool operator==(const PermutationMatrix&) const = default;

 private:
  std::vector<std::size_t> source_for_slot_;
};

// Restricts which mixtures each estimated source may be routed to. Optional
// per-mixture bounds on how many sources a mixture receives express
// constraints such as "exactly one of outputs 2 and 3 goes to the noise mix".
struct AssignmentConstraint {
  struct CountBound {
    std::size_t min = 0;
    std::size_t max = SIZE_MAX;
  };

  std::vector<std::vector<std::size_t>> allowed;  // per source
  std::vector<CountBound> mixture_counts;          // empty, or one per mixture

  bool admits(const MixingMatrix& a) const;

  // Three-output speech enhancement: output 1 always reconstructs the
  // speech-plus-noise mixture together with exactly one of outputs 2 and 3;
  // the other one reconstructs the noise-only mixture.
  static AssignmentConstraint speech_enhancement();
};

// Per-batch data recipe: supervised fraction p, zeroing probability p0 and
// mixtures per mixture-of-mixtures K.
struct BatchSpec {
  double supervised_fraction = 0.0;
  double zero_probability = 0.0;
  std::size_t mixtures_per_mom = 2;

  void validate() const;
  void validate_against(std::size_t num_outputs, std::size_t max_sources_per_mixture) const;
  // round(p * batch_size), the deterministic supervised count.
  std::size_t supervised_count(std::size_t batch_size) const;
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = 1'000'000;

// All valid mixing matrices in canonical order: lexicographic in the
// assignment vector (source 0 is the most significant base-K digit).
std::vector<MixingMatrix> enumerate_mixing_matrices(
    std::size_t num_mixtures, std::size_t num_sources,
    const std::optional<AssignmentConstraint>& constraint = std::nullopt,
    std::uint64_t budget = kDefaultEnumerationBudget);

struct MixitResult {
  double loss_db;
  MixingMatrix best;
};

// min over A of sum_i L(x_i, [A s]_i); ties resolve to the first matrix in
// canonical order.
MixitResult mixit_loss(const SourceSet& mixtures, const SourceSet& estimates,
                       const LossConfig& cfg,
                       const std::optional<AssignmentConstraint>& constraint = std::nullopt);

// Sum of per-mixture losses for one fixed mixing matrix.
double mixit_cost(const SourceSet& mixtures, const SourceSet& estimates,
                  const MixingMatrix& a, const LossConfig& cfg);

struct PitOptions {
  // Score inactive (silent) references with zero_source_loss against
  // `mixture`. When false, inactive slots cost 0 for every estimate.
  bool zero_source_loss = false;
  std::optional<Waveform> mixture;  // defaults to mix(references)
};

struct PitResult {
  double loss_db;
  PermutationMatrix best;
};

// Pairwise cost of assigning estimate e to reference slot r.
std::vector<std::vector<double>> pit_pairwise_losses(const SourceSet& references,
                                                     const SourceSet& estimates,
                                                     const LossConfig& cfg,
                                                     const PitOptions& options = {});

// min over P of sum_m L(s_m, [P s_hat]_m), solved as a linear assignment on
// the pairwise loss matrix.
PitResult pit_loss(const SourceSet& references, const SourceSet& estimates,
                   const LossConfig& cfg, const PitOptions& options = {});

// One mixture-of-mixtures training item with the model's estimates.
struct MomLossItem {
  SourceSet mixtures;                   // K component mixtures
  std::optional<SourceSet> references;  // all reference sources, zero-padded
  SourceSet estimates;
};

// Mean over the batch: the first round(p * B) items are scored with PIT
// against their references, the rest with MixIT against their mixtures.
double semi_supervised_loss(const std::vector<MomLossItem>& batch, const BatchSpec& spec,
                            const LossConfig& cfg, const PitOptions& pit_options = {});

}  // namespace mixit
