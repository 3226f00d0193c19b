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

#include "mixit/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mixit/error.hpp"
#include "mixit/linear_assignment.hpp"

namespace mixit {

MixingMatrix::MixingMatrix(std::size_t num_mixtures, std::vector<std::size_t> mixture_of_source)
    : num_mixtures_(num_mixtures), mixture_of_source_(std::move(mixture_of_source)) {
  if (num_mixtures_ == 0) throw InvalidInput("mixing matrix needs at least one mixture");
  if (mixture_of_source_.empty()) throw InvalidInput("mixing matrix needs at least one source");
  for (auto k : mixture_of_source_) {
    if (k >= num_mixtures_) throw InvalidInput("mixing matrix routes a source past the last row");
  }
}

MixingMatrix MixingMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty() || rows.front().empty()) throw InvalidInput("empty mixing matrix");
  const std::size_t m = rows.front().size();
  std::vector<std::size_t> assign(m, 0);
  for (std::size_t col = 0; col < m; ++col) {
    int total = 0;
    for (std::size_t row = 0; row < rows.size(); ++row) {
      if (rows[row].size() != m) throw InvalidInput("ragged mixing matrix");
      int v = rows[row][col];
      if (v != 0 && v != 1) throw InvalidInput("mixing matrix entries must be 0 or 1");
      if (v == 1) assign[col] = row;
      total += v;
    }
    if (total != 1) {
      throw InvalidInput("mixing matrix column " + std::to_string(col) + " is not one-hot");
    }
  }
  return MixingMatrix(rows.size(), std::move(assign));
}

std::vector<std::vector<int>> MixingMatrix::rows() const {
  std::vector<std::vector<int>> out(num_mixtures_, std::vector<int>(num_sources(), 0));
  for (std::size_t m = 0; m < num_sources(); ++m) out[mixture_of_source_[m]][m] = 1;
  return out;
}

SourceSet MixingMatrix::remix(const SourceSet& estimates) const {
  if (estimates.size() != num_sources()) {
    throw InvalidInput("mixing matrix expects " + std::to_string(num_sources()) +
                       " estimates, got " + std::to_string(estimates.size()));
  }
  const std::size_t len = estimates.length();
  std::vector<std::vector<double>> sums(num_mixtures_, std::vector<double>(len, 0.0));
  for (std::size_t m = 0; m < num_sources(); ++m) {
    auto& dst = sums[mixture_of_source_[m]];
    auto src = estimates[m].samples();
    for (std::size_t t = 0; t < len; ++t) dst[t] += src[t];
  }
  std::vector<Waveform> out;
  out.reserve(num_mixtures_);
  for (auto& s : sums) out.emplace_back(std::move(s), estimates.sample_rate());
  return SourceSet(std::move(out));
}

PermutationMatrix::PermutationMatrix(std::vector<std::size_t> source_for_slot)
    : source_for_slot_(std::move(source_for_slot)) {
  std::vector<bool> seen(source_for_slot_.size(), false);
  for (auto s : source_for_slot_) {
    if (s >= seen.size() || seen[s]) throw InvalidInput("not a permutation");
    seen[s] = true;
  }
}

SourceSet PermutationMatrix::apply(const SourceSet& estimates) const {
  if (estimates.size() != size()) throw InvalidInput("permutation size mismatch");
  std::vector<Waveform> out;
  out.reserve(size());
  for (auto s : source_for_slot_) out.push_back(estimates[s]);
  return SourceSet(std::move(out));
}

bool AssignmentConstraint::admits(const MixingMatrix& a) const {
  if (!allowed.empty()) {
    if (allowed.size() != a.num_sources()) return false;
    for (std::size_t m = 0; m < a.num_sources(); ++m) {
      const auto& set = allowed[m];
      if (std::find(set.begin(), set.end(), a.mixture_of(m)) == set.end()) return false;
    }
  }
  if (!mixture_counts.empty()) {
    if (mixture_counts.size() != a.num_mixtures()) return false;
    std::vector<std::size_t> counts(a.num_mixtures(), 0);
    for (auto k : a.mixture_of_source()) ++counts[k];
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] < mixture_counts[k].min || counts[k] > mixture_counts[k].max) return false;
    }
  }
  return true;
}

AssignmentConstraint AssignmentConstraint::speech_enhancement() {
  AssignmentConstraint c;
  c.allowed = {{0}, {0, 1}, {0, 1}};
  c.mixture_counts = {{2, 2}, {1, 1}};
  return c;
}

void BatchSpec::validate() const {
  if (!(supervised_fraction >= 0.0 && supervised_fraction <= 1.0)) {
    throw InvalidInput("supervised fraction must lie in [0, 1]");
  }
  if (!(zero_probability >= 0.0 && zero_probability <= 1.0)) {
    throw InvalidInput("zeroing probability must lie in [0, 1]");
  }
  if (mixtures_per_mom < 2) throw InvalidInput("a mixture of mixtures needs K >= 2");
}

void BatchSpec::validate_against(std::size_t num_outputs,
                                 std::size_t max_sources_per_mixture) const {
  validate();
  if (mixtures_per_mom * max_sources_per_mixture > num_outputs) {
    throw InvalidInput("model has " + std::to_string(num_outputs) + " outputs but a MoM can hold " +
                       std::to_string(mixtures_per_mom * max_sources_per_mixture) + " sources");
  }
}

std::size_t BatchSpec::supervised_count(std::size_t batch_size) const {
  return static_cast<std::size_t>(std::llround(supervised_fraction * static_cast<double>(batch_size)));
}

std::vector<MixingMatrix> enumerate_mixing_matrices(
    std::size_t num_mixtures, std::size_t num_sources,
    const std::optional<AssignmentConstraint>& constraint, std::uint64_t budget) {
  if (num_mixtures == 0 || num_sources == 0) {
    throw InvalidInput("enumeration needs K >= 1 and M >= 1");
  }
  // Per-source candidate rows, ascending.
  std::vector<std::vector<std::size_t>> choices(num_sources);
  for (std::size_t m = 0; m < num_sources; ++m) {
    if (constraint && !constraint->allowed.empty()) {
      if (constraint->allowed.size() != num_sources) {
        throw InvalidInput("constraint lists " + std::to_string(constraint->allowed.size()) +
                           " sources, model has " + std::to_string(num_sources));
      }
      for (auto k : constraint->allowed[m]) {
        if (k >= num_mixtures) throw InvalidInput("constraint names a nonexistent mixture");
      }
      choices[m] = constraint->allowed[m];
      std::sort(choices[m].begin(), choices[m].end());
      choices[m].erase(std::unique(choices[m].begin(), choices[m].end()), choices[m].end());
      if (choices[m].empty()) {
        throw InvalidInput("constraint leaves source " + std::to_string(m) + " nowhere to go");
      }
    } else {
      choices[m].resize(num_mixtures);
      std::iota(choices[m].begin(), choices[m].end(), std::size_t{0});
    }
  }
  if (constraint && !constraint->mixture_counts.empty() &&
      constraint->mixture_counts.size() != num_mixtures) {
    throw InvalidInput("constraint count bounds must cover every mixture");
  }

  std::uint64_t total = 1;
  for (const auto& c : choices) {
    total *= c.size();
    if (total > budget) {
      throw InvalidInput("mixing-matrix enumeration exceeds the budget of " +
                         std::to_string(budget) +
                         " candidates; reduce outputs or add an assignment constraint");
    }
  }

  std::vector<MixingMatrix> out;
  out.reserve(total);
  std::vector<std::size_t> digit(num_sources, 0);
  std::vector<std::size_t> assign(num_sources);
  for (std::uint64_t n = 0; n < total; ++n) {
    for (std::size_t m = 0; m < num_sources; ++m) assign[m] = choices[m][digit[m]];
    MixingMatrix a(num_mixtures, assign);
    if (!constraint || constraint->admits(a)) out.push_back(std::move(a));
    // Increment with the last source as the least significant digit.
    for (std::size_t m = num_sources; m-- > 0;) {
      if (++digit[m] < choices[m].size()) break;
      digit[m] = 0;
    }
  }
  if (out.empty()) throw InvalidInput("assignment constraint admits no mixing matrix");
  return out;
}

double mixit_cost(const SourceSet& mixtures, const SourceSet& estimates, const MixingMatrix& a,
                  const LossConfig& cfg) {
  SourceSet remixed = a.remix(estimates);
  double total = 0.0;
  for (std::size_t i = 0; i < mixtures.size(); ++i) {
    total += neg_thresholded_snr(mixtures[i], remixed[i], cfg);
  }
  return total;
}

MixitResult mixit_loss(const SourceSet& mixtures, const SourceSet& estimates,
                       const LossConfig& cfg,
                       const std::optional<AssignmentConstraint>& constraint) {
  if (mixtures.empty() || estimates.empty()) throw InvalidInput("MixIT needs mixtures and estimates");
  check_combinable(mixtures[0], estimates[0]);
  for (const auto& x : mixtures) {
    if (x.is_silent()) throw InvalidInput("MixIT reference mixtures must have nonzero energy");
  }
  auto candidates = enumerate_mixing_matrices(mixtures.size(), estimates.size(), constraint);

  // The loss is separable per mixture, and each row's remix depends only on
  // which sources that row receives. Cache per-(row, subset) losses.
  const std::size_t k_mix = mixtures.size();
  const std::size_t m_src = estimates.size();
  const std::size_t len = estimates.length();
  const bool cacheable = m_src <= 16;
  std::vector<std::vector<double>> cache;
  std::vector<std::vector<bool>> cached;
  if (cacheable) {
    cache.assign(k_mix, std::vector<double>(std::size_t{1} << m_src, 0.0));
    cached.assign(k_mix, std::vector<bool>(std::size_t{1} << m_src, false));
  }
  std::vector<double> buf(len);
  auto row_loss = [&](std::size_t row, std::size_t mask) {
    if (cacheable && cached[row][mask]) return cache[row][mask];
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t m = 0; m < m_src; ++m) {
      if (!((mask >> m) & 1U)) continue;
      auto s = estimates[m].samples();
      for (std::size_t t = 0; t < len; ++t) buf[t] += s[t];
    }
    double v = neg_thresholded_snr(mixtures[row].samples(), buf, cfg);
    if (cacheable) {
      cache[row][mask] = v;
      cached[row][mask] = true;
    }
    return v;
  };

  std::optional<MixitResult> best;
  std::vector<std::size_t> masks(k_mix);
  for (const auto& a : candidates) {
    std::fill(masks.begin(), masks.end(), 0);
    for (std::size_t m = 0; m < m_src; ++m) masks[a.mixture_of(m)] |= std::size_t{1} << m;
    double total = 0.0;
    for (std::size_t i = 0; i < k_mix; ++i) total += row_loss(i, masks[i]);
    if (!best || total < best->loss_db) best = MixitResult{total, a};
  }
  return *best;
}

std::vector<std::vector<double>> pit_pairwise_losses(const SourceSet& references,
                                                     const SourceSet& estimates,
                                                     const LossConfig& cfg,
                                                     const PitOptions& options) {
  if (references.size() != estimates.size()) {
    throw InvalidInput("PIT needs as many estimates as references (" +
                       std::to_string(references.size()) + " vs " +
                       std::to_string(estimates.size()) + ")");
  }
  check_combinable(references[0], estimates[0]);
  const std::size_t n = references.size();
  std::optional<Waveform> mixture = options.mixture;
  if (options.zero_source_loss && !mixture) mixture = mix(references);

  std::vector<std::vector<double>> costs(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    const bool inactive = references[r].is_silent();
    for (std::size_t e = 0; e < n; ++e) {
      if (!inactive) {
        costs[r][e] = neg_thresholded_snr(references[r], estimates[e], cfg);
      } else if (options.zero_source_loss) {
        costs[r][e] = zero_source_loss(estimates[e], *mixture, cfg);
      }
    }
  }
  return costs;
}

PitResult pit_loss(const SourceSet& references, const SourceSet& estimates,
                   const LossConfig& cfg, const PitOptions& options) {
  auto costs = pit_pairwise_losses(references, estimates, cfg, options);
  const std::size_t n = costs.size();
  CostMatrix matrix(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t e = 0; e < n; ++e) matrix(r, e) = costs[r][e];
  }
  auto assignment = solve_linear_assignment(matrix);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += costs[r][assignment[r]];
  return PitResult{total, PermutationMatrix(std::move(assignment))};
}

double semi_supervised_loss(const std::vector<MomLossItem>& batch, const BatchSpec& spec,
                            const LossConfig& cfg, const PitOptions& pit_options) {
  if (batch.empty()) throw InvalidInput("semi-supervised loss of an empty batch");
  spec.validate();
  const std::size_t supervised = spec.supervised_count(batch.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& item = batch[b];
    if (b < supervised) {
      if (!item.references) {
        throw InvalidInput("item " + std::to_string(b) + " is scheduled for PIT but has no references");
      }
      PitOptions opts = pit_options;
      if (opts.zero_source_loss && !opts.mixture) opts.mixture = mix(item.mixtures);
      total += pit_loss(*item.references, item.estimates, cfg, opts).loss_db;
    } else {
      total += mixit_loss(item.mixtures, item.estimates, cfg).loss_db;
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace mixit
