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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixit/assignment.hpp"
#include "mixit/signal.hpp"

namespace mixit {

// si_snr(reference, estimate) - si_snr(reference, mixture).
double si_snri(const Waveform& reference, const Waveform& estimate, const Waveform& mixture,
               double cap = kDefaultSiSnrCap);

struct MsiResult {
  double value_db;
  // estimate_for_reference[n] for every nonzero reference n, in input order.
  std::vector<std::size_t> estimate_for_reference;
};

// Multi-source SI-SNRi: references are zero-padded to M, estimates are
// aligned by maximizing total SI-SNR over the nonzero references, and the
// SI-SNRi is averaged over nonzero references only. Silent entries in
// `references` count as padding.
MsiResult msi_aligned(const SourceSet& references, const SourceSet& estimates,
                      const Waveform& mixture, double cap = kDefaultSiSnrCap);
double msi(const SourceSet& references, const SourceSet& estimates, const Waveform& mixture,
           double cap = kDefaultSiSnrCap);

// Absolute SI-SNR of the best-matching estimate for a single-source input.
double ss(const Waveform& reference, const SourceSet& estimates, double cap = kDefaultSiSnrCap);

enum class MomiSelection {
  kLossMin,   // argmin of the MixIT loss (default)
  kSiSnrMax,  // argmax of total remix SI-SNR
};

struct MomiOptions {
  MomiSelection selection = MomiSelection::kLossMin;
  LossConfig loss{};
  double cap = kDefaultSiSnrCap;
  // Relative tolerance on mom == sum(mixtures).
  double mom_tolerance = 1e-6;
};

struct MomiResult {
  double value_db;
  MixingMatrix best;
};

// Mean over the K mixtures of si_snr(x_i, [A s]_i) - si_snr(x_i, mom), with A
// chosen per `options.selection`.
MomiResult momi_aligned(const SourceSet& mixtures, const SourceSet& estimates,
                        const Waveform& mom, const MomiOptions& options = {});
double momi(const SourceSet& mixtures, const SourceSet& estimates, const Waveform& mom,
            const MomiOptions& options = {});

// --- reports ---------------------------------------------------------------

inline constexpr const char* kMetricSiSnri = "sisnri";
inline constexpr const char* kMetricMsi = "msi";
inline constexpr const char* kMetricSs = "ss";
inline constexpr const char* kMetricMomi = "momi";

bool is_known_metric(const std::string& name);

// Undefined entries (e.g. SS on a multi-source input) carry a reason and no
// value; they are reported but excluded from means.
struct EvalRecord {
  std::string example_id;
  std::string metric;
  std::optional<double> value_db;
  std::string note;

  bool defined() const { return value_db.has_value(); }
  bool operator==(const EvalRecord&) const = default;
};

struct MetricSummary {
  double mean_db = 0.0;
  std::size_t count = 0;
  std::size_t undefined = 0;
};

std::map<std::string, MetricSummary> summarize(const std::vector<EvalRecord>& records);

// JSONL: one {"example_id","metric","value_db","defined"} object per record,
// then {"summary": {metric: {"mean_db","count","undefined"}}}.
void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_eval_report(const std::filesystem::path& path);

}  // namespace mixit
