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

#include "mixit/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mixit/error.hpp"
#include "mixit/linear_assignment.hpp"

namespace mixit {

double si_snri(const Waveform& reference, const Waveform& estimate, const Waveform& mixture,
               double cap) {
  return si_snr(reference, estimate, cap) - si_snr(reference, mixture, cap);
}

MsiResult msi_aligned(const SourceSet& references, const SourceSet& estimates,
                      const Waveform& mixture, double cap) {
  std::vector<std::size_t> active;
  for (std::size_t n = 0; n < references.size(); ++n) {
    if (!references[n].is_silent()) active.push_back(n);
  }
  if (active.empty()) throw InvalidInput("MSi needs at least one nonzero reference");
  const std::size_t M = estimates.size();
  if (M < active.size()) {
    throw InvalidInput("MSi needs at least as many estimates (" + std::to_string(M) +
                       ") as nonzero references (" + std::to_string(active.size()) + ")");
  }
  check_combinable(references[active[0]], estimates[0]);
  check_combinable(references[active[0]], mixture);

  // Padding rows cost nothing, so they absorb whichever estimates are left.
  CostMatrix cost(M, 0.0);
  std::vector<std::vector<double>> score(active.size(), std::vector<double>(M));
  for (std::size_t r = 0; r < active.size(); ++r) {
    for (std::size_t e = 0; e < M; ++e) {
      score[r][e] = si_snr(references[active[r]], estimates[e], cap);
      cost(r, e) = -score[r][e];
    }
  }
  const auto col = solve_linear_assignment(cost);
  MsiResult out{0.0, {}};
  for (std::size_t r = 0; r < active.size(); ++r) {
    out.value_db += score[r][col[r]] - si_snr(references[active[r]], mixture, cap);
    out.estimate_for_reference.push_back(col[r]);
  }
  out.value_db /= static_cast<double>(active.size());
  return out;
}

double msi(const SourceSet& references, const SourceSet& estimates, const Waveform& mixture,
           double cap) {
  return msi_aligned(references, estimates, mixture, cap).value_db;
}

double ss(const Waveform& reference, const SourceSet& estimates, double cap) {
  if (estimates.empty()) throw InvalidInput("SS needs at least one estimate");
  double best = -INFINITY;
  for (const auto& e : estimates) best = std::max(best, si_snr(reference, e, cap));
  return best;
}

MomiResult momi_aligned(const SourceSet& mixtures, const SourceSet& estimates,
                        const Waveform& mom, const MomiOptions& options) {
  if (mixtures.empty() || estimates.empty()) throw InvalidInput("MoMi needs mixtures and estimates");
  check_combinable(mixtures[0], mom);
  check_combinable(estimates[0], mom);
  const Waveform sum = mix(mixtures);
  double err = 0.0;
  for (std::size_t t = 0; t < mom.size(); ++t) err += (mom[t] - sum[t]) * (mom[t] - sum[t]);
  if (std::sqrt(err) > options.mom_tolerance * std::sqrt(mom.energy())) {
    throw InvalidInput("MoM does not equal the sum of its mixtures");
  }

  std::optional<MixingMatrix> best;
  if (options.selection == MomiSelection::kLossMin) {
    best = mixit_loss(mixtures, estimates, options.loss).best;
  } else {
    double best_total = -INFINITY;
    for (const auto& a : enumerate_mixing_matrices(mixtures.size(), estimates.size())) {
      const SourceSet remix = a.remix(estimates);
      double total = 0.0;
      for (std::size_t k = 0; k < mixtures.size(); ++k) {
        total += si_snr(mixtures[k], remix[k], options.cap);
      }
      if (total > best_total) {
        best_total = total;
        best = a;
      }
    }
  }
  const SourceSet remix = best->remix(estimates);
  double value = 0.0;
  for (std::size_t k = 0; k < mixtures.size(); ++k) {
    value += si_snr(mixtures[k], remix[k], options.cap) - si_snr(mixtures[k], mom, options.cap);
  }
  return MomiResult{value / static_cast<double>(mixtures.size()), *best};
}

double momi(const SourceSet& mixtures, const SourceSet& estimates, const Waveform& mom,
            const MomiOptions& options) {
  return momi_aligned(mixtures, estimates, mom, options).value_db;
}

bool is_known_metric(const std::string& name) {
  return name == kMetricSiSnri || name == kMetricMsi || name == kMetricSs || name == kMetricMomi;
}

std::map<std::string, MetricSummary> summarize(const std::vector<EvalRecord>& records) {
  std::map<std::string, MetricSummary> out;
  std::map<std::string, double> sums;
  for (const auto& r : records) {
    auto& s = out[r.metric];
    if (r.defined()) {
      sums[r.metric] += *r.value_db;
      ++s.count;
    } else {
      ++s.undefined;
    }
  }
  for (auto& [name, s] : out) {
    s.mean_db = s.count ? sums[name] / static_cast<double>(s.count) : NAN;
  }
  return out;
}

void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["example_id"] = r.example_id;
    j["metric"] = r.metric;
    j["value_db"] = r.defined() ? nlohmann::ordered_json(*r.value_db) : nlohmann::ordered_json();
    j["defined"] = r.defined();
    if (!r.note.empty()) j["note"] = r.note;
    f << j.dump() << '\n';
  }
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [name, s] : summarize(records)) {
    summary[name] = {{"mean_db", s.count ? nlohmann::ordered_json(s.mean_db) : nlohmann::ordered_json()},
                     {"count", s.count},
                     {"undefined", s.undefined}};
  }
  f << nlohmann::ordered_json{{"summary", summary}}.dump() << '\n';
  if (!f) throw DataError("write failed: " + path.string());
}

std::vector<EvalRecord> read_eval_report(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open evaluation report " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("summary")) continue;
      EvalRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.metric = j.at("metric").get<std::string>();
      if (j.value("defined", false) && !j.at("value_db").is_null()) {
        r.value_db = j.at("value_db").get<double>();
      }
      r.note = j.value("note", "");
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mixit
