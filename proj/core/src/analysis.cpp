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

#include "mixit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mixit/error.hpp"

namespace mixit {

ScoreTable normalize_scores(const ScoreTable& scores, NormalizationMode mode) {
  if (scores.empty() || scores.front().empty()) throw InvalidInput("empty score table");
  const std::size_t N = scores.size(), J = scores.front().size();
  for (std::size_t i = 0; i < N; ++i) {
    if (scores[i].size() != J) {
      throw InvalidInput("score table row " + std::to_string(i) + " has " +
                         std::to_string(scores[i].size()) + " cells, expected " +
                         std::to_string(J));
    }
    for (double v : scores[i]) {
      if (!std::isfinite(v)) throw InvalidInput("score table contains a non-finite cell");
    }
  }
  std::vector<double> row_mean(N, 0.0), col_mean(J, 0.0);
  double global = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      row_mean[i] += scores[i][j];
      col_mean[j] += scores[i][j];
      global += scores[i][j];
    }
  }
  for (auto& m : row_mean) m /= static_cast<double>(J);
  for (auto& m : col_mean) m /= static_cast<double>(N);
  global /= static_cast<double>(N * J);

  ScoreTable out(N, std::vector<double>(J));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double shift = mode == NormalizationMode::kPerExampleMean ? row_mean[i] : col_mean[j];
      out[i][j] = scores[i][j] - shift + global;
    }
  }
  return out;
}

double normalized_within_condition_std(const ScoreTable& scores, NormalizationMode mode) {
  const ScoreTable norm = normalize_scores(scores, mode);
  const std::size_t N = norm.size(), J = norm.front().size();
  double ss = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += norm[i][j];
    mean /= static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) ss += (norm[i][j] - mean) * (norm[i][j] - mean);
  }
  return std::sqrt(ss / static_cast<double>(N * J));
}

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

CorrelationResult correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InvalidInput("correlation inputs differ in length");
  if (xs.size() < 3) throw InvalidInput("correlation needs at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw InvalidInput("correlation inputs must be finite");
    }
  }
  return CorrelationResult{pearson(xs, ys), pearson(fractional_ranks(xs), fractional_ranks(ys))};
}

}  // namespace mixit
