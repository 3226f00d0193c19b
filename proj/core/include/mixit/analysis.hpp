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

#include <optional>
#include <vector>

namespace mixit {

// scores[i][j]: example i under condition j.
using ScoreTable = std::vector<std::vector<double>>;

enum class NormalizationMode {
  // r~ = r - (mean over conditions of example i) + global mean.
  kPerExampleMean,
  // Literal formula reading: subtract the mean over examples of condition j.
  kPerConditionMean,
};

// r~ for every cell. Throws InvalidInput on an empty, ragged or non-finite
// table.
ScoreTable normalize_scores(const ScoreTable& scores, NormalizationMode mode);

// Within-condition standard deviation of r~ pooled across conditions (the
// one-way ANOVA error term): sqrt(sum_ij (r~_ij - mean_i r~_ij)^2 / (N J)).
double normalized_within_condition_std(const ScoreTable& scores,
                                       NormalizationMode mode = NormalizationMode::kPerExampleMean);

struct CorrelationResult {
  // Empty when either input has zero variance.
  std::optional<double> pearson;
  std::optional<double> spearman;

  bool defined() const { return pearson.has_value() && spearman.has_value(); }
};

// Pearson on values; Spearman as Pearson on fractional ranks (ties share
// their average rank). Needs equal lengths >= 3.
CorrelationResult correlation(const std::vector<double>& xs, const std::vector<double>& ys);

std::vector<double> fractional_ranks(const std::vector<double>& values);

}  // namespace mixit
