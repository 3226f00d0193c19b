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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixit/assignment.hpp"
#include "mixit/autograd/adam.hpp"
#include "mixit/checkpoint.hpp"
#include "mixit/datagen.hpp"
#include "mixit/model.hpp"

namespace mixit {

enum class TrainMode { kSupervised, kUnsupervised, kSemi };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

enum class ValidationMetric { kAuto, kMsi, kSs, kMomi, kLoss };

ValidationMetric parse_validation_metric(const std::string& name);
std::string validation_metric_name(ValidationMetric metric);

struct TrainConfig {
  TrainMode mode = TrainMode::kUnsupervised;
  ModelConfig model = ModelConfig::desk_scale();
  double snr_max = 30.0;
  // p is forced to 1 in supervised mode and 0 in unsupervised mode.
  BatchSpec batch_spec{};
  // Score silent reference slots with the zero-source loss.
  bool zero_source_loss = false;
  // Supervised items are MoMs of K mixtures (true) or single mixtures.
  bool supervised_mom = true;
  // Unsupervised items use the constrained speech-enhancement pairing.
  bool enhancement = false;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  std::size_t eval_every = 500;
  std::size_t crop_length = 0;  // 0 keeps full clips
  double learning_rate = 1e-3;
  // Global gradient-norm clip; 0 disables.
  double clip_grad_norm = 0.0;
  ValidationMetric validation_metric = ValidationMetric::kAuto;
  std::size_t max_validation_items = 0;  // 0 = all
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainData {
  std::vector<TrainExample> train;
  std::vector<TrainExample> validation;
  // Second split for the enhancement pairing; `train` is then the
  // speech-plus-noise split.
  std::vector<TrainExample> noise_only;
};

struct TrainLogEntry {
  std::size_t step = 0;  // 1-based index of the update just taken
  double loss_db = 0.0;
  std::optional<double> val_metric;
  double wall_s = 0.0;
};

// Deterministic given (config, data): batches, crops and initialization all
// derive from config.seed.
class Trainer {
 public:
  Trainer(TrainConfig config, TrainData data, std::optional<Checkpoint> resume = std::nullopt);

  // One optimizer update; throws NumericError on a non-finite loss or
  // gradient. Returns the batch loss (mean over items, dB).
  double step();

  // Higher is better for every metric; kLoss reports the negated mean loss.
  double validate() const;

  // Runs the remaining steps, validating every eval_every steps and after the
  // last one. `on_log` sees every step's entry.
  void run(const std::function<void(const TrainLogEntry&)>& on_log = {});

  const TrainConfig& config() const { return config_; }
  const SeparatorModel& model() const { return model_; }
  const autograd::AdamState& optimizer() const { return adam_; }
  std::size_t steps_done() const { return static_cast<std::size_t>(adam_.step); }

  // Best validation score so far and the parameters that produced it.
  std::optional<double> best_score() const { return best_score_; }
  const SeparatorModel& best_model() const { return best_model_; }

  ValidationMetric resolved_validation_metric() const { return val_metric_; }
  Checkpoint checkpoint(bool best) const;

 private:
  struct Item {
    Waveform input;
    SourceSet mixtures;                 // MixIT targets
    std::optional<SourceSet> references;  // PIT targets, zero-padded to M
    std::optional<AssignmentConstraint> constraint;
    bool supervised = false;
  };

  std::vector<Item> next_batch();
  Item supervised_item();
  Item unsupervised_item();

  TrainConfig config_;
  TrainData data_;
  SeparatorModel model_;
  SeparatorModel best_model_;
  std::optional<double> best_score_;
  autograd::AdamState adam_;
  LossConfig loss_;
  ValidationMetric val_metric_;
  std::vector<TrainExample> supervised_pool_;
  std::optional<EpochSampler> sup_sampler_;
  std::optional<EpochSampler> unsup_sampler_;
  std::optional<EpochSampler> noise_sampler_;
  Rng rng_;
};

// Validation score of `model` on `examples` (higher is better).
double validation_score(const SeparatorModel& model, const std::vector<TrainExample>& examples,
                        ValidationMetric metric, const LossConfig& loss, std::size_t limit = 0);

}  // namespace mixit
