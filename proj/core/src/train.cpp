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

#include "mixit/train.hpp"

#include <chrono>
#include <cmath>

#include "mixit/autograd/ops.hpp"
#include "mixit/error.hpp"
#include "mixit/losses.hpp"
#include "mixit/metrics.hpp"

namespace mixit {

namespace ag = autograd;

TrainMode parse_train_mode(const std::string& name) {
  if (name == "supervised") return TrainMode::kSupervised;
  if (name == "unsupervised") return TrainMode::kUnsupervised;
  if (name == "semi") return TrainMode::kSemi;
  throw InvalidInput("unknown training mode '" + name + "' (supervised|unsupervised|semi)");
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kSupervised: return "supervised";
    case TrainMode::kUnsupervised: return "unsupervised";
    case TrainMode::kSemi: return "semi";
  }
  return "unknown";
}

ValidationMetric parse_validation_metric(const std::string& name) {
  if (name == "auto") return ValidationMetric::kAuto;
  if (name == "msi") return ValidationMetric::kMsi;
  if (name == "ss") return ValidationMetric::kSs;
  if (name == "momi") return ValidationMetric::kMomi;
  if (name == "loss") return ValidationMetric::kLoss;
  throw InvalidInput("unknown validation metric '" + name + "' (auto|msi|ss|momi|loss)");
}

std::string validation_metric_name(ValidationMetric metric) {
  switch (metric) {
    case ValidationMetric::kAuto: return "auto";
    case ValidationMetric::kMsi: return "msi";
    case ValidationMetric::kSs: return "ss";
    case ValidationMetric::kMomi: return "momi";
    case ValidationMetric::kLoss: return "loss";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  model.validate();
  batch_spec.validate();
  if (batch_size == 0) throw InvalidInput("batch size must be positive");
  if (!(snr_max > 0.0)) throw InvalidInput("snr_max must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (clip_grad_norm < 0.0) throw InvalidInput("gradient clip must be non-negative");
  if (enhancement && model.num_outputs != 3) {
    throw InvalidInput("the enhancement constraint needs a 3-output model");
  }
  if (enhancement && batch_spec.mixtures_per_mom != 2) {
    throw InvalidInput("the enhancement pairing uses K = 2");
  }
}

namespace {

BatchSpec effective_spec(const TrainConfig& c) {
  BatchSpec s = c.batch_spec;
  if (c.mode == TrainMode::kSupervised) s.supervised_fraction = 1.0;
  if (c.mode == TrainMode::kUnsupervised) s.supervised_fraction = 0.0;
  return s;
}

bool all_supervised(const std::vector<TrainExample>& v) {
  for (const auto& e : v) {
    if (!e.supervised()) return false;
  }
  return !v.empty();
}

ValidationMetric resolve_metric(ValidationMetric m, const std::vector<TrainExample>& val) {
  if (m != ValidationMetric::kAuto) return m;
  return all_supervised(val) ? ValidationMetric::kMsi : ValidationMetric::kMomi;
}

double global_norm(const ag::TensorMap& grads) {
  double s = 0.0;
  for (const auto& [_, g] : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

Trainer::Trainer(TrainConfig config, TrainData data, std::optional<Checkpoint> resume)
    : config_(std::move(config)),
      data_(std::move(data)),
      loss_(config_.snr_max),
      val_metric_(ValidationMetric::kAuto),
      rng_(derive_seed(config_.seed, 4)) {
  config_.validate();
  config_.batch_spec = effective_spec(config_);
  if (data_.train.empty()) throw InvalidInput("training corpus is empty");
  for (const auto& e : data_.train) {
    if (e.supervised()) supervised_pool_.push_back(e);
  }
  const std::size_t K = config_.batch_spec.mixtures_per_mom;
  const std::size_t sup = config_.batch_spec.supervised_count(config_.batch_size);
  if (sup > 0) {
    if (supervised_pool_.empty()) {
      throw InvalidInput("mode '" + train_mode_name(config_.mode) +
                         "' needs reference sources but the training manifest has none");
    }
    sup_sampler_.emplace(supervised_pool_.size(), derive_seed(config_.seed, 1));
  }
  if (sup < config_.batch_size) {
    unsup_sampler_.emplace(data_.train.size(), derive_seed(config_.seed, 2));
    if (config_.enhancement) {
      if (data_.noise_only.empty()) throw InvalidInput("enhancement training needs a noise-only split");
      noise_sampler_.emplace(data_.noise_only.size(), derive_seed(config_.seed, 3));
    } else if (data_.train.size() < K) {
      throw InvalidInput("training corpus smaller than K = " + std::to_string(K));
    }
  }

  if (resume) {
    if (!(resume->model.config == config_.model)) {
      throw InvalidInput("checkpoint model config differs from the requested one");
    }
    model_ = resume->model;
  } else {
    model_ = init_parameters(config_.model, derive_seed(config_.seed, 0));
  }
  adam_.learning_rate = config_.learning_rate;
  best_model_ = model_;
  val_metric_ = data_.validation.empty() ? config_.validation_metric
                                         : resolve_metric(config_.validation_metric, data_.validation);
}

Trainer::Item Trainer::supervised_item() {
  const std::size_t M = config_.model.num_outputs;
  Item item;
  item.supervised = true;
  if (config_.supervised_mom) {
    MomExample mom = make_mom(supervised_pool_, *sup_sampler_, config_.batch_spec, rng_,
                              config_.crop_length);
    item.input = mom.mom;
    item.references = mom.references(M);
    item.mixtures = mom.component_mixtures();
  } else {
    const auto& ex = supervised_pool_[sup_sampler_->draw(1)[0]];
    TrainExample c = config_.crop_length ? crop_example(ex, config_.crop_length, rng_) : ex;
    if (c.references->size() > M) {
      throw InvalidInput("example has more reference slots than model outputs");
    }
    item.input = c.mixture;
    item.references = c.references->zero_padded(M);
    item.mixtures = SourceSet({c.mixture});
  }
  return item;
}

Trainer::Item Trainer::unsupervised_item() {
  MomExample mom;
  if (config_.enhancement) {
    mom = make_enhancement_pair(data_.train, *unsup_sampler_, data_.noise_only, *noise_sampler_,
                                rng_, config_.crop_length);
  } else {
    BatchSpec s = config_.batch_spec;
    s.zero_probability = 0.0;
    mom = make_mom(data_.train, *unsup_sampler_, s, rng_, config_.crop_length);
  }
  Item item;
  item.input = mom.mom;
  item.mixtures = mom.component_mixtures();
  item.constraint = mom.constraint;
  return item;
}

std::vector<Trainer::Item> Trainer::next_batch() {
  const std::size_t B = config_.batch_size;
  const std::size_t S = config_.batch_spec.supervised_count(B);
  std::vector<Item> batch;
  batch.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    batch.push_back(b < S ? supervised_item() : unsupervised_item());
  }
  return batch;
}

double Trainer::step() {
  const auto batch = next_batch();
  const std::size_t B = batch.size(), M = config_.model.num_outputs;
  std::vector<Waveform> inputs;
  inputs.reserve(B);
  for (const auto& it : batch) inputs.push_back(it.input);

  ag::Tape tape;
  tape.set_retain_grads(false);
  const SeparatorGraph graph = build_separator(tape, model_, inputs, true);
  const std::size_t T = inputs[0].size();
  const int sr = config_.model.sample_rate;

  std::vector<ag::Var> losses;
  losses.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    ag::Var est = ag::reshape(tape, ag::slice(tape, graph.output, 0, b, 1), ag::Shape{M, T});
    const SourceSet numeric = estimates_of(tape, est, sr);
    const Item& it = batch[b];
    if (it.supervised) {
      PitOptions opts;
      opts.zero_source_loss = config_.zero_source_loss;
      opts.mixture = it.input;
      const auto best = pit_loss(*it.references, numeric, loss_, opts).best;
      losses.push_back(graph_pit_loss(tape, est, *it.references, best, loss_, opts));
    } else {
      const auto best = mixit_loss(it.mixtures, numeric, loss_, it.constraint).best;
      losses.push_back(graph_mixit_loss(tape, est, it.mixtures, best, loss_));
    }
  }
  ag::Var total = ag::scale(tape, ag::sum(tape, ag::concat(tape, losses, 0)),
                            1.0 / static_cast<double>(B));
  const double loss_db = tape.value(total).item();
  const std::size_t step_no = steps_done() + 1;
  if (!std::isfinite(loss_db)) {
    throw NumericError("non-finite loss at step " + std::to_string(step_no));
  }
  ag::TensorMap grads = tape.backward(total);
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) {
    for (const auto& [name, g] : grads) {
      for (double v : g.values()) {
        if (!std::isfinite(v)) {
          throw NumericError("non-finite gradient for '" + name + "' at step " +
                             std::to_string(step_no) + " (loss " + std::to_string(loss_db) + " dB)");
        }
      }
    }
  }
  if (config_.clip_grad_norm > 0.0 && norm > config_.clip_grad_norm) {
    const double f = config_.clip_grad_norm / norm;
    for (auto& [_, g] : grads) {
      for (double& v : g.values()) v *= f;
    }
  }
  ag::adam_step(model_.params, grads, adam_);
  return loss_db;
}

double validation_score(const SeparatorModel& model, const std::vector<TrainExample>& examples,
                        ValidationMetric metric, const LossConfig& loss, std::size_t limit) {
  if (examples.empty()) throw InvalidInput("validation set is empty");
  const std::size_t n = limit ? std::min(limit, examples.size()) : examples.size();
  double total = 0.0;
  std::size_t count = 0;
  switch (metric) {
    case ValidationMetric::kAuto:
      return validation_score(model, examples, resolve_metric(metric, examples), loss, limit);
    case ValidationMetric::kMsi:
      for (std::size_t i = 0; i < n; ++i) {
        const auto& ex = examples[i];
        if (!ex.supervised() || ex.true_source_count == 0) continue;
        total += msi(*ex.references, separate(model, ex.mixture), ex.mixture);
        ++count;
      }
      break;
    case ValidationMetric::kSs:
      for (std::size_t i = 0; i < n; ++i) {
        const auto& ex = examples[i];
        if (!ex.supervised() || ex.true_source_count != 1) continue;
        for (const auto& r : *ex.references) {
          if (!r.is_silent()) {
            total += ss(r, separate(model, ex.mixture));
            break;
          }
        }
        ++count;
      }
      break;
    case ValidationMetric::kMomi:
    case ValidationMetric::kLoss:
      // Consecutive pairs form the validation MoMs.
      for (std::size_t i = 0; i + 1 < n; i += 2) {
        const SourceSet mixtures({examples[i].mixture, examples[i + 1].mixture});
        const Waveform mom = mix(mixtures);
        const SourceSet est = separate(model, mom);
        total += metric == ValidationMetric::kMomi ? momi(mixtures, est, mom)
                                                   : -mixit_loss(mixtures, est, loss).loss_db;
        ++count;
      }
      break;
  }
  if (count == 0) {
    throw InvalidInput("validation set has no examples usable for metric '" +
                       validation_metric_name(metric) + "'");
  }
  return total / static_cast<double>(count);
}

double Trainer::validate() const {
  return validation_score(model_, data_.validation, val_metric_, loss_,
                          config_.max_validation_items);
}

void Trainer::run(const std::function<void(const TrainLogEntry&)>& on_log) {
  const auto start = std::chrono::steady_clock::now();
  const bool has_val = !data_.validation.empty();
  while (steps_done() < config_.steps) {
    TrainLogEntry entry;
    entry.loss_db = step();
    entry.step = steps_done();
    const bool due = (config_.eval_every && entry.step % config_.eval_every == 0) ||
                     entry.step == config_.steps;
    if (has_val && due) {
      const double score = validate();
      entry.val_metric = score;
      if (!best_score_ || score > *best_score_) {
        best_score_ = score;
        best_model_ = model_;
      }
    } else if (!has_val) {
      best_model_ = model_;
    }
    entry.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_log) on_log(entry);
  }
}

Checkpoint Trainer::checkpoint(bool best) const {
  Checkpoint c;
  c.model = best ? best_model_ : model_;
  if (!best) c.optimizer = adam_;
  c.metadata["mode"] = train_mode_name(config_.mode);
  c.metadata["seed"] = std::to_string(config_.seed);
  c.metadata["steps"] = std::to_string(steps_done());
  c.metadata["validation_metric"] = validation_metric_name(val_metric_);
  if (best_score_) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", *best_score_);
    c.metadata["best_score"] = buf;
  }
  return c;
}

}  // namespace mixit
