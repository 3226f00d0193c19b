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
#include <numeric>
#include <random>

#include "finite_difference.hpp"
#include "mixit/autograd/ops.hpp"
#include "mixit/checkpoint.hpp"
#include "mixit/error.hpp"
#include "mixit/losses.hpp"
#include "mixit/train.hpp"
#include "test_util.hpp"

namespace mixit {
namespace {

using autograd::Shape;
using autograd::Tape;
using autograd::Tensor;
using autograd::Var;

Tensor stack(const SourceSet& s) {
  Tensor t(Shape{s.size(), s.length()});
  for (std::size_t m = 0; m < s.size(); ++m)
    std::copy(s[m].samples().begin(), s[m].samples().end(), t.data() + m * s.length());
  return t;
}

TEST(GraphLosses, MatchNumericLosses) {
  std::mt19937_64 gen(91);
  for (int rep = 0; rep < 20; ++rep) {
    const SourceSet x = testing::random_set(2, 32, gen);
    const SourceSet est = testing::random_set(4, 32, gen);
    const auto r = mixit_loss(x, est, LossConfig(20.0));
    Tape tape;
    Var v = graph_mixit_loss(tape, tape.constant(stack(est)), x, r.best, LossConfig(20.0));
    EXPECT_NEAR(tape.value(v).item(), r.loss_db, 1e-10);

    const SourceSet refs({x[0], testing::silent(32), x[1], testing::silent(32)});
    for (bool zero : {false, true}) {
      PitOptions opt;
      opt.zero_source_loss = zero;
      const auto p = pit_loss(refs, est, LossConfig(), opt);
      Tape t2;
      Var w = graph_pit_loss(t2, t2.constant(stack(est)), refs, p.best, LossConfig(), opt);
      EXPECT_NEAR(t2.value(w).item(), p.loss_db, 1e-10) << "zero loss " << zero;
    }
  }
}

TEST(GraphLosses, MinOverAGradientEqualsFrozenAssignmentGradient) {
  std::mt19937_64 gen(92);
  const SourceSet x = testing::random_set(2, 16, gen);
  const SourceSet est = testing::random_set(3, 16, gen);
  const MixingMatrix best = mixit_loss(x, est, LossConfig()).best;
  // Finite differences of the full min-over-A loss (small steps stay on the
  // same branch) against the frozen-A tape gradient.
  Tape tape;
  Tensor e = stack(est);
  e.set_requires_grad(true);
  Var ev = tape.leaf("est", e);
  const auto g = tape.backward(graph_mixit_loss(tape, ev, x, best, LossConfig()));
  const double h = 1e-6;
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t t = 0; t < 16; ++t) {
      auto probe = [&](double d) {
        std::vector<Waveform> w(est.begin(), est.end());
        w[m].mutable_samples()[t] += d;
        return mixit_loss(x, SourceSet(w), LossConfig()).loss_db;
      };
      const double numeric = (probe(h) - probe(-h)) / (2 * h);
      EXPECT_NEAR(g.at("est")[m * 16 + t], numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
    }
  }
}

std::vector<TrainExample> tiny_corpus(std::size_t n, std::size_t min_src, std::size_t max_src,
                                      std::uint64_t seed) {
  ToyCorpusOptions opt;
  opt.num_mixtures = n;
  opt.min_sources = min_src;
  opt.max_sources = max_src;
  opt.duration_s = 0.05;
  opt.seed = seed;
  return make_toy_corpus(opt);
}

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.model.num_outputs = 4;
  c.model.basis_size = 16;
  c.model.kernel_size = 8;
  c.model.num_blocks = 2;
  c.model.bottleneck_channels = 8;
  c.model.conv_channels = 16;
  c.model.dilation_period = 2;
  c.model.skip_residual_edges.clear();
  c.batch_size = 4;
  c.steps = 20;
  c.eval_every = 10;
  c.learning_rate = 3e-3;
  c.seed = 5;
  return c;
}

std::vector<TrainLogEntry> run_logged(Trainer& t) {
  std::vector<TrainLogEntry> log;
  t.run([&](const TrainLogEntry& e) { log.push_back(e); });
  return log;
}

TEST(Trainer, SupervisedModeEqualsSemiWithFullFraction) {
  TrainConfig a = tiny_train_config();
  a.mode = TrainMode::kSupervised;
  TrainConfig b = a;
  b.mode = TrainMode::kSemi;
  b.batch_spec.supervised_fraction = 1.0;
  const auto corpus = tiny_corpus(16, 1, 2, 1);
  Trainer ta(a, TrainData{corpus, tiny_corpus(4, 2, 2, 2), {}});
  Trainer tb(b, TrainData{corpus, tiny_corpus(4, 2, 2, 2), {}});
  const auto la = run_logged(ta), lb = run_logged(tb);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_EQ(la[i].loss_db, lb[i].loss_db);
    EXPECT_EQ(la[i].val_metric, lb[i].val_metric);
  }
}

TEST(Trainer, IdenticalSeedsGiveIdenticalCheckpoints) {
  TrainConfig c = tiny_train_config();
  c.mode = TrainMode::kSemi;
  c.batch_spec.supervised_fraction = 0.5;
  c.batch_spec.zero_probability = 0.3;
  const auto corpus = tiny_corpus(16, 1, 2, 3);
  Trainer a(c, TrainData{corpus, tiny_corpus(4, 2, 2, 4), {}});
  Trainer b(c, TrainData{corpus, tiny_corpus(4, 2, 2, 4), {}});
  const auto la = run_logged(a), lb = run_logged(b);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].loss_db, lb[i].loss_db);
  EXPECT_EQ(encode_checkpoint(a.checkpoint(false)), encode_checkpoint(b.checkpoint(false)));
  EXPECT_EQ(encode_checkpoint(a.checkpoint(true)), encode_checkpoint(b.checkpoint(true)));
  c.seed = 6;
  Trainer d(c, TrainData{corpus, tiny_corpus(4, 2, 2, 4), {}});
  d.run();
  EXPECT_NE(encode_checkpoint(a.checkpoint(false)), encode_checkpoint(d.checkpoint(false)));
}

TEST(Trainer, UnsupervisedLossDecreases) {
  TrainConfig c = tiny_train_config();
  c.mode = TrainMode::kUnsupervised;
  c.steps = 300;
  c.eval_every = 300;
  std::vector<TrainExample> unsup;
  for (const auto& ex : tiny_corpus(64, 1, 2, 7)) unsup.push_back(TrainExample::make_unsupervised(ex.mixture));
  Trainer t(c, TrainData{unsup, tiny_corpus(8, 2, 2, 8), {}});
  const auto log = run_logged(t);
  ASSERT_EQ(log.size(), 300u);
  double early = 0.0, late = 0.0;
  for (std::size_t i = 0; i < 30; ++i) early += log[i].loss_db;
  for (std::size_t i = 270; i < 300; ++i) late += log[i].loss_db;
  EXPECT_LT(late, early);
  EXPECT_TRUE(log.back().val_metric.has_value());
  EXPECT_EQ(t.resolved_validation_metric(), ValidationMetric::kMsi);
}

TEST(Trainer, UnsupervisedRunNeedsNoReferences) {
  TrainConfig c = tiny_train_config();
  c.mode = TrainMode::kUnsupervised;
  c.steps = 2;
  std::vector<TrainExample> unsup;
  for (const auto& ex : tiny_corpus(8, 1, 2, 9)) unsup.push_back(TrainExample::make_unsupervised(ex.mixture));
  Trainer t(c, TrainData{unsup, unsup, {}});
  EXPECT_NO_THROW(t.run());
  EXPECT_EQ(t.resolved_validation_metric(), ValidationMetric::kMomi);
}

TEST(Trainer, SupervisedModeRejectsReferenceFreeData) {
  TrainConfig c = tiny_train_config();
  c.mode = TrainMode::kSupervised;
  std::vector<TrainExample> unsup;
  for (const auto& ex : tiny_corpus(8, 1, 2, 10)) unsup.push_back(TrainExample::make_unsupervised(ex.mixture));
  EXPECT_THROW(Trainer(c, TrainData{unsup, {}, {}}), InvalidInput);
}

TEST(Trainer, EnhancementNeedsThreeOutputs) {
  TrainConfig c = tiny_train_config();
  c.enhancement = true;
  EXPECT_THROW(c.validate(), InvalidInput);
  c.model.num_outputs = 3;
  EXPECT_NO_THROW(c.validate());
}

TEST(Trainer, InitFromCheckpointStartsFromItsWeights) {
  TrainConfig c = tiny_train_config();
  c.mode = TrainMode::kSupervised;
  c.steps = 3;
  const auto corpus = tiny_corpus(8, 2, 2, 11);
  Trainer a(c, TrainData{corpus, {}, {}});
  a.run();
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(a.checkpoint(false)));
  Trainer b(c, TrainData{corpus, {}, {}}, ck);
  EXPECT_EQ(b.model().params, ck.model.params);
  // Initialization only: fresh optimizer, step count restarts.
  EXPECT_EQ(b.steps_done(), 0u);
}

TEST(ValidationMetricNames, ParseRoundTrip) {
  for (auto m : {ValidationMetric::kAuto, ValidationMetric::kMsi, ValidationMetric::kSs,
                 ValidationMetric::kMomi, ValidationMetric::kLoss}) {
    EXPECT_EQ(parse_validation_metric(validation_metric_name(m)), m);
  }
  EXPECT_THROW(parse_validation_metric("bogus"), InvalidInput);
  EXPECT_THROW(parse_train_mode("bogus"), InvalidInput);
}

}  // namespace
}  // namespace mixit
