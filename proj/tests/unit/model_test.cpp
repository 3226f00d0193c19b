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
#include <filesystem>
#include <random>

#include "mixit/autograd/ops.hpp"
#include "mixit/checkpoint.hpp"
#include "mixit/error.hpp"
#include "mixit/losses.hpp"
#include "mixit/model.hpp"
#include "test_util.hpp"

namespace mixit {
namespace {

using autograd::Shape;
using autograd::Tape;
using autograd::Tensor;
using autograd::TensorMap;
using autograd::Var;
using Frames = std::vector<std::vector<double>>;  // [F][C]

ModelConfig tiny_config(std::size_t blocks = 2) {
  ModelConfig c;
  c.num_outputs = 3;
  c.basis_size = 6;
  c.kernel_size = 4;
  c.num_blocks = blocks;
  c.bottleneck_channels = 5;
  c.conv_channels = 7;
  c.dilation_period = 2;
  c.skip_residual_edges = blocks > 2 ? std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}}
                                     : std::vector<std::pair<std::size_t, std::size_t>>{};
  return c;
}

// Randomize every parameter, including the ones initialized to constants,
// so the oracle exercises scales, norms and biases.
SeparatorModel randomized(const ModelConfig& cfg, std::uint64_t seed) {
  SeparatorModel m = init_parameters(cfg, seed);
  std::mt19937_64 gen(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& [name, t] : m.params) {
    for (auto& v : t.values()) v += u(gen);
  }
  return m;
}

// --- independent straight-line forward pass -----------------------------------

Frames dense(const Frames& x, const Tensor& w, const Tensor& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Frames y(x.size(), std::vector<double>(out));
  for (std::size_t f = 0; f < x.size(); ++f)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[f][i] * w[i * out + o];
      y[f][o] = acc;
    }
  return y;
}

Frames prelu(Frames x, const Tensor& a) {
  for (auto& row : x)
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] >= 0 ? row[c] : a[c] * row[c];
  return x;
}

Frames gln(Frames x, const Tensor& g, const Tensor& b) {
  const std::size_t F = x.size(), C = x[0].size();
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    for (std::size_t f = 0; f < F; ++f) mean += x[f][c];
    mean /= static_cast<double>(F);
    double var = 0.0;
    for (std::size_t f = 0; f < F; ++f) var += (x[f][c] - mean) * (x[f][c] - mean);
    var /= static_cast<double>(F);
    for (std::size_t f = 0; f < F; ++f) x[f][c] = (x[f][c] - mean) / std::sqrt(var + 1e-8) * g[c] + b[c];
  }
  return x;
}

SourceSet straight_line_separate(const SeparatorModel& model, const Waveform& mixture) {
  const ModelConfig& cfg = model.config;
  const auto& P = model.params;
  const std::size_t L = cfg.kernel_size, hop = L / 2, N = cfg.basis_size, M = cfg.num_outputs;
  std::vector<double> x(mixture.samples().begin(), mixture.samples().end());
  std::size_t padded = std::max(x.size(), L);
  padded = (padded + hop - 1) / hop * hop;
  for (std::size_t j = 0; x.size() < padded; ++j) x.push_back(mixture.samples()[mixture.size() - 2 - j]);
  const std::size_t F = (padded - L) / hop + 1;

  Frames coeff(F, std::vector<double>(N, 0.0));
  const Tensor& enc = P.at("encoder/basis");
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t l = 0; l < L; ++l) coeff[f][n] += x[f * hop + l] * enc[l * N + n];

  Frames relu_c = coeff;
  for (auto& r : relu_c)
    for (auto& v : r) v = std::max(v, 0.0);
  std::vector<Frames> outs;
  Frames h = dense(relu_c, P.at("bottleneck_in/w"), P.at("bottleneck_in/b"));
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    auto bp = [&](const char* leaf) -> const Tensor& { return P.at(block_param(i, leaf)); };
    Frames in = i == 0 ? h : outs.back();
    for (auto [from, to] : cfg.skip_residual_edges) {
      if (to != i) continue;
      Frames s = dense(outs[from], P.at(skip_param(from, to, "w")), P.at(skip_param(from, to, "b")));
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t c = 0; c < s[f].size(); ++c) in[f][c] += s[f][c];
    }
    Frames y = dense(in, bp("dense1/w"), bp("dense1/b"));
    for (auto& r : y)
      for (auto& v : r) v *= bp("scale1")[0];
    y = gln(prelu(y, bp("prelu1")), bp("norm1/gamma"), bp("norm1/beta"));
    const std::size_t C = y[0].size(), K = cfg.depthwise_kernel;
    const long dil = 1L << (i % cfg.dilation_period);
    Frames z(F, std::vector<double>(C));
    const Tensor& dw = bp("dwconv/w");
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = bp("dwconv/b")[c];
        for (std::size_t k = 0; k < K; ++k) {
          const long src = static_cast<long>(f) + (static_cast<long>(k) - static_cast<long>(K / 2)) * dil;
          if (src >= 0 && src < static_cast<long>(F)) acc += y[static_cast<std::size_t>(src)][c] * dw[k * C + c];
        }
        z[f][c] = acc;
      }
    z = gln(prelu(z, bp("prelu2")), bp("norm2/gamma"), bp("norm2/beta"));
    Frames o = dense(z, bp("dense2/w"), bp("dense2/b"));
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < o[f].size(); ++c) o[f][c] = in[f][c] + o[f][c] * bp("scale2")[0];
    outs.push_back(o);
  }
  Frames logits = dense(dense(outs.back(), P.at("bottleneck_out/w"), P.at("bottleneck_out/b")),
                        P.at("mask/w"), P.at("mask/b"));
  const Tensor& dec = P.at("decoder/basis");
  std::vector<std::vector<double>> waves(M, std::vector<double>(padded, 0.0));
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t n = 0; n < N; ++n) {
        const double mask = 1.0 / (1.0 + std::exp(-logits[f][m * N + n]));
        for (std::size_t l = 0; l < L; ++l) waves[m][f * hop + l] += mask * coeff[f][n] * dec[n * L + l];
      }
  std::vector<Waveform> out;
  for (std::size_t t = 0; t < mixture.size(); ++t) {
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) sum += waves[m][t];
    const double share = (mixture.samples()[t] - sum) / static_cast<double>(M);
    for (std::size_t m = 0; m < M; ++m) waves[m][t] += share;
  }
  for (auto& w : waves) {
    w.resize(mixture.size());
    out.emplace_back(std::move(w), mixture.sample_rate());
  }
  return SourceSet(std::move(out));
}

TEST(Separator, MatchesStraightLineOracle) {
  std::mt19937_64 gen(61);
  for (std::size_t blocks : {2u, 3u}) {
    const SeparatorModel model = randomized(tiny_config(blocks), 5 + blocks);
    for (std::size_t len : {37u, 40u}) {
      const Waveform x = testing::random_wave(len, gen);
      const SourceSet got = separate(model, x);
      const SourceSet want = straight_line_separate(model, x);
      for (std::size_t m = 0; m < got.size(); ++m)
        for (std::size_t t = 0; t < len; ++t)
          EXPECT_NEAR(got[m].samples()[t], want[m].samples()[t], 1e-10) << "blocks " << blocks;
    }
  }
}

TEST(Separator, ShapeContractAndConsistency) {
  std::mt19937_64 gen(62);
  const SeparatorModel model = init_parameters(ModelConfig::desk_scale(), 3);
  const Waveform x = testing::random_wave(1001, gen, 0.1);
  const SourceSet out = separate(model, x);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out.length(), 1001u);
  const Waveform sum = mix(out);
  double err = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) err = std::max(err, std::abs(sum.samples()[t] - x.samples()[t]));
  EXPECT_LT(err, 1e-10);
}

TEST(Separator, UniformMasksGiveEqualShares) {
  ModelConfig cfg = tiny_config();
  cfg.mixture_consistency = false;
  SeparatorModel model = init_parameters(cfg, 4);
  model.params.at("mask/w").fill(0.0);
  model.params.at("mask/b").fill(std::log(1.0 / (cfg.num_outputs - 1.0)));  // sigmoid = 1/M
  // Identical masks make every output the same waveform; the consistency
  // layer then hands each one exactly x / M.
  std::mt19937_64 gen(63);
  const Waveform x = testing::random_wave(40, gen);
  const SourceSet out = separate(model, x);
  for (std::size_t m = 1; m < out.size(); ++m)
    for (std::size_t t = 0; t < 40; ++t) EXPECT_NEAR(out[m].samples()[t], out[0].samples()[t], 1e-12);

  cfg.mixture_consistency = true;
  model.config = cfg;
  const SourceSet cons = separate(model, x);
  for (const auto& w : cons)
    for (std::size_t t = 0; t < 40; ++t) EXPECT_NEAR(w.samples()[t], x.samples()[t] / 3.0, 1e-12);
}

TEST(Separator, MasksStayInUnitInterval) {
  Tape tape;
  const SeparatorModel model = randomized(tiny_config(), 8);
  std::mt19937_64 gen(64);
  const std::vector<Waveform> batch{testing::random_wave(32, gen), testing::random_wave(32, gen)};
  const auto g = build_separator(tape, model, batch, false);
  for (double v : tape.value(g.masks).values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(tape.shape(g.output), (Shape{2, 3, 32}));
}

TEST(Separator, DilationScheduleAndSkips) {
  ModelConfig cfg = ModelConfig::desk_scale();
  EXPECT_EQ(cfg.dilation(0), 1u);
  EXPECT_EQ(cfg.dilation(3), 8u);
  EXPECT_EQ(cfg.dilation(4), 1u);
  EXPECT_EQ(cfg.skip_sources(4), (std::vector<std::size_t>{0}));
  cfg.skip_residual_edges = {{3, 3}};
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Separator, RejectsWrongSampleRateAndShortInput) {
  const SeparatorModel model = init_parameters(tiny_config(), 1);
  EXPECT_THROW(separate(model, Waveform(std::vector<double>(64, 0.1), 16000)), InvalidInput);
  EXPECT_THROW(separate(model, testing::wave({0.1, 0.2})), InvalidInput);
}

TEST(InitParameters, DeterministicWithBlockScaleSchedule) {
  const auto a = init_parameters(ModelConfig::desk_scale(), 9);
  const auto b = init_parameters(ModelConfig::desk_scale(), 9);
  const auto c = init_parameters(ModelConfig::desk_scale(), 10);
  EXPECT_EQ(a.params, b.params);
  EXPECT_NE(a.params.at("encoder/basis"), c.params.at("encoder/basis"));
  EXPECT_EQ(a.params.at(block_param(0, "scale2")).item(), 1.0);
  EXPECT_DOUBLE_EQ(a.params.at(block_param(3, "scale2")).item(), std::pow(0.9, 3));
}

TEST(NormalizeInstance, ConstantChannelAndMoments) {
  Tape tape;
  std::mt19937_64 gen(65);
  Tensor x(Shape{1, 50, 3});
  std::normal_distribution<double> n(2.0, 3.0);
  for (std::size_t f = 0; f < 50; ++f) {
    x[f * 3 + 0] = 4.0;  // constant channel
    x[f * 3 + 1] = n(gen);
    x[f * 3 + 2] = n(gen);
  }
  Var y = normalize_instance(tape, tape.constant(x), tape.constant(Tensor(Shape{3}, 1.0)),
                             tape.constant(Tensor(Shape{3}, 0.0)));
  const Tensor& v = tape.value(y);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t f = 0; f < 50; ++f) mean += v[f * 3 + c];
    mean /= 50.0;
    for (std::size_t f = 0; f < 50; ++f) sq += (v[f * 3 + c] - mean) * (v[f * 3 + c] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    if (c == 0) {
      for (std::size_t f = 0; f < 50; ++f) EXPECT_EQ(v[f * 3], 0.0);
    } else {
      EXPECT_NEAR(sq / 50.0, 1.0, 1e-6);
    }
  }
  // Two-pass oracle including scale and bias.
  const Tensor g(Shape{3}, std::vector<double>{0.5, -1.0, 2.0});
  const Tensor b(Shape{3}, std::vector<double>{0.1, 0.2, 0.3});
  Tape t2;
  Var y2 = normalize_instance(t2, t2.constant(x), t2.constant(g), t2.constant(b));
  Frames fr(50, std::vector<double>(3));
  for (std::size_t f = 0; f < 50; ++f)
    for (std::size_t c = 0; c < 3; ++c) fr[f][c] = x[f * 3 + c];
  const Frames want = gln(fr, g, b);
  for (std::size_t f = 0; f < 50; ++f)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(t2.value(y2)[f * 3 + c], want[f][c], 1e-12);
}

TEST(Gradients, EndToEndMixitLossOverAllParameters) {
  const SeparatorModel model = randomized(tiny_config(3), 21);
  std::mt19937_64 gen(66);
  const SourceSet mixtures = testing::random_set(2, 24, gen);
  const Waveform mom = mix(mixtures);
  // Fix the argmin at the starting point; finite differences then probe the
  // smooth branch it selects.
  const SourceSet est0 = separate(model, mom);
  const MixingMatrix best = mixit_loss(mixtures, est0, LossConfig()).best;
  // build_separator creates its own parameter leaves, so differences are
  // taken by rebuilding the whole graph per probe.
  auto loss_at = [&](const TensorMap& params, TensorMap* grads) {
    SeparatorModel m = model;
    m.params = params;
    Tape tape;
    std::vector<Waveform> batch{mom};
    auto g = build_separator(tape, m, batch, grads != nullptr);
    Var est = autograd::reshape(tape, g.output, Shape{3, 24});
    Var loss = graph_mixit_loss(tape, est, mixtures, best, LossConfig());
    const double v = tape.value(loss).item();
    if (grads) *grads = tape.backward(loss);
    return v;
  };
  TensorMap analytic;
  const double base = loss_at(model.params, &analytic);
  EXPECT_NEAR(base, mixit_loss(mixtures, est0, LossConfig()).loss_db, 1e-9);
  double worst = 0.0;
  std::string where;
  for (const auto& [name, t] : model.params) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      TensorMap plus = model.params, minus = model.params;
      const double h = 1e-5;
      plus[name][i] += h;
      minus[name][i] -= h;
      const double numeric = (loss_at(plus, nullptr) - loss_at(minus, nullptr)) / (2 * h);
      const double a = analytic.at(name)[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
      if (err > worst) {
        worst = err;
        where = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  EXPECT_LE(worst, 1e-4) << where;
}

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "mixit_ckpt_test";
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(CheckpointTest, RoundTripIsExactAfterFloatRounding) {
  Checkpoint ck;
  ck.model = randomized(tiny_config(3), 30);
  ck.metadata["seed"] = "30";
  save_checkpoint(dir_ / "a.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir_ / "a.ckpt");
  EXPECT_EQ(back.model.config, ck.model.config);
  EXPECT_EQ(back.metadata.at("seed"), "30");
  for (const auto& [name, t] : ck.model.params) {
    const Tensor& r = back.model.params.at(name);
    ASSERT_EQ(r.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_EQ(r[i], static_cast<double>(static_cast<float>(t[i])));
    }
  }
  // A second save of the loaded model is byte-identical.
  save_checkpoint(dir_ / "b.ckpt", back);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(load_checkpoint(dir_ / "b.ckpt")));
}

TEST_F(CheckpointTest, CorruptFilesAreDataErrors) {
  Checkpoint ck;
  ck.model = init_parameters(tiny_config(), 1);
  std::string bytes = encode_checkpoint(ck);
  EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 3)), DataError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bytes), DataError);
  EXPECT_THROW(load_checkpoint(dir_ / "none.ckpt"), DataError);
}

TEST(ModelConfigJson, RoundTrip) {
  const ModelConfig c = ModelConfig::reference(16000);
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
}

}  // namespace
}  // namespace mixit
