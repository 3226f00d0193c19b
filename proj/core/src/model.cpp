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

#include "mixit/model.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "mixit/error.hpp"

namespace mixit {

using autograd::Shape;
using autograd::Tape;
using autograd::Tensor;
using autograd::Var;
namespace ag = autograd;

ModelConfig ModelConfig::desk_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::reference(int sample_rate) {
  if (sample_rate != 8000 && sample_rate != 16000) {
    throw InvalidInput("reference configuration is defined for 8 kHz and 16 kHz");
  }
  ModelConfig c;
  c.basis_size = 256;
  c.kernel_size = sample_rate == 8000 ? 20 : 40;
  c.num_blocks = 32;
  c.bottleneck_channels = 256;
  c.conv_channels = 512;
  c.depthwise_kernel = 3;
  c.dilation_period = 8;
  c.skip_residual_edges = {{0, 8}, {0, 16}, {0, 24}, {8, 16}, {8, 24}, {16, 24}};
  c.sample_rate = sample_rate;
  return c;
}

void ModelConfig::validate() const {
  if (num_outputs == 0 || basis_size == 0 || kernel_size == 0 || num_blocks == 0 ||
      bottleneck_channels == 0 || conv_channels == 0 || depthwise_kernel == 0 ||
      dilation_period == 0) {
    throw InvalidInput("model dimensions must be positive");
  }
  if (kernel_size % 2 != 0) throw InvalidInput("encoder kernel size must be even (hop is L/2)");
  if (depthwise_kernel % 2 == 0) throw InvalidInput("depthwise kernel size must be odd");
  if (sample_rate <= 0) throw InvalidInput("sample rate must be positive");
  for (auto [from, to] : skip_residual_edges) {
    if (from >= to || to >= num_blocks) {
      throw InvalidInput("skip-residual edge " + std::to_string(from) + "->" + std::to_string(to) +
                         " must point strictly forward within the block stack");
    }
  }
}

std::size_t ModelConfig::dilation(std::size_t block) const {
  return std::size_t{1} << (block % dilation_period);
}

std::vector<std::size_t> ModelConfig::skip_sources(std::size_t block) const {
  std::vector<std::size_t> out;
  for (auto [from, to] : skip_residual_edges) {
    if (to == block) out.push_back(from);
  }
  return out;
}

std::size_t SeparatorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

std::string block_param(std::size_t block, const std::string& leaf) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "block%02zu/", block);
  return buf + leaf;
}

std::string skip_param(std::size_t from, std::size_t to, const std::string& leaf) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "skip%02zu_%02zu/", from, to);
  return buf + leaf;
}

SeparatorModel init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SeparatorModel model;
  model.config = config;
  std::mt19937_64 rng(seed);
  auto& p = model.params;

  auto uniform = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    // Explicit mapping of raw 64-bit draws keeps the stream identical across
    // standard library implementations.
    for (double& v : t.values()) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * bound;
    }
    p[name] = std::move(t);
  };
  auto constant = [&](const std::string& name, Shape shape, double value) {
    p[name] = Tensor(std::move(shape), value);
  };

  const std::size_t n = config.basis_size, l = config.kernel_size;
  const std::size_t b = config.bottleneck_channels, c = config.conv_channels;
  const std::size_t m = config.num_outputs, k = config.depthwise_kernel;

  uniform("encoder/basis", {l, n}, l);
  uniform("bottleneck_in/w", {n, b}, n);
  constant("bottleneck_in/b", {b}, 0.0);
  for (std::size_t i = 0; i < config.num_blocks; ++i) {
    uniform(block_param(i, "dense1/w"), {b, c}, b);
    constant(block_param(i, "dense1/b"), {c}, 0.0);
    constant(block_param(i, "scale1"), {1}, 1.0);
    constant(block_param(i, "prelu1"), {c}, 0.25);
    constant(block_param(i, "norm1/gamma"), {c}, 1.0);
    constant(block_param(i, "norm1/beta"), {c}, 0.0);
    uniform(block_param(i, "dwconv/w"), {k, c}, k);
    constant(block_param(i, "dwconv/b"), {c}, 0.0);
    constant(block_param(i, "prelu2"), {c}, 0.25);
    constant(block_param(i, "norm2/gamma"), {c}, 1.0);
    constant(block_param(i, "norm2/beta"), {c}, 0.0);
    uniform(block_param(i, "dense2/w"), {c, b}, c);
    constant(block_param(i, "dense2/b"), {b}, 0.0);
    constant(block_param(i, "scale2"), {1}, std::pow(0.9, static_cast<double>(i)));
  }
  for (auto [from, to] : config.skip_residual_edges) {
    uniform(skip_param(from, to, "w"), {b, b}, b);
    constant(skip_param(from, to, "b"), {b}, 0.0);
  }
  uniform("bottleneck_out/w", {b, b}, b);
  constant("bottleneck_out/b", {b}, 0.0);
  uniform("mask/w", {b, m * n}, b);
  constant("mask/b", {m * n}, 0.0);
  uniform("decoder/basis", {n, l}, n);
  return model;
}

std::size_t padded_length(const ModelConfig& config, std::size_t length) {
  const std::size_t hop = config.hop();
  std::size_t target = std::max(length, config.kernel_size);
  return (target + hop - 1) / hop * hop;
}

std::vector<double> reflect_pad(std::span<const double> x, std::size_t padded) {
  if (padded < x.size()) throw InvalidInput("reflect_pad cannot shrink a signal");
  const std::size_t extra = padded - x.size();
  if (extra > 0 && extra + 1 > x.size()) {
    throw InvalidInput("signal too short to reflect-pad by " + std::to_string(extra));
  }
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t j = 0; j < extra; ++j) out.push_back(x[x.size() - 2 - j]);
  return out;
}

Var normalize_instance(Tape& tape, Var x, Var gamma, Var beta) {
  return ag::add(tape, ag::mul(tape, ag::instance_normalize(tape, x), gamma), beta);
}

Var mixture_consistency(Tape& tape, Var estimates, Var mixtures) {
  const double share = 1.0 / static_cast<double>(tape.shape(estimates)[1]);
  Var residual = ag::sub(tape, mixtures, ag::sum_axis(tape, estimates, 1));
  return ag::add(tape, estimates, ag::scale(tape, residual, share));
}

SeparatorGraph build_separator(Tape& tape, const SeparatorModel& model,
                               std::span<const Waveform> mixtures, bool trainable) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  if (mixtures.empty()) throw InvalidInput("separator needs at least one mixture");
  const std::size_t len = mixtures[0].size();
  for (const auto& x : mixtures) {
    if (x.size() != len) throw InvalidInput("batched mixtures must share one length");
    if (x.sample_rate() != cfg.sample_rate) {
      throw InvalidInput("mixture sample rate " + std::to_string(x.sample_rate()) +
                         " Hz does not match the model's " + std::to_string(cfg.sample_rate) + " Hz");
    }
  }
  if (len < cfg.kernel_size) {
    throw InvalidInput("mixture of " + std::to_string(len) + " samples is shorter than the " +
                       std::to_string(cfg.kernel_size) + "-sample encoder kernel");
  }
  const std::size_t batch = mixtures.size();
  const std::size_t padded = padded_length(cfg, len);
  const std::size_t m = cfg.num_outputs, n = cfg.basis_size;

  std::map<std::string, Var> w;
  for (const auto& [name, t] : model.params) {
    Tensor leaf = t;
    leaf.set_requires_grad(trainable);
    w[name] = tape.leaf(name, std::move(leaf));
  }
  auto param = [&](const std::string& name) {
    auto it = w.find(name);
    if (it == w.end()) throw DataError("model is missing parameter " + name);
    return it->second;
  };
  auto dense = [&](Var x, const std::string& prefix) {
    return ag::add(tape, ag::matmul(tape, x, param(prefix + "w")), param(prefix + "b"));
  };

  std::vector<double> padded_batch;
  padded_batch.reserve(batch * padded);
  std::vector<double> mix_batch;
  mix_batch.reserve(batch * len);
  for (const auto& x : mixtures) {
    auto p = reflect_pad(x.samples(), padded);
    padded_batch.insert(padded_batch.end(), p.begin(), p.end());
    mix_batch.insert(mix_batch.end(), x.samples().begin(), x.samples().end());
  }
  Var input = tape.constant(Tensor(Shape{batch, padded}, std::move(padded_batch)));

  SeparatorGraph graph;
  Var coeffs = ag::conv1d(tape, input, param("encoder/basis"), cfg.hop());  // [B, F, N]
  graph.frames = tape.shape(coeffs)[1];
  const std::size_t frames = graph.frames;

  Var h = dense(ag::relu(tape, coeffs), "bottleneck_in/");
  std::vector<Var> outputs;
  outputs.reserve(cfg.num_blocks);
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    Var block_in = i == 0 ? h : outputs.back();
    auto sources = cfg.skip_sources(i);
    for (auto from : sources) {
      block_in = ag::add(tape, block_in, dense(outputs[from], skip_param(from, i, "")));
    }
    graph.block_skip_inputs.push_back(sources);
    const std::size_t dil = cfg.dilation(i);
    graph.block_dilations.push_back(dil);

    Var y = ag::mul(tape, dense(block_in, block_param(i, "dense1/")), param(block_param(i, "scale1")));
    y = ag::prelu(tape, y, param(block_param(i, "prelu1")));
    y = normalize_instance(tape, y, param(block_param(i, "norm1/gamma")),
                           param(block_param(i, "norm1/beta")));
    y = ag::add(tape, ag::depthwise_conv1d(tape, y, param(block_param(i, "dwconv/w")), dil),
                param(block_param(i, "dwconv/b")));
    y = ag::prelu(tape, y, param(block_param(i, "prelu2")));
    y = normalize_instance(tape, y, param(block_param(i, "norm2/gamma")),
                           param(block_param(i, "norm2/beta")));
    y = ag::mul(tape, dense(y, block_param(i, "dense2/")), param(block_param(i, "scale2")));
    outputs.push_back(ag::add(tape, block_in, y));
  }

  Var bottleneck = dense(outputs.back(), "bottleneck_out/");
  Var masks = ag::sigmoid(tape, dense(bottleneck, "mask/"));
  masks = ag::reshape(tape, masks, Shape{batch, frames, m, n});
  graph.masks = masks;
  Var masked = ag::mul(tape, masks, ag::reshape(tape, coeffs, Shape{batch, frames, 1, n}));
  Var waves = ag::conv_transpose1d(tape, masked, param("decoder/basis"), cfg.hop());  // [B, M, Tpad]
  if (padded != len) waves = ag::slice(tape, waves, 2, 0, len);
  if (cfg.mixture_consistency) {
    Var mix = tape.constant(Tensor(Shape{batch, 1, len}, std::move(mix_batch)));
    waves = mixture_consistency(tape, waves, mix);
  }
  graph.output = waves;
  return graph;
}

SourceSet separate(const SeparatorModel& model, const Waveform& mixture) {
  Tape tape;
  std::span<const Waveform> batch(&mixture, 1);
  SeparatorGraph graph = build_separator(tape, model, batch, /*trainable=*/false);
  const Tensor& out = tape.value(graph.output);
  const std::size_t len = mixture.size();
  std::vector<Waveform> sources;
  sources.reserve(model.config.num_outputs);
  for (std::size_t j = 0; j < model.config.num_outputs; ++j) {
    const double* src = out.data() + j * len;
    sources.emplace_back(std::vector<double>(src, src + len), mixture.sample_rate());
  }
  return SourceSet(std::move(sources));
}

}  // namespace mixit
