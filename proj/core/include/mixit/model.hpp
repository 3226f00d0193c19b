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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixit/autograd/ops.hpp"
#include "mixit/autograd/tape.hpp"
#include "mixit/signal.hpp"

namespace mixit {

// Shape of the mask-based time-domain separator (learned encoder, TDCN++
// mask network, learned decoder, mixture-consistency projection).
struct ModelConfig {
  std::size_t num_outputs = 4;           // M
  std::size_t basis_size = 64;           // N
  std::size_t kernel_size = 16;          // L, hop is L / 2
  std::size_t num_blocks = 8;
  std::size_t bottleneck_channels = 64;
  std::size_t conv_channels = 128;
  std::size_t depthwise_kernel = 3;
  std::size_t dilation_period = 4;       // dilation of block i is 2^(i mod period)
  // Extra (from_block, to_block) skip-residual edges; i -> i+1 is implicit.
  std::vector<std::pair<std::size_t, std::size_t>> skip_residual_edges = {{0, 4}};
  int sample_rate = kDefaultSampleRate;
  bool mixture_consistency = true;

  // CPU-sized default that keeps every architectural mechanism.
  static ModelConfig desk_scale();
  // Full 32-block configuration (N = 256, L = 20 at 8 kHz or 40 at 16 kHz).
  static ModelConfig reference(int sample_rate);

  void validate() const;
  std::size_t hop() const { return kernel_size / 2; }
  std::size_t dilation(std::size_t block) const;
  // Skip edges (including nothing implicit) that feed into `block`.
  std::vector<std::size_t> skip_sources(std::size_t block) const;

  bool operator==(const ModelConfig&) const = default;
};

// Model parameters by name. Names are stable and used as checkpoint keys.
struct SeparatorModel {
  ModelConfig config;
  autograd::TensorMap params;

  std::size_t parameter_count() const;
};

// Deterministic initialization: dense/conv weights uniform in +-sqrt(1/fan_in),
// biases 0, PReLU slopes 0.25, norm scale 1 / bias 0, first-dense scales 1 and
// second-dense scale of block i set to 0.9^i.
SeparatorModel init_parameters(const ModelConfig& config, std::uint64_t seed);

std::string block_param(std::size_t block, const std::string& leaf);
std::string skip_param(std::size_t from, std::size_t to, const std::string& leaf);

// Number of samples after reflect-padding `length` to a whole number of hops.
std::size_t padded_length(const ModelConfig& config, std::size_t length);
std::vector<double> reflect_pad(std::span<const double> x, std::size_t padded);

// Handles produced by one batched forward pass.
struct SeparatorGraph {
  autograd::Var output;  // [B, M, T], consistent when enabled
  autograd::Var masks;   // [B, F, M, N], values in (0, 1)
  std::vector<std::size_t> block_dilations;
  std::vector<std::vector<std::size_t>> block_skip_inputs;
  std::size_t frames = 0;
};

// Records the separator on the tape for a batch of equal-length mixtures.
// Every parameter becomes a tape leaf named after it, so Tape::backward
// returns gradients keyed like SeparatorModel::params.
SeparatorGraph build_separator(autograd::Tape& tape, const SeparatorModel& model,
                               std::span<const Waveform> mixtures, bool trainable);

// Inference on one mixture.
SourceSet separate(const SeparatorModel& model, const Waveform& mixture);

// Per-channel normalization across frames followed by a trainable per-channel
// scale and bias. x is [B, F, C]; gamma and beta are [C].
autograd::Var normalize_instance(autograd::Tape& tape, autograd::Var x, autograd::Var gamma,
                                 autograd::Var beta);

// Differentiable form of the mixture-consistency projection: estimates
// [B, M, T], mixtures [B, 1, T].
autograd::Var mixture_consistency(autograd::Tape& tape, autograd::Var estimates,
                                  autograd::Var mixtures);

}  // namespace mixit
