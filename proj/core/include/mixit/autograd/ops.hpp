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
#include <vector>

#include "mixit/autograd/tape.hpp"

// Differentiable primitives. Every function evaluates eagerly, records the
// node on the tape and returns its handle.
namespace mixit::autograd {

// Elementwise with NumPy-style broadcasting (shapes aligned on the right).
Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);

Var scale(Tape& tape, Var a, double factor);
Var add_scalar(Tape& tape, Var a, double offset);

// Contracts the last axis of `a` with the first axis of the 2-D `b`:
// [..., k] x [k, n] -> [..., n].
Var matmul(Tape& tape, Var a, Var b);

// Strided 1-D convolution of waveforms [B, T] with a filter bank [L, N],
// producing frames [B, F, N] with F = (T - L) / hop + 1.
Var conv1d(Tape& tape, Var x, Var kernel, std::size_t hop);

// Overlap-add synthesis: frames [B, F, G, N] through a basis [N, L] give G
// waveforms per batch item, [B, G, (F - 1) * hop + L].
Var conv_transpose1d(Tape& tape, Var x, Var kernel, std::size_t hop);

// Per-channel dilated convolution over frames with zero "same" padding:
// x [B, F, C], kernel [K, C] (K odd).
Var depthwise_conv1d(Tape& tape, Var x, Var kernel, std::size_t dilation);

Var sigmoid(Tape& tape, Var x);
Var relu(Tape& tape, Var x);
// Per-channel slope on the last axis: alpha has shape [C].
Var prelu(Tape& tape, Var x, Var alpha);

// Zero-mean unit-variance normalization of every (batch, channel) series
// across frames: x [B, F, C], F >= 2.
Var instance_normalize(Tape& tape, Var x, double epsilon = 1e-8);

Var sum(Tape& tape, Var x);
Var mean(Tape& tape, Var x);
// Sum over one axis, keeping it with extent 1.
Var sum_axis(Tape& tape, Var x, std::size_t axis);

Var log10(Tape& tape, Var x);
Var square(Tape& tape, Var x);

Var concat(Tape& tape, const std::vector<Var>& parts, std::size_t axis);
Var slice(Tape& tape, Var x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Tape& tape, Var x, Shape shape);

}  // namespace mixit::autograd
