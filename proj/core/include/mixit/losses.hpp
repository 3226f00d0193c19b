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

#include "mixit/assignment.hpp"
#include "mixit/autograd/tape.hpp"
#include "mixit/signal.hpp"

// Differentiable forms of the assignment losses. The discrete assignment is
// chosen on the numeric values first and then held fixed, so the gradient is
// that of the fixed best-assignment loss.
namespace mixit {

// Sum over the K rows of neg_thresholded_snr(x_i, [A est]_i). est is [M, T].
autograd::Var graph_mixit_loss(autograd::Tape& tape, autograd::Var estimates,
                               const SourceSet& mixtures, const MixingMatrix& a,
                               const LossConfig& cfg);

// Sum over slots of the per-pair PIT loss under permutation p; inactive
// references follow `options` exactly like pit_loss.
autograd::Var graph_pit_loss(autograd::Tape& tape, autograd::Var estimates,
                             const SourceSet& references, const PermutationMatrix& p,
                             const LossConfig& cfg, const PitOptions& options = {});

// Numeric estimates of one [M, T] node as a SourceSet.
SourceSet estimates_of(const autograd::Tape& tape, autograd::Var estimates, int sample_rate);

}  // namespace mixit
