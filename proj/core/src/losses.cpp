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

#include "mixit/losses.hpp"

#include <cmath>
#include <vector>

#include "mixit/autograd/ops.hpp"
#include "mixit/error.hpp"

namespace mixit {

using autograd::Shape;
using autograd::Tape;
using autograd::Tensor;
using autograd::Var;

namespace {

// sum_s w_s * (10 log10(|t_s - y_s|^2 + c_s) - d_s), with y [S, T] already
// routed to the target order.
Var slot_loss(Tape& tape, Var routed, const Tensor& targets, const std::vector<double>& offset,
              const std::vector<double>& subtract, const std::vector<double>& weight) {
  const std::size_t S = offset.size();
  Var diff = autograd::sub(tape, tape.constant(targets), routed);
  Var err = autograd::sum_axis(tape, autograd::square(tape, diff), 1);  // [S, 1]
  Var floored = autograd::add(tape, err, tape.constant(Tensor(Shape{S, 1}, offset)));
  Var db = autograd::scale(tape, autograd::log10(tape, floored), 10.0);
  Var weighted = autograd::mul(tape, db, tape.constant(Tensor(Shape{S, 1}, weight)));
  double constant = 0.0;
  for (std::size_t s = 0; s < S; ++s) constant += weight[s] * subtract[s];
  return autograd::add_scalar(tape, autograd::sum(tape, weighted), -constant);
}

Tensor stack(const SourceSet& set) {
  const std::size_t S = set.size(), T = set.length();
  Tensor out(Shape{S, T});
  for (std::size_t s = 0; s < S; ++s) {
    auto src = set[s].samples();
    std::copy(src.begin(), src.end(), out.data() + s * T);
  }
  return out;
}

void check_estimates(const Tape& tape, Var est, std::size_t M, std::size_t T) {
  const Shape& sh = tape.shape(est);
  if (sh.size() != 2 || sh[0] != M || sh[1] != T) {
    throw InvalidInput("estimates must be [" + std::to_string(M) + ", " + std::to_string(T) +
                       "], got " + autograd::shape_string(sh));
  }
}

}  // namespace

Var graph_mixit_loss(Tape& tape, Var estimates, const SourceSet& mixtures, const MixingMatrix& a,
                     const LossConfig& cfg) {
  const std::size_t K = mixtures.size(), M = a.num_sources(), T = mixtures.length();
  if (a.num_mixtures() != K) throw InvalidInput("mixing matrix rows differ from mixture count");
  check_estimates(tape, estimates, M, T);
  Tensor routing(Shape{K, M});
  for (std::size_t m = 0; m < M; ++m) routing[a.mixture_of(m) * M + m] = 1.0;
  Var remix = autograd::matmul(tape, tape.constant(std::move(routing)), estimates);
  std::vector<double> offset(K), subtract(K), weight(K, 1.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double e = mixtures[k].energy();
    if (e <= 0.0) throw InvalidInput("MixIT target mixture has zero energy");
    offset[k] = cfg.tau() * e;
    subtract[k] = 10.0 * std::log10(e);
  }
  return slot_loss(tape, remix, stack(mixtures), offset, subtract, weight);
}

Var graph_pit_loss(Tape& tape, Var estimates, const SourceSet& references,
                   const PermutationMatrix& p, const LossConfig& cfg, const PitOptions& options) {
  const std::size_t M = references.size(), T = references.length();
  if (p.size() != M) throw InvalidInput("permutation size differs from reference count");
  check_estimates(tape, estimates, M, T);
  Tensor routing(Shape{M, M});
  for (std::size_t m = 0; m < M; ++m) routing[m * M + p.source_for_slot(m)] = 1.0;
  Var routed = autograd::matmul(tape, tape.constant(std::move(routing)), estimates);
  const double mix_energy =
      options.mixture ? options.mixture->energy() : mix(references).energy();
  std::vector<double> offset(M), subtract(M), weight(M, 1.0);
  for (std::size_t m = 0; m < M; ++m) {
    if (!references[m].is_silent()) {
      const double e = references[m].energy();
      offset[m] = cfg.tau() * e;
      subtract[m] = 10.0 * std::log10(e);
    } else {
      // Silent references compare against zero, so |t - y|^2 = |y|^2.
      offset[m] = cfg.tau() * mix_energy;
      subtract[m] = 0.0;
      if (!options.zero_source_loss) {
        weight[m] = 0.0;
        if (offset[m] <= 0.0) offset[m] = 1.0;  // keeps the masked log finite
      } else if (mix_energy <= 0.0) {
        throw InvalidInput("zero-source loss needs a mixture with nonzero energy");
      }
    }
  }
  return slot_loss(tape, routed, stack(references), offset, subtract, weight);
}

SourceSet estimates_of(const Tape& tape, Var estimates, int sample_rate) {
  const Tensor& v = tape.value(estimates);
  if (v.rank() != 2) throw InvalidInput("estimates must be 2-D");
  const std::size_t M = v.dim(0), T = v.dim(1);
  std::vector<Waveform> out;
  out.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    out.emplace_back(std::vector<double>(v.data() + m * T, v.data() + (m + 1) * T), sample_rate);
  }
  return SourceSet(std::move(out));
}

}  // namespace mixit
