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

#include "mixit/autograd/adam.hpp"

#include <cmath>

#include "mixit/error.hpp"

namespace mixit::autograd {

void adam_step(TensorMap& params, const TensorMap& grads, AdamState& state) {
  if (params.size() != grads.size()) throw InvalidInput("adam: parameter and gradient sets differ");
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw InvalidInput("adam: no gradient for " + name);
    if (it->second.shape() != p.shape()) {
      throw InvalidInput("adam: gradient shape mismatch for " + name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape(), 0.0);
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape(), 0.0);
    if (m_it->second.shape() != p.shape() || v_it->second.shape() != p.shape()) {
      throw InvalidInput("adam: moment shape mismatch for " + name);
    }
    double* w = p.data();
    double* m = m_it->second.data();
    double* v = v_it->second.data();
    const double* gd = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gd[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gd[i] * gd[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace mixit::autograd
