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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mixit/autograd/tensor.hpp"

namespace mixit::autograd {

// Handle to a node on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

using TensorMap = std::map<std::string, Tensor>;

// Recomputes a node's value from its input values.
using ForwardFn = std::function<void(std::span<const Tensor* const> inputs, Tensor& out)>;
// Accumulates into the gradients of the inputs. grad_inputs[i] is null when
// input i does not need a gradient.
using BackwardFn =
    std::function<void(std::span<const Tensor* const> inputs, const Tensor& out,
                       const Tensor& grad_out, std::span<Tensor* const> grad_inputs)>;

// Define-by-run computation record. Nodes are appended in topological order
// as operations execute; the record can be replayed with rebound leaves.
class Tape {
 public:
  // Named input; gradients are reported for it when `requires_grad` is set
  // on the tensor.
  Var leaf(const std::string& name, Tensor value);
  // Unnamed input that never receives a gradient.
  Var constant(Tensor value);

  Var record(Tensor value, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward,
             const char* op_name);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& shape(Var v) const { return nodes_.at(v.id).value.shape(); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  const char* op_name(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Var>& inputs_of(Var v) const { return nodes_.at(v.id).inputs; }

  // Rebinds the named leaves and re-evaluates every recorded operation.
  // Leaves absent from `leaves` keep their current value.
  void forward(const TensorMap& leaves);

  // Reverse sweep from a scalar loss. Returns gradients of every named leaf
  // that requires one.
  TensorMap backward(Var loss);

  // Gradient of an arbitrary node after backward(); zero-filled if the node
  // received no gradient. Intermediate gradients are only kept when
  // retain_grads is on (the default).
  Tensor grad(Var v) const;
  void set_retain_grads(bool on) { retain_grads_ = on; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> inputs;
    ForwardFn forward;
    BackwardFn backward;
    std::string leaf_name;
    bool is_leaf = false;
    bool requires_grad = false;
    const char* op = "leaf";
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> leaf_index_;
  bool retain_grads_ = true;
};

}  // namespace mixit::autograd
