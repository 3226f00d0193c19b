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

#include "mixit/autograd/tape.hpp"

#include "mixit/error.hpp"

namespace mixit::autograd {

Var Tape::leaf(const std::string& name, Tensor value) {
  if (leaf_index_.count(name)) throw InvalidInput("duplicate leaf name: " + name);
  Node n;
  n.requires_grad = value.requires_grad();
  n.value = std::move(value);
  n.is_leaf = true;
  n.leaf_name = name;
  nodes_.push_back(std::move(n));
  leaf_index_[name] = nodes_.size() - 1;
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.value.set_requires_grad(false);
  n.is_leaf = true;
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward,
                 const char* op_name) {
  Node n;
  n.value = std::move(value);
  for (auto v : inputs) {
    if (v.id >= nodes_.size()) throw InvalidInput("operation consumes a node not on this tape");
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  n.inputs = std::move(inputs);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  n.op = op_name;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::forward(const TensorMap& leaves) {
  for (const auto& [name, tensor] : leaves) {
    auto it = leaf_index_.find(name);
    if (it == leaf_index_.end()) throw InvalidInput("unbound leaf: " + name);
    Node& n = nodes_[it->second];
    if (tensor.shape() != n.value.shape()) {
      throw InvalidInput("leaf " + name + " expects shape " + shape_string(n.value.shape()) +
                         ", got " + shape_string(tensor.shape()));
    }
    bool rg = n.requires_grad;
    n.value = tensor;
    n.value.set_requires_grad(rg);
  }
  std::vector<const Tensor*> in;
  for (auto& n : nodes_) {
    if (n.is_leaf) continue;
    in.clear();
    for (auto v : n.inputs) in.push_back(&nodes_[v.id].value);
    n.forward(in, n.value);
  }
}

TensorMap Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw InvalidInput("loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw InvalidInput("backward needs a scalar loss, got shape " +
                       shape_string(nodes_[loss.id].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape(), 1.0);

  std::vector<const Tensor*> in;
  std::vector<Tensor*> grad_in;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.is_leaf || !n.requires_grad || n.grad.empty()) continue;
    in.clear();
    grad_in.clear();
    for (auto v : n.inputs) {
      Node& src = nodes_[v.id];
      in.push_back(&src.value);
      if (src.requires_grad) {
        if (src.grad.empty()) src.grad = Tensor(src.value.shape(), 0.0);
        grad_in.push_back(&src.grad);
      } else {
        grad_in.push_back(nullptr);
      }
    }
    n.backward(in, n.value, n.grad, grad_in);
    if (!retain_grads_) n.grad = Tensor();
  }

  TensorMap grads;
  for (const auto& [name, idx] : leaf_index_) {
    const Node& n = nodes_[idx];
    if (!n.requires_grad) continue;
    grads[name] = n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
  }
  return grads;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
}

}  // namespace mixit::autograd
