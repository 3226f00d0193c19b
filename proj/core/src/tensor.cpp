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

#include "mixit/autograd/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "mixit/error.hpp"

namespace mixit::autograd {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty()) throw InvalidInput("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw InvalidInput("tensor dimensions must be positive: " + shape_string(shape_));
  }
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (shape_.empty()) throw InvalidInput("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw InvalidInput("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (values_.size() != shape_size(shape_)) {
    throw InvalidInput("tensor has " + std::to_string(values_.size()) + " values for shape " +
                       shape_string(shape_));
  }
}

double Tensor::item() const {
  if (values_.size() != 1) throw InvalidInput("item() needs a single-element tensor");
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw InvalidInput("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.values_ = values_;
  out.requires_grad_ = requires_grad_;
  return out;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace mixit::autograd
