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

namespace mixit {

// Square cost matrix stored row-major; cost(r, c) is the price of giving
// column c to row r.
class CostMatrix {
 public:
  explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

// Minimum-cost perfect matching (Hungarian method with row potentials,
// O(n^3)). Returns col_for_row: row r is matched to column col_for_row[r].
std::vector<std::size_t> solve_linear_assignment(const CostMatrix& cost);

}  // namespace mixit
