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

#include "mixit/linear_assignment.hpp"

#include <cmath>
#include <limits>

#include "mixit/error.hpp"

namespace mixit {

std::vector<std::size_t> solve_linear_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (!std::isfinite(cost(r, c))) throw NumericError("assignment cost matrix is not finite");
    }
  }

  // 1-based arrays; index 0 is the virtual root of each augmenting path.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);

  for (std::size_t r = 1; r <= n; ++r) {
    row_of_col[0] = r;
    std::size_t col = 0;
    std::vector<double> min_slack(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col] = true;
      const std::size_t row = row_of_col[col];
      double delta = kInf;
      std::size_t next = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        double slack = cost(row - 1, c - 1) - row_pot[row] - col_pot[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          next = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          row_pot[row_of_col[c]] += delta;
          col_pot[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col = next;
    } while (row_of_col[col] != 0);
    do {
      std::size_t prev = way[col];
      row_of_col[col] = row_of_col[prev];
      col = prev;
    } while (col != 0);
  }

  std::vector<std::size_t> col_for_row(n);
  for (std::size_t c = 1; c <= n; ++c) col_for_row[row_of_col[c] - 1] = c - 1;
  return col_for_row;
}

}  // namespace mixit
