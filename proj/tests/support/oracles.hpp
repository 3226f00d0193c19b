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

// Independent brute-force references. Nothing here calls the library's
// assignment, enumeration or remix code.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mixit/signal.hpp"

namespace mixit::testing {

// Decodes `code` as M base-K digits, most significant first.
inline std::vector<std::size_t> base_k_digits(std::size_t code, std::size_t K, std::size_t M) {
  std::vector<std::size_t> to(M);
  for (std::size_t m = M; m-- > 0; code /= K) to[m] = code % K;
  return to;
}

inline std::size_t int_pow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp--) r *= base;
  return r;
}

inline std::vector<std::vector<double>> remix_by(const SourceSet& s, const std::vector<std::size_t>& to,
                                                 std::size_t K) {
  std::vector<std::vector<double>> r(K, std::vector<double>(s.length(), 0.0));
  for (std::size_t m = 0; m < s.size(); ++m)
    for (std::size_t t = 0; t < s.length(); ++t) r[to[m]][t] += s[m].samples()[t];
  return r;
}

// min over all K^M assignments of sum_k -SNR_tau(x_k, remix_k).
inline double brute_force_mixit(const SourceSet& x, const SourceSet& s, double snr_max) {
  const std::size_t K = x.size(), M = s.size();
  const double tau = std::pow(10.0, -snr_max / 10.0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t code = 0; code < int_pow(K, M); ++code) {
    const auto r = remix_by(s, base_k_digits(code, K, M), K);
    double loss = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double err = 0.0, ref = 0.0;
      for (std::size_t t = 0; t < x.length(); ++t) {
        const double y = x[k].samples()[t];
        err += (y - r[k][t]) * (y - r[k][t]);
        ref += y * y;
      }
      loss += 10.0 * std::log10(err + tau * ref) - 10.0 * std::log10(ref);
    }
    best = std::min(best, loss);
  }
  return best;
}

inline double snr_loss(const Waveform& y, const Waveform& yh, double snr_max) {
  const double tau = std::pow(10.0, -snr_max / 10.0);
  double err = 0.0, ref = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double d = y.samples()[t] - yh.samples()[t];
    err += d * d;
    ref += y.samples()[t] * y.samples()[t];
  }
  return 10.0 * std::log10(err + tau * ref) - 10.0 * std::log10(ref);
}

// min over all M! permutations.
inline double brute_force_pit(const SourceSet& refs, const SourceSet& est, double snr_max) {
  std::vector<std::size_t> p(refs.size());
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double loss = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) loss += snr_loss(refs[m], est[p[m]], snr_max);
    best = std::min(best, loss);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

inline double si_snr_oracle(const Waveform& y, const Waveform& yh, double cap = 60.0) {
  double yy = 0.0, yyh = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    yy += y.samples()[t] * y.samples()[t];
    yyh += y.samples()[t] * yh.samples()[t];
  }
  const double a = yyh / yy;
  double sig = 0.0, err = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double target = a * y.samples()[t];
    sig += target * target;
    err += (yh.samples()[t] - target) * (yh.samples()[t] - target);
  }
  if (sig == 0.0) return -cap;
  if (err == 0.0) return cap;
  return std::clamp(10.0 * std::log10(sig / err), -cap, cap);
}

// Exhaustive M! alignment maximizing total SI-SNR over the nonzero references.
inline double msi_oracle(const SourceSet& refs, const SourceSet& est, const Waveform& x) {
  std::vector<std::size_t> active;
  for (std::size_t n = 0; n < refs.size(); ++n)
    if (!refs[n].is_silent()) active.push_back(n);
  std::vector<std::size_t> p(est.size());
  std::iota(p.begin(), p.end(), 0);
  double best_total = -std::numeric_limits<double>::infinity(), best = 0.0;
  do {
    double total = 0.0, impr = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double s = si_snr_oracle(refs[active[j]], est[p[j]]);
      total += s;
      impr += s - si_snr_oracle(refs[active[j]], x);
    }
    if (total > best_total) {
      best_total = total;
      best = impr / static_cast<double>(active.size());
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

inline double ss_oracle(const Waveform& ref, const SourceSet& est) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : est) best = std::max(best, si_snr_oracle(ref, e));
  return best;
}

// Assignment by minimum thresholded-SNR loss, then mean SI-SNRi per mixture.
inline double momi_oracle(const SourceSet& xs, const SourceSet& est, const Waveform& mom,
                          double snr_max) {
  const std::size_t K = xs.size(), M = est.size();
  double best_loss = std::numeric_limits<double>::infinity(), best = 0.0;
  for (std::size_t code = 0; code < int_pow(K, M); ++code) {
    const auto r = remix_by(est, base_k_digits(code, K, M), K);
    double loss = 0.0, value = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const Waveform rk(r[k], mom.sample_rate());
      loss += snr_loss(xs[k], rk, snr_max);
      value += si_snr_oracle(xs[k], rk) - si_snr_oracle(xs[k], mom);
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = value / static_cast<double>(K);
    }
  }
  return best;
}

// argmin ||s - raw||^2 subject to sum_m s_m = x, per sample, via the KKT
// system [[2I, 1], [1^T, 0]] [s; lambda] = [2 raw; x].
inline SourceSet projection_oracle(const SourceSet& raw, const Waveform& x) {
  const auto M = static_cast<Eigen::Index>(raw.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(M + 1, M + 1);
  kkt.topLeftCorner(M, M) = 2.0 * Eigen::MatrixXd::Identity(M, M);
  kkt.block(0, M, M, 1).setOnes();
  kkt.block(M, 0, 1, M).setOnes();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  std::vector<std::vector<double>> out(raw.size(), std::vector<double>(raw.length()));
  for (std::size_t t = 0; t < raw.length(); ++t) {
    Eigen::VectorXd rhs(M + 1);
    for (Eigen::Index m = 0; m < M; ++m) rhs(m) = 2.0 * raw[static_cast<std::size_t>(m)].samples()[t];
    rhs(M) = x.samples()[t];
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (Eigen::Index m = 0; m < M; ++m) out[static_cast<std::size_t>(m)][t] = sol(m);
  }
  std::vector<Waveform> w;
  for (auto& v : out) w.emplace_back(std::move(v), x.sample_rate());
  return SourceSet(std::move(w));
}

}  // namespace mixit::testing
