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
#include <span>
#include <vector>

namespace mixit {

inline constexpr int kDefaultSampleRate = 8000;

// Mean power below this (relative to a full-scale amplitude of 1.0) marks a
// waveform as inactive.
inline constexpr double kSilencePowerThreshold = 1e-12;

// Mono, fixed-rate, finite-valued signal.
class Waveform {
 public:
  Waveform() = default;
  Waveform(std::vector<double> samples, int sample_rate);

  static Waveform zeros(std::size_t length, int sample_rate);

  std::size_t size() const { return samples_.size(); }
  int sample_rate() const { return sample_rate_; }
  std::span<const double> samples() const { return samples_; }
  std::span<double> mutable_samples() { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  double energy() const;
  bool is_silent() const;

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kDefaultSampleRate;
};

// Throws InvalidInput unless both waveforms share length and sample rate.
void check_combinable(const Waveform& a, const Waveform& b);

// Ordered collection of equal-length, equal-rate waveforms.
class SourceSet {
 public:
  SourceSet() = default;
  explicit SourceSet(std::vector<Waveform> sources);

  std::size_t size() const { return sources_.size(); }
  bool empty() const { return sources_.empty(); }
  std::size_t length() const { return sources_.empty() ? 0 : sources_.front().size(); }
  int sample_rate() const;

  const Waveform& operator[](std::size_t i) const { return sources_[i]; }
  const std::vector<Waveform>& sources() const { return sources_; }
  auto begin() const { return sources_.begin(); }
  auto end() const { return sources_.end(); }

  // Appends all-zero entries until the set holds `count` sources.
  SourceSet zero_padded(std::size_t count) const;

  bool operator==(const SourceSet&) const = default;

 private:
  std::vector<Waveform> sources_;
};

// Thresholded-SNR loss settings. tau is always derived from snr_max.
class LossConfig {
 public:
  explicit LossConfig(double snr_max_db = 30.0);

  double snr_max() const { return snr_max_; }
  double tau() const { return tau_; }

 private:
  double snr_max_;
  double tau_;
};

inline constexpr double kDefaultSiSnrCap = 60.0;

double energy(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
bool is_silent(std::span<const double> x);

Waveform mix(const SourceSet& sources);

// 10 log10(|y - y_hat|^2 + tau |y|^2) - 10 log10(|y|^2). Lower is better and
// the value never drops below -snr_max.
double neg_thresholded_snr(std::span<const double> y, std::span<const double> y_hat,
                           const LossConfig& cfg);
double neg_thresholded_snr(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg);

// Loss for an estimate aligned to an inactive (all-zero) reference, thresholded
// by the power of the mixture x: 10 log10(|y_hat|^2 + tau |x|^2).
double zero_source_loss(std::span<const double> y_hat, std::span<const double> x,
                        const LossConfig& cfg);
double zero_source_loss(const Waveform& y_hat, const Waveform& x, const LossConfig& cfg);

// Scale-invariant SNR in dB, clamped to [-cap, cap]. Perfect estimates (residual
// below 1e-12 of the scaled reference energy) report +cap; silent estimates -cap.
double si_snr(std::span<const double> y, std::span<const double> y_hat,
              double cap = kDefaultSiSnrCap);
double si_snr(const Waveform& y, const Waveform& y_hat, double cap = kDefaultSiSnrCap);

}  // namespace mixit
