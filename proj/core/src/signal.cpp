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

#include "mixit/signal.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "mixit/error.hpp"

namespace mixit {

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (samples_.empty()) throw InvalidInput("waveform must have at least one sample");
  if (sample_rate_ <= 0) throw InvalidInput("sample rate must be positive");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw InvalidInput("waveform contains non-finite samples");
  }
}

Waveform Waveform::zeros(std::size_t length, int sample_rate) {
  return Waveform(std::vector<double>(length, 0.0), sample_rate);
}

double Waveform::energy() const { return mixit::energy(samples_); }

bool Waveform::is_silent() const { return mixit::is_silent(samples_); }

void check_combinable(const Waveform& a, const Waveform& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("waveform length mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
  if (a.sample_rate() != b.sample_rate()) {
    throw InvalidInput("sample rate mismatch: " + std::to_string(a.sample_rate()) + " vs " +
                       std::to_string(b.sample_rate()));
  }
}

SourceSet::SourceSet(std::vector<Waveform> sources) : sources_(std::move(sources)) {
  if (sources_.empty()) throw InvalidInput("source set must contain at least one waveform");
  for (const auto& s : sources_) check_combinable(sources_.front(), s);
}

int SourceSet::sample_rate() const {
  return sources_.empty() ? kDefaultSampleRate : sources_.front().sample_rate();
}

SourceSet SourceSet::zero_padded(std::size_t count) const {
  if (count < sources_.size()) throw InvalidInput("cannot zero-pad to fewer sources");
  std::vector<Waveform> out = sources_;
  while (out.size() < count) out.push_back(Waveform::zeros(length(), sample_rate()));
  return SourceSet(std::move(out));
}

LossConfig::LossConfig(double snr_max_db) : snr_max_(snr_max_db) {
  if (!(snr_max_db > 0.0) || !std::isfinite(snr_max_db)) {
    throw InvalidInput("snr_max must be a positive finite dB value");
  }
  tau_ = std::pow(10.0, -snr_max_db / 10.0);
}

double energy(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool is_silent(std::span<const double> x) {
  if (x.empty()) return true;
  return energy(x) / static_cast<double>(x.size()) < kSilencePowerThreshold;
}

Waveform mix(const SourceSet& sources) {
  if (sources.empty()) throw InvalidInput("cannot mix an empty source set");
  std::vector<double> out(sources.length(), 0.0);
  for (const auto& s : sources) {
    auto v = s.samples();
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += v[t];
  }
  return Waveform(std::move(out), sources.sample_rate());
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("signal length mismatch: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
  if (a.empty()) throw InvalidInput("signals must be non-empty");
}

}  // namespace

double neg_thresholded_snr(std::span<const double> y, std::span<const double> y_hat,
                           const LossConfig& cfg) {
  check_lengths(y, y_hat);
  if (is_silent(y)) {
    throw InvalidInput("reference has zero energy; score inactive slots with zero_source_loss");
  }
  // Evaluated as a ratio so a perfect estimate lands exactly on -snr_max.
  double ratio = squared_distance(y, y_hat) / energy(y) + cfg.tau();
  assert(ratio > 0.0);
  return 10.0 * std::log10(ratio);
}

double neg_thresholded_snr(const Waveform& y, const Waveform& y_hat, const LossConfig& cfg) {
  check_combinable(y, y_hat);
  return neg_thresholded_snr(y.samples(), y_hat.samples(), cfg);
}

double zero_source_loss(std::span<const double> y_hat, std::span<const double> x,
                        const LossConfig& cfg) {
  check_lengths(y_hat, x);
  if (is_silent(x)) throw InvalidInput("zero-source loss needs a mixture with nonzero energy");
  double arg = energy(y_hat) + cfg.tau() * energy(x);
  assert(arg > 0.0);
  return 10.0 * std::log10(arg);
}

double zero_source_loss(const Waveform& y_hat, const Waveform& x, const LossConfig& cfg) {
  check_combinable(y_hat, x);
  return zero_source_loss(y_hat.samples(), x.samples(), cfg);
}

double si_snr(std::span<const double> y, std::span<const double> y_hat, double cap) {
  check_lengths(y, y_hat);
  if (is_silent(y)) throw InvalidInput("SI-SNR is undefined for a zero-energy reference");
  if (is_silent(y_hat)) return -cap;
  double ref = energy(y);
  double alpha = dot(y, y_hat) / ref;
  double signal = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double target = alpha * y[i];
    double err = target - y_hat[i];
    signal += target * target;
    residual += err * err;
  }
  if (residual <= 1e-12 * signal) return cap;
  if (signal <= 0.0) return -cap;
  double value = 10.0 * std::log10(signal / residual);
  return std::clamp(value, -cap, cap);
}

double si_snr(const Waveform& y, const Waveform& y_hat, double cap) {
  check_combinable(y, y_hat);
  return si_snr(y.samples(), y_hat.samples(), cap);
}

}  // namespace mixit
