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

#include "mixit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "mixit/error.hpp"
#include "mixit/wav.hpp"

namespace mixit {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

// Marsaglia polar method.
double Rng::normal() {
  if (spare_normal_) {
    double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  double u, v, s;
  do {
    u = uniform(-1.0, 1.0);
    v = uniform(-1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  return u * f;
}

// Lemire's multiply-shift with rejection: unbiased.
std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidInput("Rng::index on an empty range");
  const auto bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) {
      return static_cast<std::size_t>(m >> 64);
    }
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

struct Band {
  double lo, hi;
};

Band resolve_band(SourceKind kind, int sr, const ToySourceOptions& opt) {
  Band b{};
  switch (kind) {
    case SourceKind::kTonal: b = {100.0, 1200.0}; break;
    case SourceKind::kModulatedNoise: b = {1800.0, 3600.0}; break;
    case SourceKind::kTransient: b = {300.0, 3000.0}; break;
  }
  if (opt.band_low_hz > 0.0) b.lo = opt.band_low_hz;
  if (opt.band_high_hz > 0.0) b.hi = opt.band_high_hz;
  const double nyq = 0.45 * sr;
  b.hi = std::min(b.hi, nyq);
  if (!(b.lo > 0.0 && b.lo < b.hi)) {
    throw InvalidInput("invalid source band for sample rate " + std::to_string(sr));
  }
  return b;
}

// Blackman-windowed sinc band-pass.
std::vector<double> bandpass_taps(double lo, double hi, int sr, std::size_t taps) {
  std::vector<double> h(taps);
  const double c = 0.5 * static_cast<double>(taps - 1);
  const double f1 = lo / sr, f2 = hi / sr;
  const double pi = std::numbers::pi;
  for (std::size_t n = 0; n < taps; ++n) {
    double t = static_cast<double>(n) - c;
    double ideal = t == 0.0 ? 2.0 * (f2 - f1)
                            : (std::sin(2.0 * pi * f2 * t) - std::sin(2.0 * pi * f1 * t)) / (pi * t);
    double w = 0.42 - 0.5 * std::cos(2.0 * pi * n / (taps - 1)) +
               0.08 * std::cos(4.0 * pi * n / (taps - 1));
    h[n] = ideal * w;
  }
  return h;
}

std::vector<double> synth_tonal(std::size_t T, int sr, Band band, Rng& rng) {
  const double pi = std::numbers::pi;
  const double f0 = rng.uniform(band.lo, std::max(band.lo, band.hi / 2.0));
  const double env_rate = rng.uniform(0.5, 3.0);
  const double env_phase = rng.uniform(0.0, 2.0 * pi);
  std::vector<double> out(T, 0.0);
  for (int k = 1; k <= 8 && k * f0 <= band.hi; ++k) {
    const double amp = 1.0 / k;
    const double phase = rng.uniform(0.0, 2.0 * pi);
    const double w = 2.0 * pi * k * f0 / sr;
    for (std::size_t n = 0; n < T; ++n) out[n] += amp * std::sin(w * n + phase);
  }
  for (std::size_t n = 0; n < T; ++n) {
    double t = static_cast<double>(n) / sr;
    out[n] *= 0.6 + 0.4 * std::sin(2.0 * pi * env_rate * t + env_phase);
  }
  return out;
}

std::vector<double> synth_modnoise(std::size_t T, int sr, Band band, Rng& rng) {
  const double pi = std::numbers::pi;
  const auto h = bandpass_taps(band.lo, band.hi, sr, 129);
  const std::size_t pad = h.size() - 1;
  std::vector<double> white(T + pad);
  for (double& v : white) v = rng.normal();
  const double mod_rate = rng.uniform(1.0, 4.0);
  const double mod_phase = rng.uniform(0.0, 2.0 * pi);
  std::vector<double> out(T, 0.0);
  for (std::size_t n = 0; n < T; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * white[n + pad - k];
    double t = static_cast<double>(n) / sr;
    out[n] = acc * (0.6 + 0.4 * std::sin(2.0 * pi * mod_rate * t + mod_phase));
  }
  return out;
}

std::vector<double> synth_transient(std::size_t T, int sr, Band band, Rng& rng) {
  const double pi = std::numbers::pi;
  std::vector<double> out(T, 0.0);
  const double duration = static_cast<double>(T) / sr;
  const std::size_t count = 1 + static_cast<std::size_t>(4.0 * duration * rng.uniform(0.5, 1.5));
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t onset = rng.index(T);
    const double f = rng.uniform(band.lo, band.hi);
    const double decay = rng.uniform(0.02, 0.06) * sr;
    const double amp = rng.uniform(0.5, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * pi);
    for (std::size_t n = onset; n < T; ++n) {
      double d = static_cast<double>(n - onset);
      if (d > 8.0 * decay) break;
      out[n] += amp * std::exp(-d / decay) * std::sin(2.0 * pi * f * d / sr + phase);
    }
  }
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

SourceKind parse_source_kind(const std::string& name) {
  if (name == "tonal") return SourceKind::kTonal;
  if (name == "modulated_noise") return SourceKind::kModulatedNoise;
  if (name == "transient") return SourceKind::kTransient;
  throw InvalidInput("unknown source kind '" + name + "'");
}

std::string source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kTonal: return "tonal";
    case SourceKind::kModulatedNoise: return "modulated_noise";
    case SourceKind::kTransient: return "transient";
  }
  return "unknown";
}

Waveform synth_toy_source(SourceKind kind, double duration_s, int sample_rate, Rng& rng,
                          const ToySourceOptions& options) {
  if (!(duration_s > 0.0) || sample_rate <= 0) {
    throw InvalidInput("source duration and sample rate must be positive");
  }
  const auto T = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (T == 0) throw InvalidInput("source duration shorter than one sample");
  const Band band = resolve_band(kind, sample_rate, options);
  std::vector<double> x;
  switch (kind) {
    case SourceKind::kTonal: x = synth_tonal(T, sample_rate, band, rng); break;
    case SourceKind::kModulatedNoise: x = synth_modnoise(T, sample_rate, band, rng); break;
    case SourceKind::kTransient: x = synth_transient(T, sample_rate, band, rng); break;
  }
  const double gain_db = rng.uniform(-options.level_range_db, options.level_range_db);
  const double rms = std::sqrt(energy(x) / static_cast<double>(T));
  if (rms > 0.0) {
    const double target = std::pow(10.0, (options.base_level_db + gain_db) / 20.0);
    for (double& v : x) v *= target / rms;
  }
  return Waveform(std::move(x), sample_rate);
}

std::vector<Waveform> synth_toy_sources(SourceKind kind, std::size_t count, double duration_s,
                                        int sample_rate, std::uint64_t seed,
                                        const ToySourceOptions& options) {
  if (count == 0) throw InvalidInput("source count must be positive");
  std::vector<Waveform> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, 0x70, i));
    out.push_back(synth_toy_source(kind, duration_s, sample_rate, rng, options));
  }
  return out;
}

TrainExample TrainExample::make_supervised(SourceSet references, std::size_t true_source_count,
                                           std::string split) {
  if (references.empty()) throw InvalidInput("supervised example needs references");
  if (true_source_count > references.size()) {
    throw InvalidInput("true_source_count exceeds reference slots");
  }
  TrainExample ex{mix(references), std::nullopt, true_source_count, std::move(split), {}};
  ex.references = std::move(references);
  return ex;
}

TrainExample TrainExample::make_unsupervised(Waveform mixture, std::string split) {
  return TrainExample{std::move(mixture), std::nullopt, 0, std::move(split), {}};
}

SourceSet MomExample::component_mixtures() const {
  std::vector<Waveform> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.mixture);
  return SourceSet(std::move(out));
}

std::optional<SourceSet> MomExample::references(std::size_t num_outputs) const {
  std::vector<Waveform> refs;
  for (const auto& c : components) {
    if (!c.references) return std::nullopt;
    for (const auto& r : *c.references) refs.push_back(r);
  }
  if (refs.size() > num_outputs) {
    throw InvalidInput("MoM carries " + std::to_string(refs.size()) +
                       " reference slots but the model has " + std::to_string(num_outputs) +
                       " outputs");
  }
  return SourceSet(std::move(refs)).zero_padded(num_outputs);
}

std::size_t MomExample::true_source_count() const {
  std::size_t n = 0;
  for (const auto& c : components) n += c.true_source_count;
  return n;
}

EpochSampler::EpochSampler(std::size_t population, std::uint64_t seed)
    : order_(population), rng_(seed) {
  if (population == 0) throw InvalidInput("cannot sample from an empty corpus");
  for (std::size_t i = 0; i < population; ++i) order_[i] = i;
  shuffle(order_, rng_);
}

void EpochSampler::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  shuffle(order_, rng_);
  cursor_ = 0;
  ++epoch_;
}

std::vector<std::size_t> EpochSampler::draw(std::size_t group) {
  if (group == 0 || group > order_.size()) {
    throw InvalidInput("cannot draw " + std::to_string(group) + " items from a corpus of " +
                       std::to_string(order_.size()));
  }
  if (order_.size() - cursor_ < group) reshuffle();
  std::vector<std::size_t> out(order_.begin() + cursor_, order_.begin() + cursor_ + group);
  cursor_ += group;
  return out;
}

Waveform crop(const Waveform& wave, std::size_t length, std::size_t offset) {
  if (length == 0) throw InvalidInput("crop length must be positive");
  std::vector<double> out(length, 0.0);
  auto s = wave.samples();
  for (std::size_t i = 0; i < length && offset + i < s.size(); ++i) out[i] = s[offset + i];
  return Waveform(std::move(out), wave.sample_rate());
}

TrainExample crop_example(const TrainExample& example, std::size_t length, Rng& rng) {
  const std::size_t T = example.mixture.size();
  const std::size_t offset = T > length ? rng.index(T - length + 1) : 0;
  if (T == length) return example;
  if (!example.references) {
    TrainExample out = example;
    out.mixture = crop(example.mixture, length, offset);
    return out;
  }
  std::vector<Waveform> refs;
  for (const auto& r : *example.references) refs.push_back(crop(r, length, offset));
  TrainExample out =
      TrainExample::make_supervised(SourceSet(std::move(refs)), 0, example.split);
  // A crop can cut an active source down to silence.
  for (const auto& r : *out.references) out.true_source_count += r.is_silent() ? 0 : 1;
  out.source_kinds = example.source_kinds;
  return out;
}

namespace {

TrainExample zeroed_like(const TrainExample& ex) {
  const std::size_t T = ex.mixture.size();
  const int sr = ex.mixture.sample_rate();
  std::vector<Waveform> refs(ex.references->size(), Waveform::zeros(T, sr));
  TrainExample out = TrainExample::make_supervised(SourceSet(std::move(refs)), 0, ex.split);
  return out;
}

}  // namespace

MomExample make_mom(const std::vector<TrainExample>& corpus, EpochSampler& sampler,
                    const BatchSpec& spec, Rng& rng, std::size_t crop_length) {
  spec.validate();
  if (sampler.population() != corpus.size()) {
    throw InvalidInput("sampler population does not match corpus size");
  }
  const auto picks = sampler.draw(spec.mixtures_per_mom);
  MomExample mom;
  bool all_supervised = true;
  for (std::size_t idx : picks) {
    TrainExample c = crop_length ? crop_example(corpus[idx], crop_length, rng) : corpus[idx];
    all_supervised = all_supervised && c.supervised();
    mom.components.push_back(std::move(c));
  }
  for (std::size_t i = 1; i < mom.components.size(); ++i) {
    check_combinable(mom.components[0].mixture, mom.components[i].mixture);
  }
  // Draw unconditionally so the stream does not depend on the corpus type.
  const double u = rng.uniform();
  const std::size_t which = rng.index(mom.components.size());
  if (all_supervised && u < spec.zero_probability) {
    mom.components[which] = zeroed_like(mom.components[which]);
    mom.zeroed_component = which;
  }
  mom.mom = mix(mom.component_mixtures());
  return mom;
}

MomExample make_enhancement_pair(const std::vector<TrainExample>& speech_noise,
                                 EpochSampler& speech_sampler,
                                 const std::vector<TrainExample>& noise_only,
                                 EpochSampler& noise_sampler, Rng& rng,
                                 std::size_t crop_length) {
  if (speech_noise.empty() || noise_only.empty()) {
    throw InvalidInput("enhancement pairing needs non-empty speech_plus_noise and noise_only splits");
  }
  for (const auto& ex : speech_noise) {
    if (ex.split != kSplitSpeechPlusNoise) {
      throw InvalidInput("first corpus must be tagged '" + std::string(kSplitSpeechPlusNoise) +
                         "', found '" + ex.split + "'");
    }
  }
  for (const auto& ex : noise_only) {
    if (ex.split != kSplitNoiseOnly) {
      throw InvalidInput("second corpus must be tagged '" + std::string(kSplitNoiseOnly) +
                         "', found '" + ex.split + "'");
    }
  }
  const auto& x1 = speech_noise[speech_sampler.draw(1)[0]];
  const auto& x2 = noise_only[noise_sampler.draw(1)[0]];
  MomExample mom;
  mom.components.push_back(crop_length ? crop_example(x1, crop_length, rng) : x1);
  mom.components.push_back(crop_length ? crop_example(x2, crop_length, rng) : x2);
  check_combinable(mom.components[0].mixture, mom.components[1].mixture);
  mom.mom = mix(mom.component_mixtures());
  mom.constraint = AssignmentConstraint::speech_enhancement();
  return mom;
}

DynamicRemixer::DynamicRemixer(std::vector<Waveform> pool, std::size_t num_sources,
                               std::uint64_t seed)
    : pool_(std::move(pool)), num_sources_(num_sources), sampler_(std::max<std::size_t>(pool_.size(), 1), seed) {
  if (num_sources_ == 0) throw InvalidInput("dynamic remix needs at least one source");
  if (pool_.size() < num_sources_) {
    throw InvalidInput("source pool (" + std::to_string(pool_.size()) +
                       ") smaller than num_sources (" + std::to_string(num_sources_) + ")");
  }
}

TrainExample DynamicRemixer::next() {
  last_ = sampler_.draw(num_sources_);
  std::vector<Waveform> refs;
  for (std::size_t i : last_) refs.push_back(pool_[i]);
  return TrainExample::make_supervised(SourceSet(std::move(refs)), num_sources_);
}

TrainExample dynamic_remix(const std::vector<Waveform>& pool, std::size_t num_sources,
                           std::uint64_t seed) {
  return DynamicRemixer(pool, num_sources, seed).next();
}

TrainExample make_toy_example(const ToyCorpusOptions& options, std::size_t index) {
  if (options.kinds.empty()) throw InvalidInput("toy corpus needs at least one source kind");
  if (options.min_sources == 0 || options.min_sources > options.max_sources) {
    throw InvalidInput("invalid sources-per-mixture range");
  }
  Rng rng(derive_seed(options.seed, 0x10, index));
  const std::size_t n =
      options.min_sources + rng.index(options.max_sources - options.min_sources + 1);
  const std::size_t start = options.shuffle_kinds ? rng.index(options.kinds.size()) : 0;
  const auto T = static_cast<std::size_t>(std::llround(options.duration_s * options.sample_rate));
  std::vector<Waveform> refs;
  std::vector<SourceKind> kinds;
  for (std::size_t j = 0; j < options.max_sources; ++j) {
    if (j < n) {
      SourceKind k = options.kinds[(start + j) % options.kinds.size()];
      refs.push_back(synth_toy_source(k, options.duration_s, options.sample_rate, rng,
                                      options.source_options));
      kinds.push_back(k);
    } else {
      refs.push_back(Waveform::zeros(T, options.sample_rate));
    }
  }
  TrainExample ex = TrainExample::make_supervised(SourceSet(std::move(refs)), n, options.split);
  ex.source_kinds = std::move(kinds);
  return ex;
}

std::vector<TrainExample> make_toy_corpus(const ToyCorpusOptions& options) {
  const std::size_t count = options.num_mixtures;
  std::vector<std::optional<TrainExample>> slots(count);
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) slots[i] = make_toy_example(options, i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < count; i += workers) slots[i] = make_toy_example(options, i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<TrainExample> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<TrainExample>& corpus, bool include_refs,
                                   const std::string& manifest_name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<ManifestRecord> records;
  records.reserve(corpus.size());
  char name[64];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    ManifestRecord rec;
    std::snprintf(name, sizeof(name), "mix_%05zu.wav", i);
    rec.path = name;
    rec.split = ex.split;
    rec.duration_s = static_cast<double>(ex.mixture.size()) / ex.mixture.sample_rate();
    write_wav(dir / rec.path, ex.mixture);
    if (include_refs && ex.references) {
      std::vector<std::string> refs;
      for (std::size_t j = 0; j < ex.references->size(); ++j) {
        const auto& r = (*ex.references)[j];
        if (r.is_silent()) continue;
        std::snprintf(name, sizeof(name), "mix_%05zu_src%zu.wav", i, refs.size());
        refs.emplace_back(name);
        write_wav(dir / refs.back(), r);
      }
      rec.refs = std::move(refs);
    }
    records.push_back(std::move(rec));
  }
  auto manifest = dir / manifest_name;
  write_manifest(manifest, records);
  return manifest;
}

std::vector<TrainExample> load_corpus(const std::filesystem::path& manifest_path,
                                      int sample_rate, bool load_refs) {
  const auto records = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  auto check_rate = [&](const Waveform& w, const std::string& p) {
    if (sample_rate > 0 && w.sample_rate() != sample_rate) {
      throw DataError(p + ": sample rate " + std::to_string(w.sample_rate()) +
                      " Hz does not match configured " + std::to_string(sample_rate) + " Hz");
    }
  };
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    Waveform mixture = read_wav(resolve(rec.path));
    check_rate(mixture, rec.path);
    if (!load_refs || !rec.refs || rec.refs->empty()) {
      out.push_back(TrainExample::make_unsupervised(std::move(mixture), rec.split));
      continue;
    }
    std::vector<Waveform> refs;
    for (const auto& r : *rec.refs) {
      Waveform w = read_wav(resolve(r));
      check_rate(w, r);
      if (w.size() != mixture.size()) {
        throw DataError(r + ": reference length differs from mixture " + rec.path);
      }
      refs.push_back(std::move(w));
    }
    const std::size_t n = refs.size();
    TrainExample ex = TrainExample::make_supervised(SourceSet(std::move(refs)), n, rec.split);
    // Stored mixtures are quantized independently of their references; allow
    // one 16-bit step per file.
    double worst = 0.0;
    for (std::size_t t = 0; t < mixture.size(); ++t) {
      worst = std::max(worst, std::abs(mixture[t] - ex.mixture[t]));
    }
    if (worst > static_cast<double>(n + 1) * 0x1.0p-15) {
      throw DataError(rec.path + ": references do not sum to the stored mixture (max error " +
                      std::to_string(worst) + ")");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace mixit
