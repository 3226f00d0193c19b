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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixit/analysis.hpp"
#include "mixit/checkpoint.hpp"
#include "mixit/datagen.hpp"
#include "mixit/error.hpp"
#include "mixit/metrics.hpp"
#include "mixit/model.hpp"
#include "mixit/train.hpp"
#include "mixit/wav.hpp"

namespace mixit::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

// Echo of the invocation: the exact argv (for `mixit rerun`) plus every
// resolved setting.
void write_run_config(const fs::path& dir, const std::vector<std::string>& argv,
                      const json& resolved) {
  json j;
  j["tool_version"] = kVersion;
  j["command"] = argv.empty() ? "" : argv.front();
  j["argv"] = argv;
  j["resolved"] = resolved;
  write_text(dir / "run_config.json", j.dump(2) + "\n");
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      auto n = static_cast<std::size_t>(std::stoul(s));
      return {n, n};
    }
    return {static_cast<std::size_t>(std::stoul(s.substr(0, colon))),
            static_cast<std::size_t>(std::stoul(s.substr(colon + 1)))};
  } catch (const std::exception&) {
    throw InvalidInput("expected MIN:MAX, got '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- synth-data --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t num_mixtures = 100;
  std::string sources = "1:2";
  std::uint64_t seed = 0;
  double duration = 1.0;
  int sample_rate = kDefaultSampleRate;
  std::string kinds = "tonal,modulated_noise";
  bool fixed_kind_order = false;
  std::string split = std::string(kSplitGeneric);
  bool no_refs = false;
  std::size_t workers = 1;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  ToyCorpusOptions opt;
  opt.num_mixtures = a.num_mixtures;
  std::tie(opt.min_sources, opt.max_sources) = parse_range(a.sources);
  opt.duration_s = a.duration;
  opt.sample_rate = a.sample_rate;
  opt.kinds.clear();
  for (const auto& k : split_list(a.kinds)) opt.kinds.push_back(parse_source_kind(k));
  opt.shuffle_kinds = !a.fixed_kind_order;
  opt.split = a.split;
  opt.seed = a.seed;
  opt.workers = a.workers;
  if (opt.num_mixtures == 0) throw InvalidInput("--num-mixtures must be positive");

  const fs::path out(a.out);
  ensure_dir(out);
  const auto corpus = make_toy_corpus(opt);
  const auto manifest = write_corpus(out, corpus, !a.no_refs);

  std::size_t refs = 0;
  for (const auto& ex : corpus) refs += a.no_refs ? 0 : ex.true_source_count;
  write_run_config(out, argv,
                   json{{"out", a.out},
                        {"num_mixtures", a.num_mixtures},
                        {"sources_per_mixture", {opt.min_sources, opt.max_sources}},
                        {"seed", a.seed},
                        {"duration_s", a.duration},
                        {"sample_rate", a.sample_rate},
                        {"kinds", split_list(a.kinds)},
                        {"shuffle_kinds", opt.shuffle_kinds},
                        {"split", a.split},
                        {"refs", !a.no_refs},
                        {"workers", a.workers}});
  std::printf("wrote %zu mixtures and %zu reference files to %s (manifest %s)\n", corpus.size(),
              refs, out.string().c_str(), manifest.filename().string().c_str());
  return kExitOk;
}

// --- model flags ---------------------------------------------------------------

struct ModelArgs {
  std::string preset = "desk";
  std::size_t num_outputs = 0;
  std::size_t basis_size = 0;
  std::size_t kernel_size = 0;
  std::size_t num_blocks = 0;
  std::size_t bottleneck = 0;
  std::size_t conv_channels = 0;
  std::size_t dilation_period = 0;
  std::string skip_edges;
  int sample_rate = kDefaultSampleRate;
  bool no_consistency = false;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "Model preset")
        ->check(CLI::IsMember({"desk", "reference"}))
        ->capture_default_str();
    app->add_option("--num-outputs", num_outputs, "Number of separated outputs M");
    app->add_option("--basis-size", basis_size, "Encoder/decoder basis size N");
    app->add_option("--kernel-size", kernel_size, "Encoder kernel length L (even)");
    app->add_option("--blocks", num_blocks, "Number of TDCN++ blocks");
    app->add_option("--bottleneck", bottleneck, "Bottleneck channels");
    app->add_option("--conv-channels", conv_channels, "Depthwise conv channels");
    app->add_option("--dilation-period", dilation_period, "Dilation period");
    app->add_option("--skip-edges", skip_edges, "Extra skip edges 'from:to,...' or 'none'");
    app->add_option("--sample-rate", sample_rate, "Sample rate in Hz")->capture_default_str();
    app->add_flag("--no-consistency", no_consistency, "Disable the mixture-consistency layer");
  }

  ModelConfig resolve() const {
    ModelConfig c = preset == "reference" ? ModelConfig::reference(sample_rate)
                                          : ModelConfig::desk_scale();
    c.sample_rate = sample_rate;
    if (num_outputs) c.num_outputs = num_outputs;
    if (basis_size) c.basis_size = basis_size;
    if (kernel_size) c.kernel_size = kernel_size;
    if (num_blocks) c.num_blocks = num_blocks;
    if (bottleneck) c.bottleneck_channels = bottleneck;
    if (conv_channels) c.conv_channels = conv_channels;
    if (dilation_period) c.dilation_period = dilation_period;
    if (skip_edges == "none") {
      c.skip_residual_edges.clear();
    } else if (!skip_edges.empty()) {
      c.skip_residual_edges.clear();
      for (const auto& e : split_list(skip_edges)) c.skip_residual_edges.push_back(parse_range(e));
    }
    c.mixture_consistency = !no_consistency;
    c.validate();
    return c;
  }
};

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string train_manifest;
  std::string val_manifest;
  std::string noise_manifest;
  std::string out;
  std::string mode = "unsupervised";
  double supervised_frac = 0.0;
  double p0 = 0.0;
  std::size_t mixtures_per_mom = 2;
  double snr_max = 30.0;
  std::size_t steps = 1000;
  std::size_t eval_every = 500;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double clip = 0.0;
  std::size_t crop = 0;
  std::uint64_t seed = 0;
  bool zero_loss = false;
  bool single_mixture = false;
  bool enhancement = false;
  std::string val_metric = "auto";
  std::size_t val_limit = 0;
  std::string init;
  ModelArgs model;
};

json config_json(const TrainConfig& c) {
  return json::parse(model_config_to_json(c.model));
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  TrainConfig cfg;
  cfg.mode = parse_train_mode(a.mode);
  cfg.model = a.model.resolve();
  cfg.snr_max = a.snr_max;
  cfg.batch_spec.supervised_fraction = a.supervised_frac;
  cfg.batch_spec.zero_probability = a.p0;
  cfg.batch_spec.mixtures_per_mom = a.mixtures_per_mom;
  cfg.zero_source_loss = a.zero_loss;
  cfg.supervised_mom = !a.single_mixture;
  cfg.enhancement = a.enhancement;
  cfg.batch_size = a.batch_size;
  cfg.steps = a.steps;
  cfg.eval_every = a.eval_every;
  cfg.crop_length = a.crop;
  cfg.learning_rate = a.lr;
  cfg.clip_grad_norm = a.clip;
  cfg.validation_metric = parse_validation_metric(a.val_metric);
  cfg.max_validation_items = a.val_limit;
  cfg.seed = a.seed;
  cfg.validate();

  // Unsupervised runs never open reference files.
  const bool want_refs = cfg.mode != TrainMode::kUnsupervised;
  TrainData data;
  data.train = load_corpus(a.train_manifest, cfg.model.sample_rate, want_refs);
  if (!a.val_manifest.empty()) {
    data.validation = load_corpus(a.val_manifest, cfg.model.sample_rate, true);
  }
  if (!a.noise_manifest.empty()) {
    data.noise_only = load_corpus(a.noise_manifest, cfg.model.sample_rate, false);
  }
  std::optional<Checkpoint> init;
  if (!a.init.empty()) init = load_checkpoint(a.init);

  const fs::path out(a.out);
  ensure_dir(out);
  Trainer trainer(cfg, std::move(data), std::move(init));
  const BatchSpec& spec = trainer.config().batch_spec;
  write_run_config(
      out, argv,
      json{{"train_manifest", a.train_manifest},
           {"val_manifest", a.val_manifest},
           {"noise_manifest", a.noise_manifest},
           {"out", a.out},
           {"mode", a.mode},
           {"supervised_fraction", spec.supervised_fraction},
           {"p0", spec.zero_probability},
           {"mixtures_per_mom", spec.mixtures_per_mom},
           {"snr_max", cfg.snr_max},
           {"tau", LossConfig(cfg.snr_max).tau()},
           {"steps", cfg.steps},
           {"eval_every", cfg.eval_every},
           {"batch_size", cfg.batch_size},
           {"learning_rate", cfg.learning_rate},
           {"adam", {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}}},
           {"clip_grad_norm", cfg.clip_grad_norm},
           {"crop_length", cfg.crop_length},
           {"zero_source_loss", cfg.zero_source_loss},
           {"supervised_mom", cfg.supervised_mom},
           {"enhancement", cfg.enhancement},
           {"validation_metric", validation_metric_name(trainer.resolved_validation_metric())},
           {"validation_limit", cfg.max_validation_items},
           {"init", a.init},
           {"seed", cfg.seed},
           {"model", config_json(cfg)}});

  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  if (!log) throw DataError("cannot write training log in " + out.string());
  try {
    trainer.run([&](const TrainLogEntry& e) {
      json j{{"step", e.step},
             {"loss_db", e.loss_db},
             {"val_metric", e.val_metric ? json(*e.val_metric) : json()},
             {"wall_s", e.wall_s}};
      log << j.dump() << '\n';
      log.flush();
      if (e.val_metric) {
        std::printf("step %zu  loss %.3f dB  val %s %.3f dB  (%.1f s)\n", e.step, e.loss_db,
                    validation_metric_name(trainer.resolved_validation_metric()).c_str(),
                    *e.val_metric, e.wall_s);
        std::fflush(stdout);
      }
    });
  } catch (const NumericError& e) {
    save_checkpoint(out / "diverged.ckpt", trainer.checkpoint(false));
    throw NumericError(std::string(e.what()) + "; last parameters saved to " +
                       (out / "diverged.ckpt").string());
  }
  save_checkpoint(out / "final.ckpt", trainer.checkpoint(false));
  save_checkpoint(out / "best.ckpt", trainer.checkpoint(true));
  if (trainer.best_score()) {
    std::printf("best validation %.3f dB; checkpoints in %s\n", *trainer.best_score(),
                out.string().c_str());
  } else {
    std::printf("trained %zu steps; checkpoints in %s\n", trainer.steps_done(),
                out.string().c_str());
  }
  return kExitOk;
}

// --- separate --------------------------------------------------------------------

struct SeparateArgs {
  std::string checkpoint;
  std::string input;
  std::string out_dir;
};

int cmd_separate(const SeparateArgs& a, const std::vector<std::string>& argv) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Waveform x = read_wav(a.input);
  if (x.sample_rate() != ckpt.model.config.sample_rate) {
    throw DataError(a.input + ": sample rate " + std::to_string(x.sample_rate()) +
                    " Hz does not match the checkpoint's " +
                    std::to_string(ckpt.model.config.sample_rate) + " Hz");
  }
  const SourceSet est = separate(ckpt.model, x);
  const fs::path out(a.out_dir);
  ensure_dir(out);
  for (std::size_t m = 0; m < est.size(); ++m) {
    write_wav(out / ("source_" + std::to_string(m) + ".wav"), est[m]);
  }
  write_run_config(out, argv,
                   json{{"checkpoint", a.checkpoint}, {"input", a.input}, {"out_dir", a.out_dir},
                        {"num_outputs", est.size()}});
  std::printf("wrote %zu sources to %s\n", est.size(), out.string().c_str());
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  bool identity = false;
  std::size_t identity_outputs = 4;
  std::string manifest;
  std::string metrics = "msi";
  std::string out_dir;
  bool mom = false;
  double snr_max = 30.0;
  std::string momi_select = "loss";
  std::size_t limit = 0;
};

struct EvalItem {
  std::string id;
  Waveform mixture;
  std::optional<SourceSet> references;  // all reference slots
  std::size_t source_count = 0;
  std::optional<SourceSet> components;  // MoM items only
};

std::vector<EvalItem> pair_items(const std::vector<TrainExample>& corpus,
                                 const std::vector<ManifestRecord>& records) {
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i + 1 < corpus.size(); i += 2) {
    const auto& a = corpus[i];
    const auto& b = corpus[i + 1];
    EvalItem it;
    it.id = records[i].path + "+" + records[i + 1].path;
    it.components = SourceSet({a.mixture, b.mixture});
    it.mixture = mix(*it.components);
    if (a.references && b.references) {
      std::vector<Waveform> refs(a.references->begin(), a.references->end());
      refs.insert(refs.end(), b.references->begin(), b.references->end());
      it.references = SourceSet(std::move(refs));
    }
    it.source_count = a.true_source_count + b.true_source_count;
    out.push_back(std::move(it));
  }
  return out;
}

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  std::vector<std::string> metrics = split_list(a.metrics);
  if (metrics.empty()) throw InvalidInput("--metrics is empty");
  for (const auto& m : metrics) {
    if (!is_known_metric(m)) throw InvalidInput("unknown metric '" + m + "' (sisnri|msi|ss|momi)");
  }
  if (a.identity == !a.checkpoint.empty()) {
    throw InvalidInput("pass exactly one of --checkpoint or --identity");
  }
  std::optional<SeparatorModel> model;
  int sample_rate = 0;
  if (!a.identity) {
    model = load_checkpoint(a.checkpoint).model;
    sample_rate = model->config.sample_rate;
  }
  auto records = read_manifest(a.manifest);
  auto corpus = load_corpus(a.manifest, sample_rate, true);
  if (a.limit && a.limit < corpus.size()) {
    corpus.resize(a.limit);
    records.resize(a.limit);
  }
  const bool needs_refs = std::any_of(metrics.begin(), metrics.end(),
                                      [](const std::string& m) { return m != kMetricMomi; });
  if (needs_refs) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!corpus[i].supervised()) {
        throw DataError("metric list requires reference sources but " + records[i].path +
                        " has none (only momi works without references)");
      }
    }
  }

  auto run_model = [&](const Waveform& x) {
    if (model) return separate(*model, x);
    std::vector<Waveform> est{x};
    while (est.size() < a.identity_outputs) est.push_back(Waveform::zeros(x.size(), x.sample_rate()));
    return SourceSet(std::move(est));
  };

  std::vector<EvalItem> singles;
  if (!a.mom) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      singles.push_back(EvalItem{records[i].path, corpus[i].mixture, corpus[i].references,
                                 corpus[i].true_source_count, std::nullopt});
    }
  }
  const bool want_pairs =
      a.mom || std::find(metrics.begin(), metrics.end(), kMetricMomi) != metrics.end();
  std::vector<EvalItem> pairs = want_pairs ? pair_items(corpus, records) : std::vector<EvalItem>{};

  MomiOptions momi_opt;
  momi_opt.loss = LossConfig(a.snr_max);
  if (a.momi_select == "sisnr") {
    momi_opt.selection = MomiSelection::kSiSnrMax;
  } else if (a.momi_select != "loss") {
    throw InvalidInput("--momi-select must be loss or sisnr");
  }

  std::vector<EvalRecord> records_out;
  auto score = [&](const EvalItem& it, const SourceSet& est, const std::string& metric) {
    EvalRecord r{it.id, metric, std::nullopt, ""};
    if (metric == kMetricMomi) {
      if (!it.components) {
        r.note = "momi needs a mixture of mixtures";
      } else {
        r.value_db = momi(*it.components, est, it.mixture, momi_opt);
      }
    } else if (metric == kMetricSs) {
      if (it.source_count != 1) {
        r.note = "ss is defined for single-source inputs only";
      } else {
        for (const auto& ref : *it.references) {
          if (!ref.is_silent()) r.value_db = ss(ref, est);
        }
      }
    } else if (metric == kMetricSiSnri) {
      if (it.source_count < 2) {
        r.note = "si-snri is not meaningful for single-source inputs";
      } else {
        r.value_db = msi(*it.references, est, it.mixture);
      }
    } else if (metric == kMetricMsi) {
      if (it.source_count == 0) {
        r.note = "no active reference";
      } else if (it.source_count > est.size()) {
        r.note = "more references than outputs";
      } else {
        r.value_db = msi(*it.references, est, it.mixture);
      }
    }
    records_out.push_back(std::move(r));
  };

  for (const auto& it : singles) {
    const SourceSet est = run_model(it.mixture);
    for (const auto& m : metrics) {
      if (m != kMetricMomi) score(it, est, m);
    }
  }
  for (const auto& it : pairs) {
    const SourceSet est = run_model(it.mixture);
    for (const auto& m : metrics) {
      if (a.mom || m == kMetricMomi) score(it, est, m);
    }
  }

  const fs::path out(a.out_dir);
  ensure_dir(out);
  write_eval_report(out / "eval_report.jsonl", records_out);
  write_run_config(out, argv,
                   json{{"checkpoint", a.checkpoint},
                        {"identity", a.identity},
                        {"identity_outputs", a.identity_outputs},
                        {"manifest", a.manifest},
                        {"metrics", metrics},
                        {"mom", a.mom},
                        {"snr_max", a.snr_max},
                        {"momi_select", a.momi_select},
                        {"limit", a.limit},
                        {"out_dir", a.out_dir}});
  for (const auto& [name, s] : summarize(records_out)) {
    std::printf("%-7s mean %8.3f dB over %zu examples (%zu undefined)\n", name.c_str(),
                s.mean_db, s.count, s.undefined);
  }
  return kExitOk;
}

// --- analyze ---------------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> reports;
  std::string metric;
  std::string normalization = "per-example";
  std::string correlate;
  std::string out_dir;
};

int cmd_analyze(const AnalyzeArgs& a, const std::vector<std::string>& argv) {
  const NormalizationMode mode = a.normalization == "per-condition"
                                     ? NormalizationMode::kPerConditionMean
                                     : NormalizationMode::kPerExampleMean;
  // values[report][metric][example]
  std::vector<std::map<std::string, std::map<std::string, std::optional<double>>>> values;
  for (const auto& path : a.reports) {
    auto& v = values.emplace_back();
    for (const auto& r : read_eval_report(path)) v[r.metric][r.example_id] = r.value_db;
  }
  std::set<std::string> metrics;
  if (!a.metric.empty()) {
    metrics.insert(a.metric);
  } else {
    for (const auto& [m, _] : values.front()) {
      bool everywhere = true;
      for (const auto& v : values) everywhere = everywhere && v.count(m);
      if (everywhere) metrics.insert(m);
    }
  }
  if (metrics.empty()) throw DataError("the reports share no metric");

  json result;
  result["reports"] = a.reports;
  result["normalization"] = a.normalization;
  json stds = json::object();
  for (const auto& m : metrics) {
    ScoreTable table;
    for (const auto& [id, first] : values.front().count(m) ? values.front().at(m)
                                                            : std::map<std::string, std::optional<double>>{}) {
      std::vector<double> row;
      std::size_t defined = 0;
      for (std::size_t c = 0; c < values.size(); ++c) {
        auto mit = values[c].find(m);
        if (mit == values[c].end()) break;
        auto it = mit->second.find(id);
        if (it != mit->second.end() && it->second) {
          row.push_back(*it->second);
          ++defined;
        }
      }
      if (defined == 0) continue;  // undefined under every condition
      if (defined != values.size()) {
        throw DataError("incomplete score table: example '" + id + "' lacks a " + m +
                        " score in some report");
      }
      table.push_back(std::move(row));
    }
    for (std::size_t c = 1; c < values.size(); ++c) {
      std::size_t n = 0;
      if (values[c].count(m)) {
        for (const auto& [_, v] : values[c].at(m)) n += v ? 1 : 0;
      }
      if (n != table.size()) throw DataError("incomplete score table for metric " + m);
    }
    if (table.empty()) throw DataError("no defined scores for metric " + m);
    stds[m] = {{"normalized_std_db", normalized_within_condition_std(table, mode)},
               {"examples", table.size()},
               {"conditions", values.size()}};
  }
  result["within_condition_std"] = stds;

  std::vector<std::string> pair = split_list(a.correlate);
  if (pair.empty() && metrics.count(kMetricMomi) && metrics.count(kMetricMsi)) {
    pair = {kMetricMomi, kMetricMsi};
  }
  if (!pair.empty()) {
    if (pair.size() != 2) throw InvalidInput("--correlate takes two metric names");
    json corr = json::array();
    for (std::size_t c = 0; c < values.size(); ++c) {
      const auto& v = values[c];
      if (!v.count(pair[0]) || !v.count(pair[1])) {
        throw DataError(a.reports[c] + " lacks " + pair[0] + " or " + pair[1]);
      }
      std::vector<double> xs, ys;
      for (const auto& [id, x] : v.at(pair[0])) {
        auto it = v.at(pair[1]).find(id);
        if (x && it != v.at(pair[1]).end() && it->second) {
          xs.push_back(*x);
          ys.push_back(*it->second);
        }
      }
      const auto r = correlation(xs, ys);
      corr.push_back({{"report", a.reports[c]},
                      {"metrics", pair},
                      {"n", xs.size()},
                      {"pearson", r.pearson ? json(*r.pearson) : json()},
                      {"spearman", r.spearman ? json(*r.spearman) : json()},
                      {"defined", r.defined()}});
    }
    result["correlation"] = corr;
  }

  const std::string text = result.dump(2);
  std::printf("%s\n", text.c_str());
  if (!a.out_dir.empty()) {
    const fs::path out(a.out_dir);
    ensure_dir(out);
    write_text(out / "analysis.json", text + "\n");
    write_run_config(out, argv,
                     json{{"reports", a.reports},
                          {"metric", a.metric},
                          {"normalization", a.normalization},
                          {"correlate", pair},
                          {"out_dir", a.out_dir}});
  }
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args);

int cmd_rerun(const std::string& config) {
  std::ifstream f(config, std::ios::binary);
  if (!f) throw DataError("cannot open " + config);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(config + ": " + e.what());
  }
  if (!j.contains("argv") || !j["argv"].is_array()) throw DataError(config + " has no argv");
  return dispatch(j["argv"].get<std::vector<std::string>>());
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Mixture invariant training toolkit", "mixit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Synthesize a toy corpus with a manifest");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--num-mixtures", synth.num_mixtures, "Number of mixtures")->capture_default_str();
  s->add_option("--sources-per-mixture", synth.sources, "Active sources per mixture, MIN:MAX")
      ->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--duration", synth.duration, "Clip length in seconds")->capture_default_str();
  s->add_option("--sample-rate", synth.sample_rate, "Sample rate in Hz")->capture_default_str();
  s->add_option("--kinds", synth.kinds, "Source kinds (tonal,modulated_noise,transient)")
      ->capture_default_str();
  s->add_flag("--fixed-kind-order", synth.fixed_kind_order,
              "Source j always uses kinds[j] instead of a random rotation");
  s->add_option("--split", synth.split, "Split tag written to the manifest")->capture_default_str();
  s->add_flag("--no-refs", synth.no_refs, "Write mixtures only (unsupervised manifest)");
  s->add_option("--workers", synth.workers, "Generation threads")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a separation model");
  t->add_option("--train-manifest", train.train_manifest, "Training manifest")->required();
  t->add_option("--val-manifest", train.val_manifest, "Validation manifest");
  t->add_option("--noise-manifest", train.noise_manifest, "Noise-only manifest (--enhancement)");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--mode", train.mode, "supervised | unsupervised | semi")
      ->check(CLI::IsMember({"supervised", "unsupervised", "semi"}))
      ->capture_default_str();
  t->add_option("--supervised-frac", train.supervised_frac, "Supervised fraction p (semi)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  t->add_option("--p0", train.p0, "Probability of zeroing one supervised mixture")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  t->add_option("--mixtures-per-mom", train.mixtures_per_mom, "Mixtures per MoM (K)")
      ->capture_default_str();
  t->add_option("--snr-max", train.snr_max, "Loss threshold SNRmax in dB")->capture_default_str();
  t->add_option("--steps", train.steps, "Optimizer steps")->capture_default_str();
  t->add_option("--eval-every", train.eval_every, "Validation cadence in steps")
      ->capture_default_str();
  t->add_option("--batch-size", train.batch_size, "Batch size")->capture_default_str();
  t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--clip-grad-norm", train.clip, "Global gradient-norm clip (0 = off)")
      ->capture_default_str();
  t->add_option("--crop", train.crop, "Training crop length in samples (0 = full clips)")
      ->capture_default_str();
  t->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  t->add_flag("--zero-loss", train.zero_loss, "Score silent reference slots with the zero-source loss");
  t->add_flag("--single-mixture", train.single_mixture,
              "Supervised items are single mixtures instead of MoMs");
  t->add_flag("--enhancement", train.enhancement,
              "Constrained speech-enhancement pairing (needs --noise-manifest, 3 outputs)");
  t->add_option("--val-metric", train.val_metric, "auto | msi | ss | momi | loss")
      ->capture_default_str();
  t->add_option("--val-limit", train.val_limit, "Validate on the first N examples (0 = all)");
  t->add_option("--init", train.init, "Initialize weights from a checkpoint");
  train.model.add_to(t);

  SeparateArgs sep;
  auto* p = app.add_subcommand("separate", "Separate one WAV file");
  p->add_option("--checkpoint", sep.checkpoint, "Model checkpoint")->required();
  p->add_option("--input", sep.input, "Input WAV")->required();
  p->add_option("--out-dir", sep.out_dir, "Output directory")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a model on a manifest");
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  e->add_flag("--identity", ev.identity, "Pass-through baseline: mixture in output 1, zeros elsewhere");
  e->add_option("--identity-outputs", ev.identity_outputs, "Outputs of the pass-through baseline")
      ->capture_default_str();
  e->add_option("--manifest", ev.manifest, "Evaluation manifest")->required();
  e->add_option("--metrics", ev.metrics, "Comma list of sisnri,msi,ss,momi")->capture_default_str();
  e->add_option("--out-dir", ev.out_dir, "Output directory")->required();
  e->add_flag("--mom", ev.mom, "Score MoMs of consecutive manifest pairs for every metric");
  e->add_option("--snr-max", ev.snr_max, "SNRmax for loss-based MoMi assignment")
      ->capture_default_str();
  e->add_option("--momi-select", ev.momi_select, "MoMi assignment: loss | sisnr")
      ->capture_default_str();
  e->add_option("--limit", ev.limit, "Only the first N manifest records (0 = all)");

  AnalyzeArgs an;
  auto* z = app.add_subcommand("analyze", "Normalized deviation and correlation of reports");
  z->add_option("--report", an.reports, "Evaluation report (repeat per condition)")->required();
  z->add_option("--metric", an.metric, "Restrict to one metric");
  z->add_option("--normalization", an.normalization, "per-example | per-condition")
      ->check(CLI::IsMember({"per-example", "per-condition"}))
      ->capture_default_str();
  z->add_option("--correlate", an.correlate, "Two metrics to correlate, e.g. momi,msi");
  z->add_option("--out-dir", an.out_dir, "Write analysis.json here");

  std::string rerun_config;
  auto* r = app.add_subcommand("rerun", "Repeat a run from its run_config.json");
  r->add_option("config", rerun_config, "run_config.json")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (s->parsed()) return cmd_synth(synth, args);
  if (t->parsed()) return cmd_train(train, args);
  if (p->parsed()) return cmd_separate(sep, args);
  if (e->parsed()) return cmd_evaluate(ev, args);
  if (z->parsed()) return cmd_analyze(an, args);
  if (r->parsed()) return cmd_rerun(rerun_config);
  return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const InvalidInput& e) {
    std::cerr << "mixit: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "mixit: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "mixit: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "mixit: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mixit::cli
