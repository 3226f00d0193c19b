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

#include "mixit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "mixit/error.hpp"

namespace mixit {
namespace {

using nlohmann::json;
using autograd::Shape;
using autograd::Tensor;

json config_json(const ModelConfig& c) {
  json edges = json::array();
  for (auto [from, to] : c.skip_residual_edges) edges.push_back({from, to});
  return json{{"num_outputs", c.num_outputs},
              {"basis_size", c.basis_size},
              {"kernel_size", c.kernel_size},
              {"num_blocks", c.num_blocks},
              {"bottleneck_channels", c.bottleneck_channels},
              {"conv_channels", c.conv_channels},
              {"depthwise_kernel", c.depthwise_kernel},
              {"dilation_period", c.dilation_period},
              {"skip_residual_edges", edges},
              {"sample_rate", c.sample_rate},
              {"mixture_consistency", c.mixture_consistency}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.num_outputs = j.at("num_outputs").get<std::size_t>();
  c.basis_size = j.at("basis_size").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.num_blocks = j.at("num_blocks").get<std::size_t>();
  c.bottleneck_channels = j.at("bottleneck_channels").get<std::size_t>();
  c.conv_channels = j.at("conv_channels").get<std::size_t>();
  c.depthwise_kernel = j.at("depthwise_kernel").get<std::size_t>();
  c.dilation_period = j.at("dilation_period").get<std::size_t>();
  c.skip_residual_edges.clear();
  for (const auto& e : j.at("skip_residual_edges")) {
    c.skip_residual_edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  }
  c.sample_rate = j.at("sample_rate").get<int>();
  c.mixture_consistency = j.value("mixture_consistency", true);
  c.validate();
  return c;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad model config: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (const auto& [name, t] : ckpt.model.params) entries.emplace_back("param/" + name, &t);
  if (ckpt.optimizer) {
    for (const auto& [name, t] : ckpt.optimizer->first_moment) entries.emplace_back("adam_m/" + name, &t);
    for (const auto& [name, t] : ckpt.optimizer->second_moment) entries.emplace_back("adam_v/" + name, &t);
  }

  json directory = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : entries) {
    directory.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size() * sizeof(float);
  }
  json header{{"format_version", kCheckpointFormatVersion},
              {"config", config_json(ckpt.model.config)},
              {"metadata", ckpt.metadata},
              {"tensors", directory}};
  if (ckpt.optimizer) {
    const auto& s = *ckpt.optimizer;
    header["optimizer"] = {{"type", "adam"},
                           {"learning_rate", s.learning_rate},
                           {"beta1", s.beta1},
                           {"beta2", s.beta2},
                           {"epsilon", s.epsilon},
                           {"step", s.step}};
  }
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : entries) {
    for (double v : t->values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw DataError("not a MIXITCKP checkpoint");
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) throw DataError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(12, header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::string_view data = bytes.substr(12 + header_len);

  Checkpoint ckpt;
  try {
    if (header.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    ckpt.model.config = config_from(header.at("config"));
    ckpt.metadata = header.value("metadata", std::map<std::string, std::string>{});
    if (header.contains("optimizer")) {
      const auto& o = header.at("optimizer");
      autograd::AdamState s;
      s.learning_rate = o.at("learning_rate").get<double>();
      s.beta1 = o.at("beta1").get<double>();
      s.beta2 = o.at("beta2").get<double>();
      s.epsilon = o.at("epsilon").get<double>();
      s.step = o.at("step").get<std::uint64_t>();
      ckpt.optimizer = s;
    }
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t count = autograd::shape_size(shape);
      if (offset + count * sizeof(float) > data.size()) throw DataError("tensor " + name + " overruns data");
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(get_u32(data.data() + offset + i * sizeof(float)));
      }
      Tensor t(shape, std::move(values));
      auto slash = name.find('/');
      const std::string kind = name.substr(0, slash);
      const std::string key = name.substr(slash + 1);
      if (kind == "param") {
        ckpt.model.params[key] = std::move(t);
      } else if (kind == "adam_m" && ckpt.optimizer) {
        ckpt.optimizer->first_moment[key] = std::move(t);
      } else if (kind == "adam_v" && ckpt.optimizer) {
        ckpt.optimizer->second_moment[key] = std::move(t);
      } else {
        throw DataError("unknown checkpoint tensor " + name);
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mixit
