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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mixit/autograd/adam.hpp"
#include "mixit/model.hpp"

namespace mixit {

inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'X', 'I', 'T', 'C', 'K', 'P'};
inline constexpr int kCheckpointFormatVersion = 1;

// Container layout: 8-byte magic "MIXITCKP", 4-byte little-endian header
// length, JSON header text (format version, model config, optimizer scalars,
// metadata, tensor directory with name/shape/offset), then little-endian
// float32 tensor data in directory order. Offsets are byte offsets into the
// data section.
struct Checkpoint {
  SeparatorModel model;
  std::optional<autograd::AdamState> optimizer;
  std::map<std::string, std::string> metadata;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace mixit
