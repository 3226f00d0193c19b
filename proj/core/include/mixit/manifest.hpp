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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mixit {

inline constexpr std::string_view kSplitSpeechPlusNoise = "speech_plus_noise";
inline constexpr std::string_view kSplitNoiseOnly = "noise_only";
inline constexpr std::string_view kSplitGeneric = "generic";

// One line of a corpus manifest (JSON Lines, UTF-8):
//   {"path": ..., "split": ..., "refs": [...], "duration_s": ...}
// "refs" is omitted for unsupervised records. Relative paths resolve against
// the manifest's directory.
struct ManifestRecord {
  std::string path;
  std::string split = std::string(kSplitGeneric);
  std::optional<std::vector<std::string>> refs;
  double duration_s = 0.0;

  bool operator==(const ManifestRecord&) const = default;
};

ManifestRecord parse_manifest_line(std::string_view line);
std::string format_manifest_line(const ManifestRecord& record);

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

}  // namespace mixit
