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

#include "mixit/manifest.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mixit/error.hpp"

namespace mixit {

using nlohmann::json;

ManifestRecord parse_manifest_line(std::string_view line) {
  ManifestRecord r;
  try {
    json j = json::parse(line);
    r.path = j.at("path").get<std::string>();
    r.split = j.value("split", std::string(kSplitGeneric));
    if (j.contains("refs") && !j.at("refs").is_null()) {
      r.refs = j.at("refs").get<std::vector<std::string>>();
    }
    r.duration_s = j.at("duration_s").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad manifest record: ") + e.what());
  }
  if (r.path.empty()) throw DataError("manifest record has an empty path");
  if (r.split.empty()) throw DataError("manifest record has an empty split tag");
  if (!(r.duration_s > 0.0) || !std::isfinite(r.duration_s)) {
    throw DataError("manifest record " + r.path + " has a non-positive duration");
  }
  return r;
}

std::string format_manifest_line(const ManifestRecord& record) {
  json j{{"path", record.path}, {"split", record.split}};
  if (record.refs) j["refs"] = *record.refs;
  j["duration_s"] = record.duration_s;
  return j.dump();
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : records) out << format_manifest_line(r) << '\n';
  if (!out) throw DataError("failed writing manifest " + path.string());
}

}  // namespace mixit
