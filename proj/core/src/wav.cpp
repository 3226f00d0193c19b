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

#include "mixit/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mixit/error.hpp"

namespace mixit {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint16_t le16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFFU));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw DataError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::string_view data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError("truncated WAV chunk");
    if (id == "fmt ") {
      if (size < 16) throw DataError("short WAV fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) format = le16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, size);
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) throw DataError("WAV file has no fmt chunk");
  if (channels != 1) throw DataError("only mono WAV files are supported");
  if (rate == 0) throw DataError("WAV sample rate is zero");

  std::vector<double> samples;
  if (format == kFormatPcm && bits == 16) {
    samples.resize(data.size() / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto v = static_cast<std::int16_t>(le16(data.data() + 2 * i));
      samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    samples.resize(data.size() / 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i] = std::bit_cast<float>(le32(data.data() + 4 * i));
    }
  } else {
    throw DataError("unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
  }
  if (samples.empty()) throw DataError("WAV file has no samples");
  return Waveform(std::move(samples), static_cast<int>(rate));
}

std::string encode_wav(const Waveform& wave, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(wave.size()) * block;
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put32(out, 36 + data_size);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate()));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate()) * block);
  put16(out, static_cast<std::uint16_t>(block));
  put16(out, bits);
  out += "data";
  put32(out, data_size);
  for (double v : wave.samples()) {
    if (pcm) {
      const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
  const std::string bytes = encode_wav(wave, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write WAV file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing WAV file " + path.string());
}

}  // namespace mixit
