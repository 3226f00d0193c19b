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
#include <string>
#include <string_view>

#include "mixit/signal.hpp"

namespace mixit {

enum class WavEncoding { kPcm16, kFloat32 };

// Mono RIFF/WAVE, 16-bit PCM or IEEE float32. PCM samples map to [-1, 1).
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(std::string_view bytes);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kFloat32);
std::string encode_wav(const Waveform& wave, WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace mixit
