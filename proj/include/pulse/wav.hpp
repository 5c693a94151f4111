// Copyright 2026 The pulse-se Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// RIFF/WAVE reader and writer for 16-bit PCM mono.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "pulse/dsp.hpp"
#include "pulse/error.hpp"

namespace pulse {

inline std::int16_t to_pcm16(double x) {
  const double scaled = std::nearbyint(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline double from_pcm16(std::int16_t v) { return static_cast<double>(v) / 32768.0; }

// The value a sample takes after a write/read round trip.
inline double quantize_pcm16(double x) { return from_pcm16(to_pcm16(x)); }

namespace detail {

inline void put_le(std::vector<char>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_le(const std::vector<char>& in, std::size_t pos, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  const auto n = static_cast<std::uint32_t>(w.size());
  std::vector<char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  detail::put_le(out, 36 + 2 * n, 4);
  tag("WAVE");
  tag("fmt ");
  detail::put_le(out, 16, 4);
  detail::put_le(out, 1, 2);  // PCM
  detail::put_le(out, 1, 2);  // mono
  detail::put_le(out, static_cast<std::uint32_t>(w.sample_rate), 4);
  detail::put_le(out, static_cast<std::uint32_t>(w.sample_rate) * 2, 4);
  detail::put_le(out, 2, 2);
  detail::put_le(out, 16, 2);
  tag("data");
  detail::put_le(out, 2 * n, 4);
  for (double s : w.samples)
    detail::put_le(out, static_cast<std::uint16_t>(to_pcm16(s)), 2);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FileError(path.string(), "cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FileError(path.string(), "write failed");
}

inline Waveform read_wav(const std::filesystem::path& path, std::optional<int> expected_rate = std::nullopt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError(path.string(), "cannot open for reading");
  const std::vector<char> in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string p = path.string();
  if (in.size() < 12 || std::string(in.data(), 4) != "RIFF" || std::string(in.data() + 8, 4) != "WAVE")
    throw FileError(p, "malformed header: not a RIFF/WAVE file");

  std::optional<int> rate;
  std::size_t pos = 12;
  while (pos + 8 <= in.size()) {
    const std::string id(in.data() + pos, 4);
    const std::uint32_t size = detail::get_le(in, pos + 4, 4);
    const std::size_t body = pos + 8;
    if (body + size > in.size()) throw FileError(p, "truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (size < 16) throw FileError(p, "malformed fmt chunk");
      const auto format = detail::get_le(in, body, 2);
      const auto channels = detail::get_le(in, body + 2, 2);
      const auto bits = detail::get_le(in, body + 14, 2);
      if (format != 1) throw FileError(p, "unsupported format (only PCM)");
      if (channels != 1) throw FileError(p, "unsupported channel count (only mono)");
      if (bits != 16) throw FileError(p, "unsupported bit depth (only 16-bit)");
      rate = static_cast<int>(detail::get_le(in, body + 4, 4));
      if (*rate <= 0) throw FileError(p, "malformed header: zero sample rate");
    } else if (id == "data") {
      if (!rate) throw FileError(p, "malformed header: data chunk before fmt chunk");
      if (size % 2 != 0) throw FileError(p, "data chunk is not a whole number of samples");
      if (expected_rate && *expected_rate != *rate)
        throw FileError(p, "sample-rate mismatch: expected " + std::to_string(*expected_rate) + ", got " +
                               std::to_string(*rate));
      Waveform w;
      w.sample_rate = *rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = from_pcm16(static_cast<std::int16_t>(detail::get_le(in, body + 2 * i, 2)));
      if (w.samples.empty()) throw FileError(p, "no samples");
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw FileError(p, "malformed header: no data chunk");
}

}  // namespace pulse
