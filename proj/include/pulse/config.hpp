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

// Flat `key = value` configuration files. Blank lines and text after '#' are
// ignored; keys are the TrainConfig / CorpusConfig field names. Unknown keys
// are an error so that typos do not silently fall back to defaults.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "pulse/corpus.hpp"
#include "pulse/error.hpp"
#include "pulse/train.hpp"

namespace pulse {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class N>
N parse_number(const std::string& key, const std::string& text) {
  N v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

}  // namespace detail

inline ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty() || value.empty())
      throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key or value");
    out[key] = value;
  }
  return out;
}

inline ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path.string(), "cannot open config file");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

// Applies the keys this config understands and removes them from `m`.
inline void apply_config(ConfigMap& m, TrainConfig& c) {
  auto take = [&](const char* key, auto&& apply) {
    if (auto it = m.find(key); it != m.end()) {
      apply(it->first, it->second);
      m.erase(it);
    }
  };
  using detail::parse_number;
  take("method", [&](auto&, auto& v) {
    // A method key resets the method-dependent defaults before other keys apply.
    const Method method = parse_method(v);
    if (method != c.method) {
      const TrainConfig d = TrainConfig::defaults_for(method);
      c.method = method;
      c.learning_rate = d.learning_rate;
    }
  });
  take("epochs", [&](auto& k, auto& v) { c.epochs = parse_number<int>(k, v); });
  take("batch_size", [&](auto& k, auto& v) { c.batch_size = parse_number<int>(k, v); });
  take("learning_rate", [&](auto& k, auto& v) { c.learning_rate = parse_number<double>(k, v); });
  take("adam_beta1", [&](auto& k, auto& v) { c.adam_beta1 = parse_number<double>(k, v); });
  take("adam_beta2", [&](auto& k, auto& v) { c.adam_beta2 = parse_number<double>(k, v); });
  take("adam_eps", [&](auto& k, auto& v) { c.adam_eps = parse_number<double>(k, v); });
  take("seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); });
  take("threads", [&](auto& k, auto& v) { c.threads = parse_number<int>(k, v); });
  take("tile_frames", [&](auto& k, auto& v) { c.tile_frames = parse_number<int>(k, v); });
  take("tile_bins", [&](auto& k, auto& v) { c.tile_bins = parse_number<int>(k, v); });
  take("class_prior", [&](auto& k, auto& v) { c.risk.class_prior = parse_number<double>(k, v); });
  take("loss", [&](auto&, auto& v) { c.risk.loss = parse_loss_kind(v); });
  take("correction_beta", [&](auto& k, auto& v) { c.risk.correction_beta = parse_number<double>(k, v); });
  take("correction_gamma", [&](auto& k, auto& v) { c.risk.correction_gamma = parse_number<double>(k, v); });
  take("frame_len", [&](auto& k, auto& v) { c.stft.frame_len = parse_number<int>(k, v); });
  take("hop", [&](auto& k, auto& v) { c.stft.hop = parse_number<int>(k, v); });
}

inline void apply_config(ConfigMap& m, CorpusConfig& c) {
  auto take = [&](const char* key, auto&& apply) {
    if (auto it = m.find(key); it != m.end()) {
      apply(it->first, it->second);
      m.erase(it);
    }
  };
  using detail::parse_number;
  take("sample_rate", [&](auto& k, auto& v) { c.sample_rate = parse_number<int>(k, v); });
  take("clip_seconds", [&](auto& k, auto& v) { c.clip_seconds = parse_number<double>(k, v); });
  take("n_train", [&](auto& k, auto& v) { c.n_train = parse_number<int>(k, v); });
  take("n_val", [&](auto& k, auto& v) { c.n_val = parse_number<int>(k, v); });
  take("n_test", [&](auto& k, auto& v) { c.n_test = parse_number<int>(k, v); });
  take("snr_lo", [&](auto& k, auto& v) { c.snr_lo = parse_number<double>(k, v); });
  take("snr_hi", [&](auto& k, auto& v) { c.snr_hi = parse_number<double>(k, v); });
  take("signal_kind", [&](auto&, auto& v) { c.signal_kind = parse_signal_kind(v); });
  take("noise_kind", [&](auto&, auto& v) { c.noise_kind = parse_noise_kind(v); });
  take("seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); });
}

inline void require_consumed(const ConfigMap& m) {
  if (!m.empty()) throw InvalidArgument("unknown config key '" + m.begin()->first + "'");
}

}  // namespace pulse
