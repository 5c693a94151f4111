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

// Synthetic corpus: harmonic "signal" clips, coloured "noise" clips, noisy
// mixtures at controlled SNR, the JSON-lines manifest, and loaders that keep
// the PU training path away from clean audio.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pulse/dsp.hpp"
#include "pulse/error.hpp"
#include "pulse/parallel.hpp"
#include "pulse/rng.hpp"
#include "pulse/wav.hpp"

namespace pulse {

enum class SignalKind { harmonic_bursts, chirps };
enum class NoiseKind { colored_noise, filtered_bursts };
enum class Split { train = 0, val = 1, test = 2 };
enum class Role { noisy, noise, clean };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline const char* to_string(Role r) {
  switch (r) {
    case Role::noisy: return "noisy";
    case Role::noise: return "noise";
    case Role::clean: return "clean";
  }
  return "?";
}

inline const char* to_string(SignalKind k) { return k == SignalKind::chirps ? "chirps" : "harmonic_bursts"; }
inline const char* to_string(NoiseKind k) { return k == NoiseKind::filtered_bursts ? "filtered_bursts" : "colored_noise"; }

inline SignalKind parse_signal_kind(const std::string& s) {
  if (s == "harmonic_bursts") return SignalKind::harmonic_bursts;
  if (s == "chirps") return SignalKind::chirps;
  throw InvalidArgument("unknown signal kind '" + s + "'");
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "colored_noise") return NoiseKind::colored_noise;
  if (s == "filtered_bursts") return NoiseKind::filtered_bursts;
  throw InvalidArgument("unknown noise kind '" + s + "'");
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidArgument("unknown split '" + s + "'");
}

inline Role parse_role(const std::string& s) {
  if (s == "noisy") return Role::noisy;
  if (s == "noise") return Role::noise;
  if (s == "clean") return Role::clean;
  throw InvalidArgument("unknown role '" + s + "'");
}

struct CorpusConfig {
  int sample_rate = 8000;
  double clip_seconds = 1.0;
  int n_train = 200;
  int n_val = 40;
  int n_test = 60;
  double snr_lo = -5.0;
  double snr_hi = 10.0;
  SignalKind signal_kind = SignalKind::harmonic_bursts;
  NoiseKind noise_kind = NoiseKind::colored_noise;
  std::uint64_t seed = 0;

  // 16 kHz, 3.125 s clips.
  static CorpusConfig paper_scale() {
    CorpusConfig c;
    c.sample_rate = 16000;
    c.clip_seconds = 3.125;
    return c;
  }

  std::size_t num_samples() const {
    return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
  }

  int count(Split s) const {
    switch (s) {
      case Split::train: return n_train;
      case Split::val: return n_val;
      case Split::test: return n_test;
    }
    return 0;
  }

  void validate() const {
    detail::require(sample_rate >= 2000, "sample rate must be at least 2000 Hz");
    detail::require(clip_seconds > 0.0, "clip length must be positive");
    const double n = clip_seconds * sample_rate;
    detail::require(std::abs(n - std::round(n)) < 1e-9, "clip_len * sample_rate must be an integer");
    detail::require(n_train >= 1 && n_val >= 1 && n_test >= 1, "split sizes must be at least 1");
    detail::require(snr_lo <= snr_hi, "SNR range must satisfy lo <= hi");
  }
};

// Signal draw plus the generator parameters tests need to check it.
struct SignalDraw {
  Waveform wave;
  double f0_start = 0.0;
  double f0_end = 0.0;
  int harmonics = 0;
  std::vector<double> envelope;  // in [0, 1], one value per sample
};

struct NoiseDraw {
  Waveform wave;
  double tilt_db_per_octave = 0.0;
};

namespace detail {

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

// Random on/off gate with 10 ms raised-cosine transitions. The hard gate is
// redrawn until its active fraction lies in [0.35, 0.85].
inline std::vector<double> burst_envelope(std::size_t n, int sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> on_len(0.15, 0.45), off_len(0.08, 0.30);
  std::bernoulli_distribution start_on(0.5);
  std::vector<double> gate(n);
  for (int attempt = 0;; ++attempt) {
    bool on = start_on(rng);
    std::size_t pos = 0, active = 0;
    while (pos < n) {
      const auto len = static_cast<std::size_t>((on ? on_len(rng) : off_len(rng)) * sample_rate);
      const std::size_t end = std::min(n, pos + std::max<std::size_t>(len, 1));
      std::fill(gate.begin() + static_cast<std::ptrdiff_t>(pos), gate.begin() + static_cast<std::ptrdiff_t>(end),
                on ? 1.0 : 0.0);
      if (on) active += end - pos;
      pos = end;
      on = !on;
    }
    const double frac = static_cast<double>(active) / static_cast<double>(n);
    if ((frac >= 0.35 && frac <= 0.85) || attempt >= 1000) break;
  }
  // Smooth with a normalized Hann kernel; keeps the 0.5 crossing at the edges.
  const int ramp = std::max(1, sample_rate / 100);
  std::vector<double> kernel(static_cast<std::size_t>(ramp));
  double ksum = 0.0;
  for (int i = 0; i < ramp; ++i) {
    kernel[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / ramp);
    ksum += kernel[i];
  }
  std::vector<double> env(n, 0.0);
  const int half = ramp / 2;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < ramp; ++j) {
      const long src = static_cast<long>(i) + j - half;
      const double g = src < 0 ? gate.front() : (src >= static_cast<long>(n) ? gate.back() : gate[src]);
      acc += kernel[j] * g;
    }
    env[i] = acc / ksum;
  }
  return env;
}

// White Gaussian noise whose power spectrum falls by `tilt` dB per octave.
inline std::vector<double> tilted_noise(std::size_t n, int sample_rate, double tilt, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = gauss(rng);
  RealFft fft(static_cast<int>(n));
  std::vector<Complex> spec(n / 2 + 1);
  fft.forward(x, spec);
  const double exponent = tilt / (20.0 * std::log10(2.0));
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = std::max(static_cast<double>(k) * sample_rate / static_cast<double>(n), 50.0);
    spec[k] *= std::pow(f / 1000.0, exponent);
  }
  fft.inverse(spec, x);
  return x;
}

}  // namespace detail

inline SignalDraw synth_signal_draw(const CorpusConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t n = cfg.num_samples();
  const double sr = cfg.sample_rate;
  std::uniform_real_distribution<double> f0_dist(100.0, 400.0), amp(0.5, 1.0), phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> harm(3, 6);

  SignalDraw d;
  d.f0_start = f0_dist(rng);
  d.f0_end = cfg.signal_kind == SignalKind::chirps ? f0_dist(rng) : d.f0_start;
  d.harmonics = harm(rng);
  std::vector<double> amps, phases;
  for (int k = 1; k <= d.harmonics; ++k) {
    amps.push_back(amp(rng) / std::sqrt(static_cast<double>(k)));
    phases.push_back(phase(rng));
  }
  d.envelope = detail::burst_envelope(n, cfg.sample_rate, rng);

  d.wave.sample_rate = cfg.sample_rate;
  d.wave.samples.assign(n, 0.0);
  const double duration = static_cast<double>(n) / sr;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    // Integrated instantaneous frequency of a linear sweep.
    const double cycles = d.f0_start * t + 0.5 * (d.f0_end - d.f0_start) * t * t / duration;
    double s = 0.0;
    for (int k = 1; k <= d.harmonics; ++k) {
      const double fk = k * (d.f0_start + (d.f0_end - d.f0_start) * t / duration);
      if (fk < 0.45 * sr) s += amps[k - 1] * std::sin(2.0 * std::numbers::pi * k * cycles + phases[k - 1]);
    }
    d.wave.samples[i] = s * d.envelope[i];
  }
  detail::normalize_peak(d.wave.samples, 0.5);
  return d;
}

inline Waveform synth_signal(const CorpusConfig& cfg, std::mt19937_64& rng) {
  return synth_signal_draw(cfg, rng).wave;
}

inline NoiseDraw synth_noise_draw(const CorpusConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t n = cfg.num_samples();
  std::uniform_real_distribution<double> tilt(-6.0, 0.0);
  NoiseDraw d;
  d.tilt_db_per_octave = tilt(rng);
  d.wave.sample_rate = cfg.sample_rate;
  d.wave.samples = detail::tilted_noise(n, cfg.sample_rate, d.tilt_db_per_octave, rng);
  if (cfg.noise_kind == NoiseKind::filtered_bursts) {
    // Non-stationary variant: the coloured noise is gated into bursts riding on a floor.
    const std::vector<double> env = detail::burst_envelope(n, cfg.sample_rate, rng);
    for (std::size_t i = 0; i < n; ++i) d.wave.samples[i] *= 0.3 + 0.7 * env[i];
  }
  detail::normalize_peak(d.wave.samples, 0.5);
  return d;
}

inline Waveform synth_noise(const CorpusConfig& cfg, std::mt19937_64& rng) {
  return synth_noise_draw(cfg, rng).wave;
}

// ---------------------------------------------------------------------------
// Manifest

struct ClipRecord {
  std::string id;
  Split split = Split::train;
  Role role = Role::noisy;
  std::string path;  // relative to the corpus root
  std::optional<double> snr_db;         // realized SNR of the stored mixture
  std::optional<double> target_snr_db;  // SNR drawn for the mixture
  std::optional<std::string> pair_id;   // noisy <-> clean

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

using Manifest = std::vector<ClipRecord>;

inline constexpr const char* kManifestName = "manifest.jsonl";

inline nlohmann::json to_json(const ClipRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["split"] = to_string(r.split);
  j["role"] = to_string(r.role);
  j["path"] = r.path;
  j["snr_db"] = r.snr_db ? nlohmann::json(*r.snr_db) : nlohmann::json(nullptr);
  j["target_snr_db"] = r.target_snr_db ? nlohmann::json(*r.target_snr_db) : nlohmann::json(nullptr);
  j["pair_id"] = r.pair_id ? nlohmann::json(*r.pair_id) : nlohmann::json(nullptr);
  return j;
}

inline ClipRecord record_from_json(const nlohmann::json& j) {
  ClipRecord r;
  r.id = j.at("id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.role = parse_role(j.at("role").get<std::string>());
  r.path = j.at("path").get<std::string>();
  if (j.contains("snr_db") && !j["snr_db"].is_null()) r.snr_db = j["snr_db"].get<double>();
  if (j.contains("target_snr_db") && !j["target_snr_db"].is_null())
    r.target_snr_db = j["target_snr_db"].get<double>();
  if (j.contains("pair_id") && !j["pair_id"].is_null()) r.pair_id = j["pair_id"].get<std::string>();
  return r;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError(path.string(), "cannot open manifest for writing");
  for (const auto& r : m) out << to_json(r).dump() << '\n';
  if (!out) throw FileError(path.string(), "failed writing manifest");
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path.string(), "cannot open manifest");
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw FileError(path.string(), "bad manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generation

inline std::string clip_id(Split s, Role r, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return std::string(to_string(s)) + "-" + to_string(r) + "-" + buf;
}

// Independent random streams; the P-side noise stream never feeds a mixture.
enum class Stream : std::uint64_t { clean = 1, mixture_noise = 2, noise_only = 3, snr = 4 };

inline std::mt19937_64 stream_rng(const CorpusConfig& cfg, Split s, Stream st, int index) {
  return std::mt19937_64(derive_seed(
      {cfg.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(st), static_cast<std::uint64_t>(index)}));
}

// One corpus item as stored on disk (after the clipping guard and 16-bit
// quantization), plus the unquantized mixture it was made from.
struct MixtureItem {
  Waveform clean;         // quantized
  Waveform noisy;         // quantized
  Waveform noise_only;    // quantized, independent P-side clip
  Waveform scaled_noise;  // unquantized noise inside the mixture (after guard)
  Waveform clean_exact;   // unquantized clean (after guard)
  double target_snr_db = 0.0;
  double realized_snr_db = 0.0;
};

inline MixtureItem make_item(const CorpusConfig& cfg, Split split, int index) {
  auto clean_rng = stream_rng(cfg, split, Stream::clean, index);
  auto mix_rng = stream_rng(cfg, split, Stream::mixture_noise, index);
  auto noise_rng = stream_rng(cfg, split, Stream::noise_only, index);
  auto snr_rng = stream_rng(cfg, split, Stream::snr, index);

  MixtureItem it;
  const Waveform clean = synth_signal(cfg, clean_rng);
  const Waveform noise = synth_noise(cfg, mix_rng);
  it.target_snr_db = std::uniform_real_distribution<double>(cfg.snr_lo, cfg.snr_hi)(snr_rng);
  MixResult mix = mix_at_snr(clean, noise, it.target_snr_db);

  // Scale all parts together if the mixture would clip; the SNR is unchanged.
  double peak = 0.0;
  for (double v : mix.noisy.samples) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.99 ? 0.99 / peak : 1.0;
  it.clean_exact = clean;
  it.scaled_noise = mix.scaled_noise;
  it.clean = clean;
  it.noisy = mix.noisy;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    it.clean_exact.samples[i] *= gain;
    it.scaled_noise.samples[i] *= gain;
    it.clean.samples[i] = quantize_pcm16(it.clean_exact.samples[i]);
    it.noisy.samples[i] = quantize_pcm16(mix.noisy.samples[i] * gain);
  }
  std::vector<double> residual(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) residual[i] = it.noisy.samples[i] - it.clean.samples[i];
  it.realized_snr_db = snr_db(it.clean.samples, residual);

  // The P clip gets the level this item's mixture noise has: an independent
  // noise draw is mixed with the same clean clip at the same SNR, the clipping
  // guard is computed on that hypothetical mixture, and only the scaled noise
  // is kept.
  const MixResult p_mix = mix_at_snr(clean, synth_noise(cfg, noise_rng), it.target_snr_db);
  double p_peak = 0.0;
  for (double v : p_mix.noisy.samples) p_peak = std::max(p_peak, std::abs(v));
  const double p_gain = p_peak > 0.99 ? 0.99 / p_peak : 1.0;
  it.noise_only = p_mix.scaled_noise;
  for (double& v : it.noise_only.samples) v = quantize_pcm16(v * p_gain);
  return it;
}

// Writes <root>/{train,val,test}/{clean,noise,noisy}/<id>.wav and the manifest.
inline Manifest build_corpus(const CorpusConfig& cfg, const std::filesystem::path& root, int threads = 1) {
  cfg.validate();
  namespace fs = std::filesystem;
  const Split splits[] = {Split::train, Split::val, Split::test};
  const Role roles[] = {Role::clean, Role::noise, Role::noisy};
  try {
    for (Split s : splits)
      for (Role r : roles) fs::create_directories(root / to_string(s) / to_string(r));
  } catch (const fs::filesystem_error& e) {
    throw FileError(root.string(), e.what());
  }

  Manifest manifest;
  for (Split s : splits) {
    const int n = cfg.count(s);
    std::vector<std::array<ClipRecord, 3>> rows(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
      const int idx = static_cast<int>(i);
      const MixtureItem it = make_item(cfg, s, idx);
      auto record = [&](Role r, const Waveform& w) {
        ClipRecord rec;
        rec.id = clip_id(s, r, idx);
        rec.split = s;
        rec.role = r;
        rec.path = (fs::path(to_string(s)) / to_string(r) / (rec.id + ".wav")).generic_string();
        write_wav(root / rec.path, w);
        return rec;
      };
      ClipRecord noisy = record(Role::noisy, it.noisy);
      noisy.snr_db = it.realized_snr_db;
      noisy.target_snr_db = it.target_snr_db;
      noisy.pair_id = clip_id(s, Role::clean, idx);
      ClipRecord clean = record(Role::clean, it.clean);
      clean.pair_id = noisy.id;
      rows[i] = {noisy, record(Role::noise, it.noise_only), clean};
    });
    for (const auto& row : rows) manifest.insert(manifest.end(), row.begin(), row.end());
  }
  write_manifest(root / kManifestName, manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// Loading

// Opens corpus clips by manifest record and logs every path it touches.
class CorpusReader {
 public:
  explicit CorpusReader(std::filesystem::path root)
      : root_(std::move(root)), manifest_(read_manifest(root_ / kManifestName)) {
    for (std::size_t i = 0; i < manifest_.size(); ++i) by_id_[manifest_[i].id] = i;
  }

  const std::filesystem::path& root() const noexcept { return root_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  const std::vector<std::string>& access_log() const noexcept { return access_log_; }

  std::vector<ClipRecord> records(Split s, Role r) const {
    std::vector<ClipRecord> out;
    for (const auto& rec : manifest_)
      if (rec.split == s && rec.role == r) out.push_back(rec);
    return out;
  }

  const ClipRecord& find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw FileError((root_ / kManifestName).string(), "no record with id '" + id + "'");
    return manifest_[it->second];
  }

  const ClipRecord& pair_of(const ClipRecord& r) const {
    if (!r.pair_id) throw FileError((root_ / r.path).string(), "record '" + r.id + "' has no paired clip");
    return find(*r.pair_id);
  }

  Waveform load(const ClipRecord& r) {
    access_log_.push_back(r.path);
    return read_wav(root_ / r.path);
  }

 private:
  std::filesystem::path root_;
  Manifest manifest_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<std::string> access_log_;
};

// Training data for PU learning: noise clips (P) and noisy clips (U) only.
struct PuClips {
  std::vector<Waveform> positive;
  std::vector<Waveform> unlabeled;
};

inline PuClips load_pu_clips(CorpusReader& reader, Split split) {
  PuClips c;
  for (const auto& r : reader.records(split, Role::noise)) c.positive.push_back(reader.load(r));
  for (const auto& r : reader.records(split, Role::noisy)) c.unlabeled.push_back(reader.load(r));
  return c;
}

// Parallel noisy/clean pairs (supervised training and evaluation).
struct PairedClip {
  std::string id;
  Waveform noisy;
  Waveform clean;
};

inline std::vector<PairedClip> load_pairs(CorpusReader& reader, Split split) {
  std::vector<PairedClip> out;
  for (const auto& r : reader.records(split, Role::noisy)) {
    const ClipRecord& clean = reader.pair_of(r);
    PairedClip p;
    p.id = r.id;
    p.noisy = reader.load(r);
    p.clean = reader.load(clean);
    if (p.noisy.size() != p.clean.size())
      throw FileError((reader.root() / r.path).string(), "noisy/clean length mismatch for '" + r.id + "'");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace pulse
