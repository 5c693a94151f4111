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

// Binary checkpoint container. Layout (all integers and floats little-endian):
//
//   char[8]  magic "PULSECKP"
//   u32      version (1)
//   f64      compress_alpha
//   f64      dropout_rate
//   u32      mask_kind (0 binary, 1 soft)
//   u32      layer count L
//   L x u32[3]  in_channels, out_channels, kernel
//   u32      stft frame_len
//   u32      stft hop
//   u32      stft window (0 hamming)
//   u64      rng_seed
//   u32      epoch
//   f64      validation SI-SNRi (dB)
//   per layer: f64[out * in * k * k] kernel (row-major, see ConvLayer), f64[out] bias
//   u64      FNV-1a hash of every preceding byte
//
// Parameters are stored as f64 whatever the training precision, so a float
// model survives a save/load round trip unchanged.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pulse/dsp.hpp"
#include "pulse/error.hpp"
#include "pulse/model.hpp"

namespace pulse {

inline constexpr std::array<char, 8> kCheckpointMagic = {'P', 'U', 'L', 'S', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  StftConfig stft;
  int epoch = 0;
  double val_sisnri_db = 0.0;
};

struct Checkpoint {
  ModelParams<double> params;
  CheckpointMeta meta;
};

namespace detail {

inline std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::size_t end, std::string path)
      : bytes_(b), end_(end), path_(std::move(path)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > end_) throw CheckpointError(path_, "truncated checkpoint");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace detail

template <class T>
std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<T>& params, const CheckpointMeta& meta) {
  params.arch.validate();
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  w.f64(params.arch.compress_alpha);
  w.f64(params.arch.dropout_rate);
  w.u32(static_cast<std::uint32_t>(params.arch.mask_kind));
  w.u32(static_cast<std::uint32_t>(params.arch.layers.size()));
  for (const auto& s : params.arch.layers) {
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u32(static_cast<std::uint32_t>(s.kernel));
  }
  w.u32(static_cast<std::uint32_t>(meta.stft.frame_len));
  w.u32(static_cast<std::uint32_t>(meta.stft.hop));
  w.u32(static_cast<std::uint32_t>(meta.stft.window));
  w.u64(params.rng_seed);
  w.u32(static_cast<std::uint32_t>(meta.epoch));
  w.f64(meta.val_sisnri_db);
  for (const auto& l : params.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) w.f64(static_cast<double>(l.weight.data()[i]));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f64(static_cast<double>(l.bias[i]));
  }
  const std::uint64_t h = detail::fnv1a(w.bytes().data(), w.bytes().size());
  w.u64(h);
  return std::move(w.bytes());
}

inline Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < kCheckpointMagic.size() + 12) throw CheckpointError(path, "file too short for a checkpoint");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != detail::fnv1a(bytes.data(), body)) throw CheckpointError(path, "checksum mismatch (corrupted checkpoint)");

  detail::ByteReader r(bytes, body, path);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kCheckpointMagic) throw CheckpointError(path, "not a checkpoint (bad magic)");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw CheckpointError(path, "unsupported checkpoint version " + std::to_string(v));

  Checkpoint c;
  ArchConfig& arch = c.params.arch;
  arch.compress_alpha = r.f64();
  arch.dropout_rate = r.f64();
  const std::uint32_t mask_kind = r.u32();
  if (mask_kind > 1) throw CheckpointError(path, "unknown mask kind");
  arch.mask_kind = static_cast<MaskKind>(mask_kind);
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 4096) throw CheckpointError(path, "implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    ConvSpec s;
    s.in_channels = static_cast<int>(r.u32());
    s.out_channels = static_cast<int>(r.u32());
    s.kernel = static_cast<int>(r.u32());
    arch.layers.push_back(s);
  }
  try {
    arch.validate();
  } catch (const InvalidArgument& e) {
    throw CheckpointError(path, std::string("architecture mismatch: ") + e.what());
  }
  c.meta.stft.frame_len = static_cast<int>(r.u32());
  c.meta.stft.hop = static_cast<int>(r.u32());
  if (r.u32() != 0) throw CheckpointError(path, "unknown window kind");
  try {
    c.meta.stft.validate();
  } catch (const InvalidArgument& e) {
    throw CheckpointError(path, std::string("bad STFT config: ") + e.what());
  }
  c.params.rng_seed = r.u64();
  c.meta.epoch = static_cast<int>(r.u32());
  c.meta.val_sisnri_db = r.f64();

  ModelParams<double> shaped = ModelParams<double>::zeros(arch);
  c.params.layers = std::move(shaped.layers);
  for (auto& l : c.params.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.f64();
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = r.f64();
  }
  if (r.pos() != body) throw CheckpointError(path, "trailing bytes after parameters");
  return c;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(params, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(path.string(), "cannot open checkpoint for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError(path.string(), "failed writing checkpoint");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string(), "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, path.string());
}

}  // namespace pulse
