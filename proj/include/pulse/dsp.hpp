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

// STFT analysis/synthesis, masking and SNR-controlled mixing. Everything in
// this header works in double precision.

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pulse/error.hpp"
#include "pulse/numeric.hpp"

namespace pulse {

using Complex = std::complex<double>;

// Mono time-domain clip.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    detail::require(sample_rate > 0, "waveform sample rate must be positive");
    detail::require(!samples.empty(), "waveform must contain at least one sample");
    for (double s : samples)
      detail::require(std::isfinite(s), "waveform contains a non-finite sample");
  }
};

// Dense row-major grid indexed (frame, bin).
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int frames, int bins, T fill = T{})
      : frames_(frames), bins_(bins),
        values_(static_cast<std::size_t>(frames) * static_cast<std::size_t>(bins), fill) {
    detail::require(frames >= 0 && bins >= 0, "grid dimensions must be non-negative");
  }

  int frames() const noexcept { return frames_; }
  int bins() const noexcept { return bins_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator()(int t, int f) { return values_[index(t, f)]; }
  const T& operator()(int t, int f) const { return values_[index(t, f)]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  template <class U>
  bool same_shape(const Grid<U>& o) const noexcept {
    return frames_ == o.frames() && bins_ == o.bins();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int t, int f) const noexcept {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(bins_) +
           static_cast<std::size_t>(f);
  }

  int frames_ = 0;
  int bins_ = 0;
  std::vector<T> values_;
};

enum class WindowKind { hamming };

struct StftConfig {
  int frame_len = 1024;
  int hop = 256;
  WindowKind window = WindowKind::hamming;

  int bins() const noexcept { return frame_len / 2 + 1; }
  // Zeros prepended and appended before framing.
  int edge_pad() const noexcept { return frame_len - hop; }

  void validate() const {
    detail::require(frame_len >= 2, "STFT frame length must be at least 2");
    detail::require(hop > 0 && hop <= frame_len, "STFT hop must satisfy 0 < hop <= frame_len");
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

struct ComplexSpectrogram : Grid<Complex> {
  using Grid<Complex>::Grid;
  StftConfig config;
  std::size_t original_len = 0;
  int sample_rate = 1;
};

struct MagnitudeSpectrogram : Grid<double> {
  using Grid<double>::Grid;
};

// Per-TF multiplier in [0, 1].
struct Mask : Grid<double> {
  using Grid<double>::Grid;
};

inline std::vector<double> make_window(WindowKind kind, int length) {
  detail::require(length >= 2, "window length must be at least 2");
  std::vector<double> w(static_cast<std::size_t>(length));
  switch (kind) {
    case WindowKind::hamming:
      for (int n = 0; n < length; ++n)
        w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
      break;
  }
  return w;
}

namespace detail {

// fftw planning is not thread safe; execution with separate buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Real FFT of fixed length n. Inverse is normalized by 1/n.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    require(n >= 1, "FFT length must be positive");
    real_ = fftw_alloc_real(static_cast<std::size_t>(n));
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }

  int size() const noexcept { return n_; }

  void forward(std::span<const double> in, std::span<Complex> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(forward_);
    for (int k = 0; k <= n_ / 2; ++k) out[k] = Complex(spec_[k][0], spec_[k][1]);
  }

  void inverse(std::span<const Complex> in, std::span<double> out) {
    for (int k = 0; k <= n_ / 2; ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = real_[i] * scale;
  }

 private:
  int n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace detail

inline int stft_num_frames(std::size_t len, const StftConfig& cfg) {
  const std::size_t padded = len + 2 * static_cast<std::size_t>(cfg.edge_pad());
  if (padded <= static_cast<std::size_t>(cfg.frame_len)) return 1;
  const std::size_t extra = padded - static_cast<std::size_t>(cfg.frame_len);
  return 1 + static_cast<int>((extra + cfg.hop - 1) / cfg.hop);
}

// Frame t covers samples [t*hop, t*hop + frame_len) of the signal after
// frame_len - hop zeros are added on both sides (and at the tail as needed).
inline ComplexSpectrogram stft(const Waveform& x, const StftConfig& cfg) {
  cfg.validate();
  x.validate();
  const int frames = stft_num_frames(x.size(), cfg);
  const int n = cfg.frame_len;
  const std::vector<double> window = make_window(cfg.window, n);

  ComplexSpectrogram out(frames, cfg.bins());
  out.config = cfg;
  out.original_len = x.size();
  out.sample_rate = x.sample_rate;

  detail::RealFft fft(n);
  std::vector<double> frame(static_cast<std::size_t>(n));
  const long pad = cfg.edge_pad();
  const long len = static_cast<long>(x.size());
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop - pad;
    for (int i = 0; i < n; ++i) {
      const long src = start + i;
      frame[i] = (src >= 0 && src < len) ? x.samples[src] * window[i] : 0.0;
    }
    fft.forward(frame, out.values().subspan(static_cast<std::size_t>(t) * out.bins(), out.bins()));
  }
  return out;
}

// Least-squares weighted overlap-add: sum of windowed inverse frames divided
// by the sum of squared windows, truncated to the original length.
inline Waveform istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  detail::require(spec.bins() == cfg.bins(), "spectrogram bin count does not match its STFT config");
  detail::require(spec.frames() >= 1, "spectrogram has no frames");
  const int n = cfg.frame_len;
  const std::vector<double> window = make_window(cfg.window, n);
  const std::size_t total =
      static_cast<std::size_t>(spec.frames() - 1) * cfg.hop + static_cast<std::size_t>(n);

  std::vector<double> acc(total, 0.0), norm(total, 0.0), frame(static_cast<std::size_t>(n));
  detail::RealFft fft(n);
  for (int t = 0; t < spec.frames(); ++t) {
    fft.inverse(spec.values().subspan(static_cast<std::size_t>(t) * spec.bins(), spec.bins()), frame);
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      acc[start + i] += frame[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  const std::size_t pad = static_cast<std::size_t>(cfg.edge_pad());
  detail::require(pad + spec.original_len <= total,
                  "spectrogram is too short for its recorded original length");
  Waveform y;
  y.sample_rate = spec.sample_rate;
  y.samples.resize(spec.original_len);
  for (std::size_t i = 0; i < spec.original_len; ++i) {
    const double den = norm[pad + i];
    if (den < 1e-12)
      throw DegenerateWindow("overlap-add window energy below 1e-12 at sample " + std::to_string(i));
    y.samples[i] = acc[pad + i] / den;
  }
  return y;
}

inline MagnitudeSpectrogram magnitude(const Grid<Complex>& spec) {
  MagnitudeSpectrogram m(spec.frames(), spec.bins());
  auto in = spec.values();
  auto out = m.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::abs(in[i]);
  return m;
}

inline ComplexSpectrogram apply_mask(const ComplexSpectrogram& spec, const Mask& mask) {
  detail::require(spec.same_shape(mask), "mask shape does not match spectrogram shape");
  ComplexSpectrogram out = spec;
  auto v = out.values();
  auto m = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
  return out;
}

struct MixResult {
  Waveform noisy;
  Waveform scaled_noise;
  double noise_gain = 0.0;
};

// Scales noise so that 10*log10(P_signal / P_scaled_noise) = snr_db and adds it.
inline MixResult mix_at_snr(const Waveform& signal, const Waveform& noise, double snr_db) {
  detail::require(signal.size() == noise.size(), "signal and noise lengths differ");
  detail::require(signal.sample_rate == noise.sample_rate, "signal and noise sample rates differ");
  detail::require(std::isfinite(snr_db), "SNR must be finite");
  const double ps = energy(signal.samples);
  const double pn = energy(noise.samples);
  detail::require(ps > 0.0, "signal has zero energy");
  detail::require(pn > 0.0, "noise has zero energy");

  MixResult r;
  r.noise_gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  r.noisy.sample_rate = r.scaled_noise.sample_rate = signal.sample_rate;
  r.noisy.samples.resize(signal.size());
  r.scaled_noise.samples.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    r.scaled_noise.samples[i] = r.noise_gain * noise.samples[i];
    r.noisy.samples[i] = signal.samples[i] + r.scaled_noise.samples[i];
  }
  return r;
}

inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(energy(signal) / energy(noise));
}

}  // namespace pulse
