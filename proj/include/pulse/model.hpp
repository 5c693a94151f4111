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

// Convolutional TF-point classifier: power-law compression followed by a
// stack of unpadded convolutions with ReLU and dropout between them.
//
// Activations are stored channel-major as Eigen row-major matrices of shape
// channels x (height * stride); see FeatureMap. Everything is templated on the scalar so tests can run in
// double while training runs in float.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pulse/dsp.hpp"
#include "pulse/error.hpp"
#include "pulse/risk.hpp"
#include "pulse/rng.hpp"

namespace pulse {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// How scores become a mask: sign rule (PU-trained) or logistic (supervised).
enum class MaskKind : std::uint32_t { binary = 0, soft = 1 };

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ArchConfig {
  double compress_alpha = 1.0 / 15.0;
  std::vector<ConvSpec> layers;
  double dropout_rate = 0.2;
  MaskKind mask_kind = MaskKind::binary;

  int receptive_field() const noexcept {
    int rf = 1;
    for (const auto& l : layers) rf += l.kernel - 1;
    return rf;
  }

  void validate() const {
    detail::require(compress_alpha > 0.0 && std::isfinite(compress_alpha),
                    "compression exponent must be positive");
    detail::require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout rate must lie in [0, 1)");
    detail::require(!layers.empty(), "architecture needs at least one convolution");
    detail::require(layers.front().in_channels == 1, "first convolution must take one channel");
    detail::require(layers.back().out_channels == 1, "last convolution must produce one channel");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      detail::require(l.in_channels > 0 && l.out_channels > 0, "channel counts must be positive");
      detail::require(l.kernel > 0 && l.kernel % 2 == 1, "kernel sizes must be odd");
      if (i + 1 < layers.size())
        detail::require(l.out_channels == layers[i + 1].in_channels,
                        "channel chain broken after layer " + std::to_string(i));
    }
  }

  // The 11-layer classifier used for PU training. Eight 3x3 layers give a
  // 17x17 receptive field, so a 17x17 patch maps to a single score.
  static ArchConfig pulse() {
    ArchConfig a;
    a.layers = {{1, 8, 3},    {8, 8, 3},    {8, 16, 3},   {16, 16, 3},
                {16, 32, 3},  {32, 32, 3},  {32, 64, 3},  {64, 64, 3},
                {64, 128, 1}, {128, 128, 1}, {128, 1, 1}};
    a.validate();
    detail::require(a.receptive_field() == 17, "PULSE architecture must have a 17x17 receptive field");
    return a;
  }

  // Supervised baseline: same channels, 3x3 kernels everywhere, soft mask.
  static ArchConfig supervised() {
    ArchConfig a = pulse();
    for (auto& l : a.layers) l.kernel = 3;
    a.mask_kind = MaskKind::soft;
    a.validate();
    return a;
  }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

template <class T>
struct ConvLayer {
  // out x (k * k * in); column index is (dy * k + dx) * in + c.
  RowMatrix<T> weight;
  Vector<T> bias;
};

template <class T>
using LayerGrads = std::vector<ConvLayer<T>>;

template <class T>
struct ModelParams {
  ArchConfig arch;
  std::vector<ConvLayer<T>> layers;
  std::uint64_t rng_seed = 0;

  static ModelParams zeros(const ArchConfig& arch) {
    arch.validate();
    ModelParams m;
    m.arch = arch;
    for (const auto& s : arch.layers) {
      ConvLayer<T> l;
      l.weight = RowMatrix<T>::Zero(s.out_channels, s.in_channels * s.kernel * s.kernel);
      l.bias = Vector<T>::Zero(s.out_channels);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  // Uniform in +-1/sqrt(fan_in) for kernels and biases.
  static ModelParams initialized(const ArchConfig& arch, std::uint64_t seed) {
    ModelParams m = zeros(arch);
    m.rng_seed = seed;
    std::mt19937_64 rng(derive_seed({seed, 0x1417}));
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
      const auto& s = arch.layers[i];
      // Weights use the ReLU gain sqrt(6) on top of 1/sqrt(fan_in) so that
      // activation variance survives eleven layers; biases use 1/sqrt(fan_in).
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_channels * s.kernel * s.kernel));
      std::uniform_real_distribution<double> uw(-std::sqrt(6.0) * bound, std::sqrt(6.0) * bound);
      std::uniform_real_distribution<double> ub(-bound, bound);
      for (Eigen::Index k = 0; k < m.layers[i].weight.size(); ++k)
        m.layers[i].weight.data()[k] = static_cast<T>(uw(rng));
      for (Eigen::Index k = 0; k < m.layers[i].bias.size(); ++k)
        m.layers[i].bias[k] = static_cast<T>(ub(rng));
    }
    return m;
  }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> m;
    m.arch = arch;
    m.rng_seed = rng_seed;
    for (const auto& l : layers) m.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    return m;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

template <class T>
LayerGrads<T> zero_grads(const ModelParams<T>& m) {
  return ModelParams<T>::zeros(m.arch).layers;
}

template <class T>
void accumulate(LayerGrads<T>& into, const LayerGrads<T>& g) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    into[i].weight += g[i].weight;
    into[i].bias += g[i].bias;
  }
}

// Multi-channel 2-D activation. Rows are `stride` values apart; only the
// first `width` entries of each row are meaningful. Inside the network the
// stride stays at the input width while the valid region shrinks, so a KxK
// convolution is K*K GEMMs against shifted column ranges with no im2col copy.
template <class T>
struct FeatureMap {
  int height = 0;
  int width = 0;
  int stride = 0;
  RowMatrix<T> data;  // channels x (height * stride)

  int channels() const noexcept { return static_cast<int>(data.rows()); }

  // Copies the valid region into a channels x (height * width) matrix.
  RowMatrix<T> compact() const {
    RowMatrix<T> out(data.rows(), static_cast<Eigen::Index>(height) * width);
    for (Eigen::Index c = 0; c < data.rows(); ++c)
      for (int y = 0; y < height; ++y)
        std::copy_n(data.row(c).data() + static_cast<std::ptrdiff_t>(y) * stride, width,
                    out.row(c).data() + static_cast<std::ptrdiff_t>(y) * width);
    return out;
  }
};

struct ScoreMap : Grid<double> {
  using Grid<double>::Grid;
};

struct LabelGrid : Grid<int> {
  using Grid<int>::Grid;
};

// Spectrogram window centred on one TF point; side = receptive field.
struct Patch {
  Grid<double> window;
  int center_frame = 0;
  int center_bin = 0;
  double center_weight = 0.0;
};

// Identifies one dropout draw: every (seed, stream, layer, element) maps to a
// fixed uniform, so masks do not depend on evaluation order or threads.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

template <class T>
struct ForwardTape {
  std::vector<FeatureMap<T>> inputs;  // input of each conv layer, after ReLU/dropout
  bool train_mode = false;
  double keep_prob = 1.0;
};

inline double compress(double x, double alpha) {
  detail::require(x >= 0.0, "power-law compression needs non-negative input");
  return std::pow(x, alpha);
}

inline Grid<double> compress(const Grid<double>& m, double alpha) {
  Grid<double> out(m.frames(), m.bins());
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[i] = compress(m.values()[i], alpha);
  return out;
}

// Dropout decisions use 16-bit uniforms; the effective keep probability is
// (65536 - threshold) / 65536.
inline std::uint32_t dropout_threshold(double rate) {
  return static_cast<std::uint32_t>(std::ceil(rate * 65536.0));
}

inline double dropout_keep_prob(double rate) {
  return static_cast<double>(65536u - dropout_threshold(rate)) / 65536.0;
}

namespace detail {

// Number of columns holding valid outputs: the last row stops at `width`.
template <class T>
Eigen::Index active_cols(const FeatureMap<T>& f) {
  return static_cast<Eigen::Index>(f.height - 1) * f.stride + f.width;
}

template <class T>
FeatureMap<T> conv_valid(const ConvLayer<T>& layer, int k, const FeatureMap<T>& x) {
  require(x.height >= k && x.width >= k, "feature map smaller than the kernel");
  const Eigen::Index cin = x.channels();
  FeatureMap<T> y;
  y.height = x.height - k + 1;
  y.width = x.width - k + 1;
  y.stride = x.stride;
  y.data.resize(layer.weight.rows(), static_cast<Eigen::Index>(y.height) * y.stride);
  const Eigen::Index n = active_cols(y);
  auto out = y.data.leftCols(n);
  out.colwise() = layer.bias;
  for (int dy = 0; dy < k; ++dy)
    for (int dx = 0; dx < k; ++dx)
      out.noalias() += layer.weight.middleCols((dy * k + dx) * cin, cin) *
                       x.data.middleCols(static_cast<Eigen::Index>(dy) * x.stride + dx, n);
  y.data.rightCols(y.data.cols() - n).setZero();
  return y;
}

template <class T>
void relu_dropout(FeatureMap<T>& y, std::size_t layer, bool train, double rate, DropoutKey key) {
  y.data = y.data.cwiseMax(T(0));
  if (!train || rate == 0.0) return;
  const std::uint64_t base = derive_seed({key.seed, key.stream, layer});
  const std::uint32_t threshold = dropout_threshold(rate);
  const T scale = static_cast<T>(1.0 / dropout_keep_prob(rate));
  T* v = y.data.data();
  const std::size_t n = static_cast<std::size_t>(y.data.size());
  for (std::size_t i = 0; i < n; i += 4) {
    const std::uint64_t h = mix64(base + i / 4);
    for (std::size_t j = 0; j < 4 && i + j < n; ++j) {
      const bool keep = ((h >> (16 * j)) & 0xffffu) >= threshold;
      v[i + j] = keep ? v[i + j] * scale : T(0);
    }
  }
}

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& what, std::size_t layer) {
  if (!m.allFinite())
    throw NumericFailure("non-finite " + what + " in conv layer " + std::to_string(layer));
}

template <class T>
void zero_invalid_columns(FeatureMap<T>& f) {
  if (f.width == f.stride) return;
  for (Eigen::Index c = 0; c < f.data.rows(); ++c) {
    T* row = f.data.row(c).data();
    for (int y = 0; y < f.height; ++y)
      std::fill_n(row + static_cast<std::ptrdiff_t>(y) * f.stride + f.width, f.stride - f.width, T(0));
  }
}

}  // namespace detail

// Rectangle of TF points: frames [frame0, frame0 + frames), bins
// [bin0, bin0 + bins).
struct TfRegion {
  int frame0 = 0;
  int frames = 0;
  int bin0 = 0;
  int bins = 0;

  static TfRegion whole(const Grid<double>& g) { return {0, g.frames(), 0, g.bins()}; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(frames) * static_cast<std::size_t>(bins); }
  bool inside(const Grid<double>& g) const noexcept {
    return frame0 >= 0 && bin0 >= 0 && frames >= 1 && bins >= 1 && frame0 + frames <= g.frames() &&
           bin0 + bins <= g.bins();
  }
};

// Compresses the region grown by `pad` on every side. Points outside the
// spectrogram are zero, so the network sees exactly what clip-wise
// processing with `pad` zeros around the whole spectrogram would show it.
template <class T>
FeatureMap<T> prepare_input(const Grid<double>& magnitude, double alpha, int pad, const TfRegion& r) {
  detail::require(r.inside(magnitude), "region lies outside the spectrogram");
  FeatureMap<T> x;
  x.height = r.frames + 2 * pad;
  x.width = r.bins + 2 * pad;
  x.stride = x.width;
  x.data = RowMatrix<T>::Zero(1, static_cast<Eigen::Index>(x.height) * x.width);
  for (int y = 0; y < x.height; ++y) {
    const int t = r.frame0 - pad + y;
    if (t < 0 || t >= magnitude.frames()) continue;
    for (int c = 0; c < x.width; ++c) {
      const int f = r.bin0 - pad + c;
      if (f < 0 || f >= magnitude.bins()) continue;
      x.data(0, static_cast<Eigen::Index>(y) * x.width + c) = static_cast<T>(compress(magnitude(t, f), alpha));
    }
  }
  return x;
}

// Compresses a magnitude grid and surrounds it with `pad` zeros on every side.
template <class T>
FeatureMap<T> prepare_input(const Grid<double>& magnitude, double alpha, int pad) {
  return prepare_input<T>(magnitude, alpha, pad, TfRegion::whole(magnitude));
}

// Runs the convolution stack on an already compressed input. When `tape` is
// given, the input of every layer is recorded for backward().
template <class T>
FeatureMap<T> run_network(const ModelParams<T>& m, FeatureMap<T> x, bool train_mode, DropoutKey key,
                          ForwardTape<T>* tape = nullptr) {
  const auto& specs = m.arch.layers;
  detail::require(m.layers.size() == specs.size(), "parameter count does not match architecture");
  detail::require(x.stride >= x.width, "feature map stride smaller than its width");
  if (tape) {
    tape->inputs.clear();
    tape->train_mode = train_mode;
    tape->keep_prob = train_mode ? dropout_keep_prob(m.arch.dropout_rate) : 1.0;
  }
  for (std::size_t l = 0; l < specs.size(); ++l) {
    FeatureMap<T> y = detail::conv_valid(m.layers[l], specs[l].kernel, x);
    detail::require_finite(y.data, "activation", l);
    if (l + 1 < specs.size()) detail::relu_dropout(y, l, train_mode, m.arch.dropout_rate, key);
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

// Exact gradient of sum(d_output .* output) with respect to every kernel and
// bias, given the tape of the forward pass. d_output is compact: one channel,
// height x width of the network output.
template <class T>
LayerGrads<T> backward(const ModelParams<T>& m, const ForwardTape<T>& tape, const RowMatrix<T>& d_output) {
  const auto& specs = m.arch.layers;
  detail::require(tape.inputs.size() == specs.size(), "tape does not match the network depth");

  // Output geometry follows from the last layer input.
  const FeatureMap<T>& last_in = tape.inputs.back();
  FeatureMap<T> dz;
  dz.height = last_in.height - specs.back().kernel + 1;
  dz.width = last_in.width - specs.back().kernel + 1;
  dz.stride = last_in.stride;
  detail::require(d_output.rows() == 1 && d_output.cols() == static_cast<Eigen::Index>(dz.height) * dz.width,
                  "output gradient shape does not match the forward pass");
  dz.data = RowMatrix<T>::Zero(1, static_cast<Eigen::Index>(dz.height) * dz.stride);
  for (int y = 0; y < dz.height; ++y)
    std::copy_n(d_output.data() + static_cast<std::ptrdiff_t>(y) * dz.width, dz.width,
                dz.data.data() + static_cast<std::ptrdiff_t>(y) * dz.stride);

  LayerGrads<T> grads(specs.size());
  const T dropout_scale = static_cast<T>(1.0 / tape.keep_prob);
  for (std::size_t li = specs.size(); li-- > 0;) {
    const FeatureMap<T>& a = tape.inputs[li];
    const int k = specs[li].kernel;
    const Eigen::Index cin = a.channels();
    const Eigen::Index n = detail::active_cols(dz);
    const auto dzn = dz.data.leftCols(n);

    grads[li].weight.resize(m.layers[li].weight.rows(), m.layers[li].weight.cols());
    for (int dy = 0; dy < k; ++dy)
      for (int dx = 0; dx < k; ++dx)
        grads[li].weight.middleCols((dy * k + dx) * cin, cin).noalias() =
            dzn * a.data.middleCols(static_cast<Eigen::Index>(dy) * a.stride + dx, n).transpose();
    grads[li].bias = dzn.rowwise().sum().transpose();
    detail::require_finite(grads[li].weight, "gradient", li);
    detail::require_finite(grads[li].bias, "gradient", li);
    if (li == 0) break;

    FeatureMap<T> da;
    da.height = a.height;
    da.width = a.width;
    da.stride = a.stride;
    da.data = RowMatrix<T>::Zero(a.data.rows(), a.data.cols());
    for (int dy = 0; dy < k; ++dy)
      for (int dx = 0; dx < k; ++dx)
        da.data.middleCols(static_cast<Eigen::Index>(dy) * da.stride + dx, n).noalias() +=
            m.layers[li].weight.middleCols((dy * k + dx) * cin, cin).transpose() * dzn;
    // a = dropout(relu(z)) is positive exactly where the unit was kept and z > 0.
    const T scale = tape.train_mode ? dropout_scale : T(1);
    da.data = (a.data.array() > T(0)).select(da.data.array() * scale, T(0)).matrix();
    detail::zero_invalid_columns(da);
    dz = std::move(da);
  }
  return grads;
}

template <class T>
struct ClipForward {
  ScoreMap scores;
  ForwardTape<T> tape;
};

// Scores for every TF point of `region`. The input is the region plus half
// the receptive field of real context (zeros beyond the clip edges), so the
// result equals the matching block of forward_clip.
template <class T>
ClipForward<T> forward_region_recorded(const ModelParams<T>& m, const Grid<double>& magnitude, const TfRegion& region,
                                       bool train_mode, DropoutKey key = {}, bool record = true) {
  const int pad = m.arch.receptive_field() / 2;
  ClipForward<T> r;
  const FeatureMap<T> out = run_network(m, prepare_input<T>(magnitude, m.arch.compress_alpha, pad, region),
                                        train_mode, key, record ? &r.tape : nullptr);
  detail::require(out.height == region.frames && out.width == region.bins,
                  "network output shape differs from the requested region");
  const RowMatrix<T> scores = out.compact();
  r.scores = ScoreMap(region.frames, region.bins);
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    r.scores.values()[i] = static_cast<double>(scores.data()[i]);
  return r;
}

// Clip-wise evaluation: the compressed spectrogram is zero-padded by half the
// receptive field so that every TF point gets the score of its zero-padded
// patch and the output has the spectrogram's shape.
template <class T>
ClipForward<T> forward_clip_recorded(const ModelParams<T>& m, const Grid<double>& magnitude, bool train_mode,
                                     DropoutKey key = {}, bool record = true) {
  detail::require(magnitude.frames() >= 1 && magnitude.bins() >= 1, "spectrogram must be at least 1x1");
  return forward_region_recorded(m, magnitude, TfRegion::whole(magnitude), train_mode, key, record);
}

template <class T>
ScoreMap forward_clip(const ModelParams<T>& m, const Grid<double>& magnitude, bool train_mode,
                      DropoutKey key = {}) {
  return forward_clip_recorded(m, magnitude, train_mode, key, false).scores;
}

inline Patch extract_patch(const Grid<double>& magnitude, int frame, int bin, int side) {
  detail::require(side > 0 && side % 2 == 1, "patch side must be odd");
  detail::require(frame >= 0 && frame < magnitude.frames() && bin >= 0 && bin < magnitude.bins(),
                  "patch centre outside the spectrogram");
  Patch p;
  p.window = Grid<double>(side, side, 0.0);
  p.center_frame = frame;
  p.center_bin = bin;
  p.center_weight = magnitude(frame, bin);
  const int r = side / 2;
  for (int dt = -r; dt <= r; ++dt)
    for (int df = -r; df <= r; ++df) {
      const int t = frame + dt, f = bin + df;
      if (t >= 0 && t < magnitude.frames() && f >= 0 && f < magnitude.bins())
        p.window(dt + r, df + r) = magnitude(t, f);
    }
  return p;
}

// Patch-wise evaluation: the patch must match the receptive field exactly.
template <class T>
double forward_patch(const ModelParams<T>& m, const Patch& p, bool train_mode, DropoutKey key = {}) {
  const int rf = m.arch.receptive_field();
  if (p.window.frames() != rf || p.window.bins() != rf)
    throw InvalidArgument("patch must be " + std::to_string(rf) + "x" + std::to_string(rf));
  const FeatureMap<T> out =
      run_network(m, prepare_input<T>(p.window, m.arch.compress_alpha, 0), train_mode, key);
  return static_cast<double>(out.data(0, 0));
}

inline LabelGrid predict_labels(const ScoreMap& s) {
  LabelGrid l(s.frames(), s.bins());
  for (std::size_t i = 0; i < s.size(); ++i) l.values()[i] = sign(s.values()[i]);
  return l;
}

// Keeps TF points predicted negative (signal present), removes positives.
inline Mask mask_from_labels(const LabelGrid& labels) {
  Mask m(labels.frames(), labels.bins());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels.values()[i];
    if (y != 1 && y != -1) throw InvalidArgument("label must be +1 or -1, got " + std::to_string(y));
    m.values()[i] = y == -1 ? 1.0 : 0.0;
  }
  return m;
}

inline Mask soft_mask(const ScoreMap& s) {
  Mask m(s.frames(), s.bins());
  for (std::size_t i = 0; i < s.size(); ++i) m.values()[i] = sigmoid(s.values()[i]);
  return m;
}

inline Mask mask_from_scores(const ScoreMap& s, MaskKind kind) {
  return kind == MaskKind::soft ? soft_mask(s) : mask_from_labels(predict_labels(s));
}

}  // namespace pulse
