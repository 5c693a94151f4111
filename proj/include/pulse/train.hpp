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

// Training: PU objective gradients with the non-negative correction step,
// the supervised signal-approximation baseline, Adam, and the epoch loop with
// validation-based checkpoint selection.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pulse/adam.hpp"
#include "pulse/checkpoint.hpp"
#include "pulse/corpus.hpp"
#include "pulse/dsp.hpp"
#include "pulse/enhance.hpp"
#include "pulse/error.hpp"
#include "pulse/model.hpp"
#include "pulse/numeric.hpp"
#include "pulse/parallel.hpp"
#include "pulse/risk.hpp"
#include "pulse/rng.hpp"

namespace pulse {

enum class Method { pulse_nnpu, pulse_upu, supervised };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::pulse_nnpu: return "pulse_nnpu";
    case Method::pulse_upu: return "pulse_upu";
    case Method::supervised: return "supervised";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "pulse_nnpu") return Method::pulse_nnpu;
  if (s == "pulse_upu") return Method::pulse_upu;
  if (s == "supervised") return Method::supervised;
  throw InvalidArgument("unknown method '" + s + "' (expected pulse_nnpu, pulse_upu or supervised)");
}

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;  // clips per step; PU batches split them evenly between P and U
  double learning_rate = 0.0018;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Method method = Method::pulse_nnpu;
  RiskConfig risk;
  StftConfig stft{512, 128};
  int threads = 1;
  // Training tiles in TF points; 0 uses whole clips along that axis. Every
  // epoch still visits every TF point of the training set exactly once.
  int tile_frames = 0;
  int tile_bins = 0;
  std::optional<ArchConfig> arch;  // defaults depend on the method

  // Learning rates per method follow the reference experiment.
  static TrainConfig defaults_for(Method m) {
    TrainConfig c;
    c.method = m;
    if (m == Method::supervised) c.learning_rate = 0.0032;
    return c;
  }

  ArchConfig architecture() const {
    if (arch) return *arch;
    return method == Method::supervised ? ArchConfig::supervised() : ArchConfig::pulse();
  }

  // The method decides whether the PU bracket is clamped.
  RiskConfig effective_risk() const {
    RiskConfig r = risk;
    r.nn_mode = method == Method::pulse_upu ? NnMode::unclamped : NnMode::clamped;
    return r;
  }

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }

  void validate() const {
    detail::require(epochs >= 1, "epochs must be at least 1");
    detail::require(batch_size >= 1, "batch size must be at least 1");
    detail::require(method == Method::supervised || batch_size >= 2, "PU batches need at least 2 clips");
    detail::require(threads >= 1, "thread count must be at least 1");
    detail::require(tile_frames >= 0 && tile_bins >= 0, "tile sizes must be non-negative");
    adam().validate();
    risk.validate();
    stft.validate();
    architecture().validate();
  }
};

// ---------------------------------------------------------------------------
// Objectives

enum class PuGradientMode {
  automatic,     // non-negative rule: correction step when the bracket < -beta
  full,          // gradient of pos_term + bracket
  bracket_only,  // gradient of -gamma * bracket
};

template <class T>
struct PuObjective {
  RiskBreakdown risk;
  bool correction = false;
  std::size_t n_positive = 0;
  std::size_t n_unlabeled = 0;
  LayerGrads<T> grads;
};

namespace detail {

inline DropoutKey clip_key(DropoutKey step, std::uint64_t side, std::size_t index) {
  return {step.seed, derive_seed({step.stream, side, static_cast<std::uint64_t>(index)})};
}

inline double tf_weight(const Grid<double>& magnitude, const TfRegion& r, std::size_t i, LossKind kind) {
  if (kind != LossKind::weighted_sigmoid) return 1.0;
  const int bins = r.bins;
  return magnitude(r.frame0 + static_cast<int>(i) / bins, r.bin0 + static_cast<int>(i) % bins);
}

}  // namespace detail

// A block of TF points from one spectrogram. Training on blocks drawn from
// many clips keeps per-step cost low without changing what the risk averages.
struct TfSample {
  const Grid<double>* clip = nullptr;
  TfRegion region;
};

inline std::vector<TfSample> whole_clips(std::span<const Grid<double>* const> clips) {
  std::vector<TfSample> out;
  out.reserve(clips.size());
  for (const auto* c : clips) out.push_back({c, TfRegion::whole(*c)});
  return out;
}

// Forward pass over a PU batch, risk breakdown over all TF points, and the
// gradient of the objective chosen by `mode`. Every TF point of a P sample is
// a positive example; every TF point of a U sample is unlabelled.
template <class T>
PuObjective<T> pu_objective_gradient(const ModelParams<T>& params, std::span<const TfSample> p_samples,
                                     std::span<const TfSample> u_samples, const RiskConfig& cfg, bool train_mode,
                                     DropoutKey key, int threads = 1,
                                     PuGradientMode mode = PuGradientMode::automatic) {
  cfg.validate();
  detail::require(!p_samples.empty(), "PU batch needs at least one noise (P) clip");
  detail::require(!u_samples.empty(), "PU batch needs at least one noisy (U) clip");

  const std::size_t np_clips = p_samples.size(), n_clips = p_samples.size() + u_samples.size();
  auto sample = [&](std::size_t i) -> const TfSample& {
    return i < np_clips ? p_samples[i] : u_samples[i - np_clips];
  };

  std::vector<ClipForward<T>> fw(n_clips);
  // Per clip: sum of l(f,+1), sum of l(f,-1), TF count.
  std::vector<double> pos_sum(n_clips), neg_sum(n_clips);
  parallel_for(n_clips, threads, [&](std::size_t i) {
    const bool is_p = i < np_clips;
    const TfSample& smp = sample(i);
    fw[i] = forward_region_recorded(params, *smp.clip, smp.region, train_mode,
                                    detail::clip_key(key, is_p ? 1 : 2, is_p ? i : i - np_clips));
    const auto scores = fw[i].scores.values();
    std::vector<double> lp(scores.size()), ln(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double w = detail::tf_weight(*smp.clip, smp.region, j, cfg.loss);
      lp[j] = w * sigmoid_loss(scores[j], +1);
      ln[j] = w * sigmoid_loss(scores[j], -1);
    }
    pos_sum[i] = is_p ? pairwise_sum(lp) : 0.0;
    neg_sum[i] = pairwise_sum(ln);
  });

  PuObjective<T> obj;
  double p_pos = 0.0, p_neg = 0.0, u_neg = 0.0;
  for (std::size_t i = 0; i < n_clips; ++i) {
    if (i < np_clips) {
      p_pos += pos_sum[i];
      p_neg += neg_sum[i];
      obj.n_positive += sample(i).region.size();
    } else {
      u_neg += neg_sum[i];
      obj.n_unlabeled += sample(i).region.size();
    }
  }
  const double np = static_cast<double>(obj.n_positive), nu = static_cast<double>(obj.n_unlabeled);
  obj.risk = combine_pu_terms(cfg.class_prior, p_pos / np, p_neg / np, u_neg / nu, cfg.nn_mode);
  if (!std::isfinite(obj.risk.total) || !std::isfinite(obj.risk.bracket))
    throw NumericFailure("non-finite PU risk");

  switch (mode) {
    case PuGradientMode::automatic:
      obj.correction = cfg.nn_mode == NnMode::clamped && obj.risk.bracket < -cfg.correction_beta;
      break;
    case PuGradientMode::full: obj.correction = false; break;
    case PuGradientMode::bracket_only: obj.correction = true; break;
  }
  const double c_pos = obj.correction ? 0.0 : 1.0;
  const double c_bracket = obj.correction ? -cfg.correction_gamma : 1.0;
  const double pi = cfg.class_prior;

  std::vector<LayerGrads<T>> per_clip(n_clips);
  parallel_for(n_clips, threads, [&](std::size_t i) {
    const bool is_p = i < np_clips;
    const TfSample& smp = sample(i);
    const auto scores = fw[i].scores.values();
    RowMatrix<T> d(1, static_cast<Eigen::Index>(scores.size()));
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double w = detail::tf_weight(*smp.clip, smp.region, j, cfg.loss);
      // d/df l(f,+1) = -s(1-s), d/df l(f,-1) = s(1-s) with s = sigmoid(f).
      const double s = sigmoid(scores[j]);
      const double ds = w * s * (1.0 - s);
      const double g = is_p ? (pi / np) * (-c_pos * ds - c_bracket * ds) : c_bracket * ds / nu;
      d(0, static_cast<Eigen::Index>(j)) = static_cast<T>(g);
    }
    per_clip[i] = backward(params, fw[i].tape, d);
    fw[i] = ClipForward<T>{};
  });
  obj.grads = zero_grads(params);
  for (const auto& g : per_clip) accumulate(obj.grads, g);
  return obj;
}

// Whole-clip batches: every TF point of a P clip is a positive example and
// every TF point of a U clip is unlabelled.
template <class T>
PuObjective<T> pu_objective_gradient(const ModelParams<T>& params, std::span<const Grid<double>* const> p_clips,
                                     std::span<const Grid<double>* const> u_clips, const RiskConfig& cfg,
                                     bool train_mode, DropoutKey key, int threads = 1,
                                     PuGradientMode mode = PuGradientMode::automatic) {
  const std::vector<TfSample> p = whole_clips(p_clips), u = whole_clips(u_clips);
  return pu_objective_gradient(params, std::span<const TfSample>(p), std::span<const TfSample>(u), cfg, train_mode,
                               key, threads, mode);
}

struct SupervisedClip {
  MagnitudeSpectrogram noisy;
  MagnitudeSpectrogram clean;
};

template <class T>
struct SupervisedObjective {
  double loss = 0.0;
  LayerGrads<T> grads;
};

struct SupervisedSample {
  const SupervisedClip* clip = nullptr;
  TfRegion region;
};

// Signal approximation loss: mean over TF points of (sigmoid(f) |x| - |s|)^2.
template <class T>
SupervisedObjective<T> supervised_objective_gradient(const ModelParams<T>& params,
                                                     std::span<const SupervisedSample> batch, bool train_mode,
                                                     DropoutKey key, int threads = 1) {
  detail::require(!batch.empty(), "supervised batch is empty");
  std::size_t n = 0;
  for (const auto& b : batch) {
    detail::require(b.clip->noisy.same_shape(b.clip->clean), "noisy and clean spectrograms differ in shape");
    n += b.region.size();
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> sums(batch.size());
  std::vector<LayerGrads<T>> per_clip(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const SupervisedClip& c = *batch[i].clip;
    const TfRegion& r = batch[i].region;
    ClipForward<T> fw = forward_region_recorded(params, c.noisy, r, train_mode, detail::clip_key(key, 3, i));
    const auto scores = fw.scores.values();
    std::vector<double> sq(scores.size());
    RowMatrix<T> d(1, static_cast<Eigen::Index>(scores.size()));
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const int t = r.frame0 + static_cast<int>(j) / r.bins, f = r.bin0 + static_cast<int>(j) % r.bins;
      const double s = sigmoid(scores[j]);
      const double x = c.noisy(t, f);
      const double e = s * x - c.clean(t, f);
      sq[j] = e * e;
      d(0, static_cast<Eigen::Index>(j)) = static_cast<T>(2.0 * e * x * s * (1.0 - s) * inv_n);
    }
    sums[i] = pairwise_sum(sq);
    per_clip[i] = backward(params, fw.tape, d);
  });
  SupervisedObjective<T> obj;
  obj.loss = std::accumulate(sums.begin(), sums.end(), 0.0) * inv_n;
  if (!std::isfinite(obj.loss)) throw NumericFailure("non-finite supervised loss");
  obj.grads = zero_grads(params);
  for (const auto& g : per_clip) accumulate(obj.grads, g);
  return obj;
}

template <class T>
SupervisedObjective<T> supervised_objective_gradient(const ModelParams<T>& params,
                                                     std::span<const SupervisedClip* const> batch, bool train_mode,
                                                     DropoutKey key, int threads = 1) {
  std::vector<SupervisedSample> samples;
  for (const auto* c : batch) samples.push_back({c, TfRegion::whole(c->noisy)});
  return supervised_objective_gradient(params, std::span<const SupervisedSample>(samples), train_mode, key, threads);
}

struct StepResult {
  RiskBreakdown risk;
  bool correction = false;
};

// One PU step: descend pos_term + bracket, or ascend the bracket when it has
// gone below -beta (clamped mode only).
template <class T>
StepResult train_step_nnpu(ModelParams<T>& params, AdamState<T>& state, std::span<const TfSample> p_samples,
                           std::span<const TfSample> u_samples, const TrainConfig& cfg, DropoutKey key) {
  PuObjective<T> obj =
      pu_objective_gradient(params, p_samples, u_samples, cfg.effective_risk(), true, key, cfg.threads);
  adam_step(params, obj.grads, state, cfg.adam());
  return {obj.risk, obj.correction};
}

template <class T>
StepResult train_step_nnpu(ModelParams<T>& params, AdamState<T>& state, std::span<const Grid<double>* const> p_clips,
                           std::span<const Grid<double>* const> u_clips, const TrainConfig& cfg, DropoutKey key) {
  const std::vector<TfSample> p = whole_clips(p_clips), u = whole_clips(u_clips);
  return train_step_nnpu(params, state, std::span<const TfSample>(p), std::span<const TfSample>(u), cfg, key);
}

template <class T>
double train_supervised(ModelParams<T>& params, AdamState<T>& state, std::span<const SupervisedSample> batch,
                        const TrainConfig& cfg, DropoutKey key) {
  SupervisedObjective<T> obj = supervised_objective_gradient(params, batch, true, key, cfg.threads);
  adam_step(params, obj.grads, state, cfg.adam());
  return obj.loss;
}

template <class T>
double train_supervised(ModelParams<T>& params, AdamState<T>& state, std::span<const SupervisedClip* const> batch,
                        const TrainConfig& cfg, DropoutKey key) {
  SupervisedObjective<T> obj = supervised_objective_gradient(params, batch, true, key, cfg.threads);
  adam_step(params, obj.grads, state, cfg.adam());
  return obj.loss;
}

// Splits a spectrogram into tiles of at most frames x bins (0 = whole axis),
// row by row; edge tiles are smaller.
inline std::vector<TfRegion> tile_regions(const Grid<double>& g, int frames, int bins) {
  const int tf = frames > 0 ? frames : g.frames();
  const int tb = bins > 0 ? bins : g.bins();
  std::vector<TfRegion> out;
  for (int t = 0; t < g.frames(); t += tf)
    for (int f = 0; f < g.bins(); f += tb)
      out.push_back({t, std::min(tf, g.frames() - t), f, std::min(tb, g.bins() - f)});
  return out;
}

// ---------------------------------------------------------------------------
// Epoch loop

struct EpochRecord {
  int epoch = 0;
  double risk = 0.0;           // mean step risk total (supervised: mean loss)
  double pos_term = 0.0;       // mean step positive term
  double bracket = 0.0;        // mean step bracket
  double min_step_risk = 0.0;  // smallest step risk total in the epoch
  double clamp_fraction = 0.0; // fraction of steps that took the correction step
  double val_sisnri_db = 0.0;

  nlohmann::json to_json(Method m) const {
    return {{"epoch", epoch},
            {"method", to_string(m)},
            {"risk", risk},
            {"pos_term", pos_term},
            {"bracket", bracket},
            {"min_step_risk", min_step_risk},
            {"clamp_fraction", clamp_fraction},
            {"val_sisnri_db", val_sisnri_db}};
  }
};

// Highest validation SI-SNRi, earliest epoch on ties. Returns a 1-based epoch.
inline int select_best_epoch(std::span<const double> val_sisnri_db) {
  detail::require(!val_sisnri_db.empty(), "no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_sisnri_db.size(); ++i)
    if (val_sisnri_db[i] > val_sisnri_db[best]) best = i;
  return static_cast<int>(best) + 1;
}

struct TrainingData {
  std::vector<MagnitudeSpectrogram> positive;   // noise clips
  std::vector<MagnitudeSpectrogram> unlabeled;  // noisy clips
  std::vector<SupervisedClip> supervised;       // noisy/clean pairs (baseline only)
  std::vector<PairedClip> validation;
};

inline std::vector<MagnitudeSpectrogram> magnitudes(std::span<const Waveform> clips, const StftConfig& cfg,
                                                    int threads = 1) {
  std::vector<MagnitudeSpectrogram> out(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) { out[i] = magnitude(stft(clips[i], cfg)); });
  return out;
}

// PU methods read only noise and noisy clips of the training split; clean
// clips are read for validation and, for the supervised baseline, training.
inline TrainingData load_training_data(CorpusReader& reader, Method method, const StftConfig& stft_cfg,
                                       int threads = 1) {
  TrainingData d;
  if (method == Method::supervised) {
    const auto pairs = load_pairs(reader, Split::train);
    d.supervised.resize(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
      d.supervised[i].noisy = magnitude(stft(pairs[i].noisy, stft_cfg));
      d.supervised[i].clean = magnitude(stft(pairs[i].clean, stft_cfg));
    });
  } else {
    const PuClips clips = load_pu_clips(reader, Split::train);
    d.positive = magnitudes(clips.positive, stft_cfg, threads);
    d.unlabeled = magnitudes(clips.unlabeled, stft_cfg, threads);
  }
  d.validation = load_pairs(reader, Split::val);
  return d;
}

template <class T>
struct TrainingResult {
  ModelParams<T> best;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics, checkpoints, best pointer
  std::function<void(const EpochRecord&)> on_epoch;
  std::ostream* log = nullptr;  // human-readable progress
};

inline constexpr const char* kMetricsName = "metrics.jsonl";
inline constexpr const char* kBestPointerName = "best";

inline std::string checkpoint_name(int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoints/epoch-%04d.ckpt", epoch);
  return buf;
}

template <class T = float>
TrainingResult<T> run_training(const TrainingData& data, const TrainConfig& cfg, const RunOptions& opts = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  detail::require(!data.validation.empty(), "validation set is empty");
  const FlushDenormals ftz;
  const bool supervised = cfg.method == Method::supervised;
  if (supervised) {
    detail::require(!data.supervised.empty(), "supervised training needs noisy/clean pairs");
  } else {
    detail::require(!data.positive.empty() && !data.unlabeled.empty(),
                    "PU training needs noise (P) and noisy (U) clips");
  }

  std::ofstream metrics;
  if (opts.out_dir) {
    try {
      fs::create_directories(*opts.out_dir / "checkpoints");
    } catch (const fs::filesystem_error& e) {
      throw FileError(opts.out_dir->string(), e.what());
    }
    const fs::path mp = *opts.out_dir / kMetricsName;
    metrics.open(mp, std::ios::trunc);
    if (!metrics) throw FileError(mp.string(), "cannot open metrics file");
  }

  ModelParams<T> params = ModelParams<T>::initialized(cfg.architecture(), cfg.seed);
  AdamState<T> state = AdamState<T>::for_model(params);
  TrainingResult<T> result;
  std::vector<double> val_history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 shuffle_rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), 0x5eed}));
    std::vector<double> totals, pos_terms, brackets;
    int corrections = 0;

    if (supervised) {
      std::vector<SupervisedSample> order;
      for (const auto& c : data.supervised)
        for (const TfRegion& r : tile_regions(c.noisy, cfg.tile_frames, cfg.tile_bins)) order.push_back({&c, r});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t start = 0, step = 0; start < order.size(); start += bs, ++step) {
        const std::size_t count = std::min(bs, order.size() - start);
        const DropoutKey key{cfg.seed, derive_seed({static_cast<std::uint64_t>(epoch), step})};
        totals.push_back(train_supervised(params, state, std::span<const SupervisedSample>(&order[start], count),
                                          cfg, key));
        pos_terms.push_back(totals.back());
        brackets.push_back(0.0);
      }
    } else {
      auto tiles = [&](const std::vector<MagnitudeSpectrogram>& clips) {
        std::vector<TfSample> out;
        for (const auto& c : clips)
          for (const TfRegion& r : tile_regions(c, cfg.tile_frames, cfg.tile_bins)) out.push_back({&c, r});
        std::shuffle(out.begin(), out.end(), shuffle_rng);
        return out;
      };
      const std::vector<TfSample> p_order = tiles(data.positive);
      const std::vector<TfSample> u_order = tiles(data.unlabeled);
      // Even P/U split; the shorter side wraps around.
      const std::size_t half = static_cast<std::size_t>(cfg.batch_size) / 2;
      const std::size_t longest = std::max(p_order.size(), u_order.size());
      for (std::size_t start = 0, step = 0; start < longest; start += half, ++step) {
        const std::size_t count = std::min(half, longest - start);
        std::vector<TfSample> pb, ub;
        for (std::size_t j = 0; j < count; ++j) {
          pb.push_back(p_order[(start + j) % p_order.size()]);
          ub.push_back(u_order[(start + j) % u_order.size()]);
        }
        const DropoutKey key{cfg.seed, derive_seed({static_cast<std::uint64_t>(epoch), step})};
        const StepResult r = train_step_nnpu(params, state, std::span<const TfSample>(pb),
                                             std::span<const TfSample>(ub), cfg, key);
        totals.push_back(r.risk.total);
        pos_terms.push_back(r.risk.pos_term);
        brackets.push_back(r.risk.bracket);
        corrections += r.correction ? 1 : 0;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.risk = mean(totals);
    rec.pos_term = mean(pos_terms);
    rec.bracket = mean(brackets);
    rec.min_step_risk = *std::min_element(totals.begin(), totals.end());
    rec.clamp_fraction = static_cast<double>(corrections) / static_cast<double>(totals.size());
    rec.val_sisnri_db =
        evaluate_pairs(params, std::span<const PairedClip>(data.validation), cfg.stft, cfg.threads).mean_improvement_db;
    if (!std::isfinite(rec.risk)) throw NumericFailure("non-finite training risk at epoch " + std::to_string(epoch));

    result.history.push_back(rec);
    val_history.push_back(rec.val_sisnri_db);
    const bool improved = select_best_epoch(val_history) == epoch;
    if (improved) {
      result.best = params;
      result.best_epoch = epoch;
    }

    if (opts.out_dir) {
      const CheckpointMeta meta{cfg.stft, epoch, rec.val_sisnri_db};
      save_checkpoint(*opts.out_dir / checkpoint_name(epoch), params, meta);
      metrics << rec.to_json(cfg.method).dump() << '\n' << std::flush;
      if (improved) {
        const fs::path bp = *opts.out_dir / kBestPointerName;
        std::ofstream best(bp, std::ios::trunc);
        best << checkpoint_name(epoch) << '\n';
        if (!best) throw FileError(bp.string(), "cannot write best pointer");
      }
    }
    if (opts.log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *opts.log << to_string(cfg.method) << " epoch " << epoch << "/" << cfg.epochs << " risk " << rec.risk
                << " bracket " << rec.bracket << " clamp " << rec.clamp_fraction << " val SI-SNRi "
                << rec.val_sisnri_db << " dB (" << secs << " s)\n";
    }
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  return result;
}

// Resolves a training output directory (via its best pointer) or a
// checkpoint file path.
inline std::filesystem::path resolve_checkpoint(const std::filesystem::path& p) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(p)) return p;
  std::ifstream in(p / kBestPointerName);
  std::string rel;
  if (!in || !std::getline(in, rel) || rel.empty())
    throw CheckpointError((p / kBestPointerName).string(), "missing best-checkpoint pointer");
  return p / rel;
}

}  // namespace pulse
