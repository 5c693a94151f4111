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

// Masking-based enhancement of a clip and scale-invariant SNR evaluation.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/dsp.hpp"
#include "pulse/error.hpp"
#include "pulse/model.hpp"
#include "pulse/numeric.hpp"
#include "pulse/parallel.hpp"

namespace pulse {

inline constexpr double kSiSnrCapDb = 100.0;

struct SiSnrTerms {
  double a = 0.0;  // projection coefficient s^T s_hat / |s|^2
  double parallel_energy = 0.0;
  double perp_energy = 0.0;
};

struct SiSnrResult {
  double db = 0.0;
  bool degenerate = false;  // estimate was all zeros
  SiSnrTerms terms;
};

inline SiSnrResult si_snr_detail(std::span<const double> s, std::span<const double> s_hat) {
  detail::require(s.size() == s_hat.size(), "SI-SNR inputs must have equal lengths");
  const double ss = energy(s);
  detail::require(ss > 0.0, "SI-SNR reference has zero energy");

  SiSnrResult r;
  r.terms.a = dot(s, s_hat) / ss;
  r.terms.parallel_energy = r.terms.a * r.terms.a * ss;
  std::vector<double> perp(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) perp[i] = s_hat[i] - r.terms.a * s[i];
  r.terms.perp_energy = energy(perp);

  if (energy(s_hat) == 0.0) {
    r.degenerate = true;
    r.db = -kSiSnrCapDb;
    return r;
  }
  const double par = r.terms.parallel_energy, per = r.terms.perp_energy;
  if (per <= 0.0) {
    r.db = kSiSnrCapDb;
  } else if (par <= 0.0) {
    r.db = -kSiSnrCapDb;
  } else {
    r.db = std::clamp(10.0 * std::log10(par / per), -kSiSnrCapDb, kSiSnrCapDb);
  }
  return r;
}

inline double si_snr(std::span<const double> s, std::span<const double> s_hat) {
  return si_snr_detail(s, s_hat).db;
}

inline double si_snr(const Waveform& s, const Waveform& s_hat) { return si_snr(s.samples, s_hat.samples); }

inline double si_snr_improvement(const Waveform& clean, const Waveform& noisy, const Waveform& enhanced) {
  detail::require(noisy.size() == clean.size() && enhanced.size() == clean.size(),
                  "clean, noisy and enhanced clips must have equal lengths");
  return si_snr(clean, enhanced) - si_snr(clean, noisy);
}

// STFT -> classifier scores -> mask -> masked STFT -> inverse STFT.
template <class T>
Waveform enhance_clip(const ModelParams<T>& params, const Waveform& noisy, const StftConfig& cfg) {
  const ComplexSpectrogram spec = stft(noisy, cfg);
  const ScoreMap scores = forward_clip(params, magnitude(spec), false);
  return istft(apply_mask(spec, mask_from_scores(scores, params.arch.mask_kind)));
}

struct ClipEval {
  std::string id;
  double noisy_db = 0.0;
  double enhanced_db = 0.0;
  double improvement_db = 0.0;
};

struct EvalReport {
  std::vector<ClipEval> clips;
  double mean_improvement_db = 0.0;
  double std_improvement_db = 0.0;

  void summarize() {
    std::vector<double> v;
    for (const auto& c : clips) v.push_back(c.improvement_db);
    mean_improvement_db = mean(v);
    std_improvement_db = sample_stddev(v);
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : clips)
      rows.push_back({{"id", c.id},
                      {"si_snr_noisy_db", c.noisy_db},
                      {"si_snr_enhanced_db", c.enhanced_db},
                      {"si_snri_db", c.improvement_db}});
    return {{"clips", rows},
            {"summary",
             {{"n_clips", clips.size()},
              {"mean_si_snri_db", mean_improvement_db},
              {"std_si_snri_db", std_improvement_db}}}};
  }
};

template <class T>
EvalReport evaluate_pairs(const ModelParams<T>& params, std::span<const PairedClip> pairs, const StftConfig& cfg,
                          int threads = 1) {
  EvalReport report;
  report.clips.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const PairedClip& p = pairs[i];
    const Waveform enhanced = enhance_clip(params, p.noisy, cfg);
    ClipEval& c = report.clips[i];
    c.id = p.id;
    c.noisy_db = si_snr(p.clean, p.noisy);
    c.enhanced_db = si_snr(p.clean, enhanced);
    c.improvement_db = c.enhanced_db - c.noisy_db;
  });
  report.summarize();
  return report;
}

// Evaluates every noisy clip of a split against its clean pair.
template <class T>
EvalReport evaluate_corpus(const ModelParams<T>& params, CorpusReader& reader, Split split, const StftConfig& cfg,
                           int threads = 1) {
  const std::vector<PairedClip> pairs = load_pairs(reader, split);
  detail::require(!pairs.empty(), std::string("split '") + to_string(split) + "' has no noisy clips");
  return evaluate_pairs(params, std::span<const PairedClip>(pairs), cfg, threads);
}

// Diagnostic TF labels from the clean clip (never used for PU training). A
// point is N (-1) if its side x side patch holds any clean bin whose energy
// is above -40 dB of the clip's peak bin energy, else P (+1).
inline LabelGrid ground_truth_labels(const MagnitudeSpectrogram& clean, int side) {
  detail::require(side > 0 && side % 2 == 1, "patch side must be odd");
  const int T = clean.frames(), F = clean.bins(), r = side / 2;
  double peak = 0.0;
  for (double v : clean.values()) peak = std::max(peak, v * v);
  // 2-D prefix counts of above-threshold bins.
  std::vector<int> cum(static_cast<std::size_t>(T + 1) * (F + 1), 0);
  auto at = [&](int t, int f) -> int& { return cum[static_cast<std::size_t>(t) * (F + 1) + f]; };
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) {
      const double e = clean(t, f) * clean(t, f);
      const int hot = peak > 0.0 && e > peak * 1e-4 ? 1 : 0;
      at(t + 1, f + 1) = hot + at(t, f + 1) + at(t + 1, f) - at(t, f);
    }
  LabelGrid out(T, F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) {
      const int t0 = std::max(0, t - r), t1 = std::min(T, t + r + 1);
      const int f0 = std::max(0, f - r), f1 = std::min(F, f + r + 1);
      const int n = at(t1, f1) - at(t0, f1) - at(t1, f0) + at(t0, f0);
      out(t, f) = n > 0 ? -1 : +1;
    }
  return out;
}

// Fraction of TF points where the predicted label equals the reference.
inline double label_accuracy(const LabelGrid& predicted, const LabelGrid& truth) {
  detail::require(predicted.same_shape(truth), "label grids differ in shape");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted.values()[i] == truth.values()[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// Across-trial aggregate of several independently trained models.
struct TrialSummary {
  std::vector<double> trial_means_db;
  double mean_db = 0.0;
  double std_db = 0.0;

  static TrialSummary from_reports(std::span<const EvalReport> reports) {
    TrialSummary s;
    for (const auto& r : reports) s.trial_means_db.push_back(r.mean_improvement_db);
    s.mean_db = mean(s.trial_means_db);
    s.std_db = sample_stddev(s.trial_means_db);
    return s;
  }
};

}  // namespace pulse
