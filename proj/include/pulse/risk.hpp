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

// Surrogate losses and empirical risk estimators for learning from positive
// and unlabelled data. Positive (+1) means "signal absent" throughout.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulse/error.hpp"
#include "pulse/numeric.hpp"

namespace pulse {

enum class LossKind { sigmoid, weighted_sigmoid };
enum class NnMode { clamped, unclamped };

inline const char* to_string(LossKind k) { return k == LossKind::sigmoid ? "sigmoid" : "weighted_sigmoid"; }

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "sigmoid") return LossKind::sigmoid;
  if (s == "weighted_sigmoid") return LossKind::weighted_sigmoid;
  throw InvalidArgument("unknown loss '" + s + "' (expected sigmoid or weighted_sigmoid)");
}

struct RiskConfig {
  double class_prior = 0.7;
  LossKind loss = LossKind::weighted_sigmoid;
  NnMode nn_mode = NnMode::clamped;
  // Correction fires when the bracket drops below -beta; its step is scaled by gamma.
  double correction_beta = 0.0;
  double correction_gamma = 1.0;

  void validate() const {
    detail::require(class_prior > 0.0 && class_prior < 1.0, "class prior must lie in (0, 1)");
    detail::require(correction_beta >= 0.0, "correction beta must be non-negative");
    detail::require(correction_gamma > 0.0 && correction_gamma <= 1.0,
                    "correction gamma must lie in (0, 1]");
  }
};

struct LabeledScore {
  double score = 0.0;
  int label = +1;
  double weight = 1.0;
};

struct RiskBreakdown {
  double total = 0.0;
  double pos_term = 0.0;
  // U-negative term minus P-negative term, before clamping.
  double bracket = 0.0;
  bool clamped = false;
};

inline int sign(double x) noexcept { return x >= 0.0 ? +1 : -1; }

// Logistic sigmoid, evaluated without overflow for any finite input.
inline double sigmoid(double m) noexcept {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

inline double sigmoid_loss(double score, int label) noexcept {
  return sigmoid(-static_cast<double>(label) * score);
}

inline double sigmoid_loss(const LabeledScore& s) noexcept { return sigmoid_loss(s.score, s.label); }

inline double weighted_sigmoid_loss(const LabeledScore& s) {
  detail::require(s.weight >= 0.0, "loss weight must be non-negative");
  return s.weight * sigmoid_loss(s.score, s.label);
}

// d/dscore of sigmoid_loss(score, label).
inline double sigmoid_loss_grad(double score, int label) noexcept {
  const double p = sigmoid(score);
  return -static_cast<double>(label) * p * (1.0 - p);
}

inline double loss_value(const LabeledScore& s, LossKind kind) {
  return kind == LossKind::weighted_sigmoid ? weighted_sigmoid_loss(s) : sigmoid_loss(s);
}

namespace detail {

inline double mean_loss(std::span<const LabeledScore> xs, int label, LossKind kind) {
  std::vector<double> losses(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    LabeledScore s = xs[i];
    s.label = label;
    losses[i] = loss_value(s, kind);
  }
  return pairwise_sum(losses) / static_cast<double>(xs.size());
}

}  // namespace detail

// Ordinary supervised risk: mean loss over all examples under their true labels.
inline double empirical_risk_pn(std::span<const LabeledScore> pos, std::span<const LabeledScore> neg,
                                const RiskConfig& cfg) {
  detail::require(!pos.empty() || !neg.empty(), "supervised risk needs at least one example");
  std::vector<double> losses;
  losses.reserve(pos.size() + neg.size());
  for (const auto& s : pos) losses.push_back(loss_value({s.score, +1, s.weight}, cfg.loss));
  for (const auto& s : neg) losses.push_back(loss_value({s.score, -1, s.weight}, cfg.loss));
  return pairwise_sum(losses) / static_cast<double>(losses.size());
}

// Builds the breakdown from the three per-class means. Shared by the list
// estimators and the TF-grid training path.
inline RiskBreakdown combine_pu_terms(double prior, double p_pos_mean, double p_neg_mean,
                                      double u_neg_mean, NnMode mode) {
  RiskBreakdown r;
  r.pos_term = prior * p_pos_mean;
  r.bracket = u_neg_mean - prior * p_neg_mean;
  if (mode == NnMode::clamped) {
    r.clamped = r.bracket < 0.0;
    r.total = r.pos_term + (r.clamped ? 0.0 : r.bracket);
  } else {
    r.total = r.pos_term + r.bracket;
  }
  return r;
}

// Unbiased PU risk. Every P example is evaluated under both labels.
inline RiskBreakdown empirical_risk_pu(std::span<const LabeledScore> p_scores,
                                       std::span<const LabeledScore> u_scores, const RiskConfig& cfg) {
  cfg.validate();
  detail::require(!p_scores.empty(), "PU risk needs at least one positive example");
  detail::require(!u_scores.empty(), "PU risk needs at least one unlabelled example");
  return combine_pu_terms(cfg.class_prior, detail::mean_loss(p_scores, +1, cfg.loss),
                          detail::mean_loss(p_scores, -1, cfg.loss),
                          detail::mean_loss(u_scores, -1, cfg.loss), NnMode::unclamped);
}

// Non-negative PU risk: the bracket is replaced by its positive part.
inline RiskBreakdown empirical_risk_nnpu(std::span<const LabeledScore> p_scores,
                                         std::span<const LabeledScore> u_scores,
                                         const RiskConfig& cfg) {
  cfg.validate();
  detail::require(!p_scores.empty(), "PU risk needs at least one positive example");
  detail::require(!u_scores.empty(), "PU risk needs at least one unlabelled example");
  return combine_pu_terms(cfg.class_prior, detail::mean_loss(p_scores, +1, cfg.loss),
                          detail::mean_loss(p_scores, -1, cfg.loss),
                          detail::mean_loss(u_scores, -1, cfg.loss), NnMode::clamped);
}

inline RiskBreakdown empirical_risk(std::span<const LabeledScore> p_scores,
                                    std::span<const LabeledScore> u_scores, const RiskConfig& cfg) {
  return cfg.nn_mode == NnMode::clamped ? empirical_risk_nnpu(p_scores, u_scores, cfg)
                                        : empirical_risk_pu(p_scores, u_scores, cfg);
}

}  // namespace pulse
