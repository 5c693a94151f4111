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

// Monte Carlo check that the unbiased PU risk estimates the supervised risk.
//
// Data are one-dimensional: x ~ N(+mu, 1) for the positive class and
// N(-mu, 1) for the negative class, with P(y = +1) = prior. A fixed scorer is
// evaluated three ways: PN risk on a large fully labelled sample, and uPU /
// nnPU risks on many small (P, U) resamples.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulse/error.hpp"
#include "pulse/numeric.hpp"
#include "pulse/risk.hpp"
#include "pulse/rng.hpp"

namespace pulse {

enum class ScorerKind {
  linear,   // f(x) = slope * x, fixed before any data are drawn
  overfit,  // memorises each U resample: f = -margin on U points, linear elsewhere
};

inline const char* to_string(ScorerKind k) { return k == ScorerKind::overfit ? "overfit" : "linear"; }

inline ScorerKind parse_scorer_kind(const std::string& s) {
  if (s == "linear") return ScorerKind::linear;
  if (s == "overfit") return ScorerKind::overfit;
  throw InvalidArgument("unknown scorer '" + s + "' (expected linear or overfit)");
}

struct RiskCheckConfig {
  double prior = 0.7;
  std::size_t samples = 100000;  // labelled oracle sample for the PN risk
  std::size_t resamples = 1000;
  std::size_t n_positive = 500;
  std::size_t n_unlabeled = 500;
  std::uint64_t seed = 0;
  ScorerKind scorer = ScorerKind::linear;
  double class_mean = 1.0;
  double slope = 2.0;
  double overfit_margin = 10.0;

  void validate() const {
    detail::require(prior > 0.0 && prior < 1.0, "class prior must lie in (0, 1)");
    detail::require(samples >= 2, "labelled sample needs at least 2 points");
    detail::require(resamples >= 2, "need at least 2 resamples");
    detail::require(n_positive >= 1 && n_unlabeled >= 1, "resample sizes must be positive");
  }
};

struct RiskCheckReport {
  RiskCheckConfig config;
  double pn_risk = 0.0;
  double pn_stderr = 0.0;
  double upu_mean = 0.0;
  double upu_stderr = 0.0;
  double combined_stderr = 0.0;  // sqrt(upu_stderr^2 + pn_stderr^2)
  double deviation_in_stderr = 0.0;
  double upu_negative_fraction = 0.0;
  double nnpu_mean = 0.0;
  double nnpu_min = 0.0;
  bool unbiased = false;  // |upu_mean - pn_risk| <= 3 combined standard errors

  nlohmann::json to_json() const {
    return {{"prior", config.prior},
            {"samples", config.samples},
            {"resamples", config.resamples},
            {"n_positive", config.n_positive},
            {"n_unlabeled", config.n_unlabeled},
            {"seed", config.seed},
            {"scorer", to_string(config.scorer)},
            {"pn_risk", pn_risk},
            {"pn_stderr", pn_stderr},
            {"upu_mean", upu_mean},
            {"upu_stderr", upu_stderr},
            {"combined_stderr", combined_stderr},
            {"deviation_in_stderr", deviation_in_stderr},
            {"upu_negative_fraction", upu_negative_fraction},
            {"nnpu_mean", nnpu_mean},
            {"nnpu_min", nnpu_min},
            {"unbiased", unbiased}};
  }
};

// The PN risk's own sampling error enters the comparison because the oracle
// sample is finite.
inline RiskCheckReport run_risk_check(const RiskCheckConfig& cfg) {
  cfg.validate();
  RiskConfig rc;
  rc.class_prior = cfg.prior;
  rc.loss = LossKind::sigmoid;

  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto draw = [&](std::mt19937_64& rng, bool positive) {
    return (positive ? cfg.class_mean : -cfg.class_mean) + unit(rng);
  };
  auto linear = [&](double x) { return cfg.slope * x; };

  RiskCheckReport rep;
  rep.config = cfg;

  // Fully labelled oracle sample.
  {
    std::mt19937_64 rng(derive_seed({cfg.seed, 0x9e1}));
    std::vector<double> losses(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
      const bool pos = coin(rng) < cfg.prior;
      losses[i] = sigmoid_loss(linear(draw(rng, pos)), pos ? +1 : -1);
    }
    rep.pn_risk = mean(losses);
    rep.pn_stderr = sample_stddev(losses) / std::sqrt(static_cast<double>(cfg.samples));
  }

  std::vector<double> upu(cfg.resamples), nnpu(cfg.resamples);
  std::size_t negatives = 0;
  for (std::size_t k = 0; k < cfg.resamples; ++k) {
    std::mt19937_64 rng(derive_seed({cfg.seed, 0x7e5, k}));
    std::vector<LabeledScore> p(cfg.n_positive), u(cfg.n_unlabeled);
    for (auto& s : p) s = {linear(draw(rng, true)), +1, 1.0};
    for (auto& s : u) {
      const double x = draw(rng, coin(rng) < cfg.prior);
      // An overfit scorer has memorised this U sample and calls all of it negative.
      s = {cfg.scorer == ScorerKind::overfit ? -cfg.overfit_margin : linear(x), -1, 1.0};
    }
    rc.nn_mode = NnMode::unclamped;
    upu[k] = empirical_risk_pu(p, u, rc).total;
    rc.nn_mode = NnMode::clamped;
    nnpu[k] = empirical_risk_nnpu(p, u, rc).total;
    negatives += upu[k] < 0.0 ? 1 : 0;
  }

  rep.upu_mean = mean(upu);
  rep.upu_stderr = sample_stddev(upu) / std::sqrt(static_cast<double>(cfg.resamples));
  rep.combined_stderr = std::hypot(rep.upu_stderr, rep.pn_stderr);
  rep.deviation_in_stderr = std::abs(rep.upu_mean - rep.pn_risk) / rep.combined_stderr;
  rep.unbiased = std::abs(rep.upu_mean - rep.pn_risk) <= 3.0 * rep.combined_stderr;
  rep.upu_negative_fraction = static_cast<double>(negatives) / static_cast<double>(cfg.resamples);
  rep.nnpu_mean = mean(nnpu);
  rep.nnpu_min = *std::min_element(nnpu.begin(), nnpu.end());
  return rep;
}

}  // namespace pulse
