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

#pragma once

#include <cmath>
#include <cstdint>

#include "pulse/error.hpp"
#include "pulse/model.hpp"

namespace pulse {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    detail::require(learning_rate > 0.0, "learning rate must be positive");
    detail::require(beta1 >= 0.0 && beta1 < 1.0, "adam beta1 must lie in [0, 1)");
    detail::require(beta2 >= 0.0 && beta2 < 1.0, "adam beta2 must lie in [0, 1)");
    detail::require(eps > 0.0, "adam epsilon must be positive");
  }
};

template <class T>
struct AdamState {
  LayerGrads<T> first;
  LayerGrads<T> second;
  std::uint64_t step = 0;

  static AdamState for_model(const ModelParams<T>& m) {
    AdamState s;
    s.first = zero_grads(m);
    s.second = zero_grads(m);
    return s;
  }
};

namespace detail {

template <class T>
void adam_update(T* param, const T* grad, T* m, T* v, Eigen::Index n, const AdamConfig& cfg, double bc1,
                 double bc2) {
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const double mhat = static_cast<double>(m[i]) / bc1;
    const double vhat = static_cast<double>(v[i]) / bc2;
    param[i] -= static_cast<T>(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

}  // namespace detail

// One bias-corrected Adam update, in place.
template <class T>
void adam_step(ModelParams<T>& params, const LayerGrads<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  cfg.validate();
  detail::require(grads.size() == params.layers.size() && state.first.size() == params.layers.size(),
                  "gradient/optimizer shapes do not match the model");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    detail::require(grads[l].weight.rows() == params.layers[l].weight.rows() &&
                        grads[l].weight.cols() == params.layers[l].weight.cols() &&
                        grads[l].bias.size() == params.layers[l].bias.size(),
                    "gradient shape mismatch in layer " + std::to_string(l));
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite())
      throw NumericFailure("non-finite gradient in conv layer " + std::to_string(l));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto& p = params.layers[l];
    detail::adam_update(p.weight.data(), grads[l].weight.data(), state.first[l].weight.data(),
                        state.second[l].weight.data(), p.weight.size(), cfg, bc1, bc2);
    detail::adam_update(p.bias.data(), grads[l].bias.data(), state.first[l].bias.data(),
                        state.second[l].bias.data(), p.bias.size(), cfg, bc1, bc2);
  }
}

}  // namespace pulse
