// Copyright 2026 The factlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACTLAB_ADAM_HPP_
#define FACTLAB_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "factlab/tensor.hpp"

namespace factlab {

struct AdamConfig {
  double learning_rate = 6e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one slot per parameter tensor.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;

  static AdamState init(std::span<Tensor<T>* const> params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (auto* p : params) {
      s.m.emplace_back(p->v.size(), T(0));
      s.v.emplace_back(p->v.size(), T(0));
    }
    return s;
  }
};

/// Squared L2 norm of all parameter gradients.
template <class T>
double grad_norm(std::span<Tensor<T>* const> params) {
  double sq = 0.0;
  for (auto* p : params)
    for (T g : p->g) sq += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(sq);
}

template <class T>
void clip_grad_norm(std::span<Tensor<T>* const> params, double max_norm) {
  double norm = grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  T scale = static_cast<T>(max_norm / norm);
  for (auto* p : params)
    for (T& g : p->g) g *= scale;
}

/// One bias-corrected Adam update, elementwise over every parameter, using
/// the gradients accumulated in the tensors.
template <class T>
void adam_step(const AdamConfig& cfg, std::span<Tensor<T>* const> params, AdamState<T>& state) {
  if (state.m.size() != params.size())
    throw NumericError("adam_step: state/parameter count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    if (p.g.size() != p.v.size()) throw NumericError("adam_step: parameter missing gradient");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.v.size(); ++j) {
      double g = static_cast<double>(p.g[j]);
      double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * g;
      double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      double update = cfg.learning_rate * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
      if (!std::isfinite(update)) throw NumericError("adam_step: non-finite update");
      p.v[j] = static_cast<T>(static_cast<double>(p.v[j]) - update);
    }
  }
}

}  // namespace factlab

#endif  // FACTLAB_ADAM_HPP_
