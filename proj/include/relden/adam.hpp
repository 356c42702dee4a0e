// Copyright 2026 The relden Authors
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
#include <stdexcept>
#include <vector>

#include "relden/core.hpp"

namespace relden {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// First/second moment estimates plus the shared step counter.
template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
  std::size_t size() const { return m.size(); }
};

// Standard bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + eps).
// Call once per step with the full parameter vector; t is advanced here.
template <typename T>
void adam_step(T* params, const T* grads, std::size_t n, AdamState<T>& state,
               const AdamConfig<T>& cfg) {
  if (state.size() != n)
    throw std::invalid_argument("adam state size mismatch");
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(static_cast<double>(grads[k])))
      throw std::runtime_error("non-finite gradient at parameter " +
                               std::to_string(k));
  state.t += 1;
  const T bc1 = T(1) - std::pow(cfg.beta1, T(state.t));
  const T bc2 = T(1) - std::pow(cfg.beta2, T(state.t));
  for (std::size_t k = 0; k < n; ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (T(1) - cfg.beta1) * grads[k];
    state.v[k] =
        cfg.beta2 * state.v[k] + (T(1) - cfg.beta2) * grads[k] * grads[k];
    const T m_hat = state.m[k] / bc1;
    const T v_hat = state.v[k] / bc2;
    params[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads,
               AdamState<T>& state, const AdamConfig<T>& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("param/grad size mismatch");
  adam_step(params.data(), grads.data(), params.size(), state, cfg);
}

}  // namespace relden
