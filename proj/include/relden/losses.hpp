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
//
// Contrastive denoising objectives. Both losses are temperature-scaled
// softmax objectives over cosine similarities; both are averaged over their
// anchors. Gradients are accumulated into caller-provided matrices so the
// trainer can combine several objectives before backpropagating through the
// graph propagation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relden/backbone.hpp"
#include "relden/core.hpp"

namespace relden {

namespace detail {

// d cos(a,b) contributions for a fixed scalar factor g.
template <typename T>
inline void add_cosine_grad_a(const T* a, const T* b, T na, T nb, T s, T g,
                              T* ga, std::size_t d) {
  const T inv = T(1) / (na * nb);
  const T self = s / (na * na);
  for (std::size_t c = 0; c < d; ++c) ga[c] += g * (b[c] * inv - self * a[c]);
}

}  // namespace detail

// Cross-graph alignment loss over a batch of positive pairs. The first term
// anchors each pair's user on the edited-graph side against the original-
// graph embeddings of every batch item; the second term swaps the primed
// side to the items. The denominator ranges over all batch items, keeping
// duplicates, so repeated positives of one user compete with each other.
//
// Gradient sinks may be null (loss only); when given they are accumulated
// with the factor `weight`.
template <typename T>
T cross_graph_loss(const Matrix<T>& users_g, const Matrix<T>& items_g,
                   const Matrix<T>& users_gp, const Matrix<T>& items_gp,
                   const std::vector<UserId>& batch_users,
                   const std::vector<ItemId>& batch_items, T tau,
                   Matrix<T>* grad_users_g = nullptr,
                   Matrix<T>* grad_items_g = nullptr,
                   Matrix<T>* grad_users_gp = nullptr,
                   Matrix<T>* grad_items_gp = nullptr, T weight = T(1)) {
  if (batch_users.size() != batch_items.size())
    throw std::invalid_argument("batch arrays must agree in size");
  const std::size_t n = batch_users.size();
  if (n == 0) return T(0);
  const std::size_t d = users_g.cols();

  auto one_side = [&](const Matrix<T>& anchors_m, const Matrix<T>& targets_m,
                      Matrix<T>* grad_anchors, Matrix<T>* grad_targets) -> T {
    const bool want_grad = grad_anchors && grad_targets;
    std::vector<T> a_norm(n), t_norm(n);
    for (std::size_t b = 0; b < n; ++b) {
      a_norm[b] = norm2(anchors_m.row(batch_users[b]), d);
      t_norm[b] = norm2(targets_m.row(batch_items[b]), d);
    }
    std::vector<T> sims(n), p(n);
    T loss = T(0);
    for (std::size_t b = 0; b < n; ++b) {
      const T* anchor = anchors_m.row(batch_users[b]);
      for (std::size_t c = 0; c < n; ++c) {
        const T* target = targets_m.row(batch_items[c]);
        const T na = a_norm[b], nt = t_norm[c];
        sims[c] = (na == T(0) || nt == T(0))
                      ? T(0)
                      : dot(anchor, target, d) / (na * nt);
      }
      T mx = sims[0] / tau;
      for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, sims[c] / tau);
      T denom = T(0);
      for (std::size_t c = 0; c < n; ++c) denom += std::exp(sims[c] / tau - mx);
      loss += -(sims[b] / tau - mx) + std::log(denom);

      if (want_grad) {
        const T scale = weight / (tau * T(n));
        for (std::size_t c = 0; c < n; ++c) {
          p[c] = std::exp(sims[c] / tau - mx) / denom;
          const T g = (p[c] - (c == b ? T(1) : T(0))) * scale;
          const T* target = targets_m.row(batch_items[c]);
          const T na = a_norm[b], nt = t_norm[c];
          if (na == T(0) || nt == T(0)) continue;
          detail::add_cosine_grad_a(anchor, target, na, nt, sims[c], g,
                                    grad_anchors->row(batch_users[b]), d);
          detail::add_cosine_grad_a(target, anchor, nt, na, sims[c], g,
                                    grad_targets->row(batch_items[c]), d);
        }
      }
    }
    return loss / T(n);
  };

  T total = one_side(users_gp, items_g, grad_users_gp, grad_items_g);
  total += one_side(users_g, items_gp, grad_users_g, grad_items_gp);
  return total;
}

// View-agreement loss between two augmented propagations. Every node is an
// anchor; its two views form the positive pair and the denominator ranges
// over the other view's nodes of the same kind. negative_scope limits the
// denominator to a seeded sample of that many nodes plus the anchor itself
// (0 = all nodes). The user and item sides are averaged over their anchors
// and summed.
template <typename T>
T view_agreement_loss(const Representations<T>& view1,
                      const Representations<T>& view2, T tau,
                      Matrix<T>* grad_users_1 = nullptr,
                      Matrix<T>* grad_items_1 = nullptr,
                      Matrix<T>* grad_users_2 = nullptr,
                      Matrix<T>* grad_items_2 = nullptr, T weight = T(1),
                      std::size_t negative_scope = 0,
                      std::uint64_t scope_seed = 0) {
  const std::size_t d = view1.dim();

  auto one_side = [&](const Matrix<T>& m1, const Matrix<T>& m2,
                      Matrix<T>* g1, Matrix<T>* g2, std::uint64_t tag) -> T {
    const std::size_t n = m1.rows();
    if (n == 0) return T(0);

    std::vector<std::uint32_t> scope;
    if (negative_scope > 0 && negative_scope < n) {
      Rng rng(derive_seed({scope_seed, tag}));
      std::vector<std::uint32_t> all(n);
      for (std::size_t k = 0; k < n; ++k) all[k] = std::uint32_t(k);
      for (std::size_t k = 0; k < negative_scope; ++k)
        std::swap(all[k], all[k + rng.next_below(n - k)]);
      all.resize(negative_scope);
      std::sort(all.begin(), all.end());
      scope = std::move(all);
    }

    std::vector<T> n1(n), n2(n);
    for (std::size_t k = 0; k < n; ++k) {
      n1[k] = norm2(m1.row(k), d);
      n2[k] = norm2(m2.row(k), d);
    }

    T loss = T(0);
    std::vector<std::uint32_t> cols;
    std::vector<T> sims, p;
    for (std::size_t u = 0; u < n; ++u) {
      cols.clear();
      if (scope.empty()) {
        for (std::size_t v = 0; v < n; ++v) cols.push_back(std::uint32_t(v));
      } else {
        cols = scope;
        if (!std::binary_search(cols.begin(), cols.end(), std::uint32_t(u)))
          cols.insert(std::lower_bound(cols.begin(), cols.end(),
                                       std::uint32_t(u)),
                      std::uint32_t(u));
      }
      sims.assign(cols.size(), T(0));
      std::size_t self_idx = 0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::uint32_t v = cols[c];
        if (v == u) self_idx = c;
        sims[c] = (n1[u] == T(0) || n2[v] == T(0))
                      ? T(0)
                      : dot(m1.row(u), m2.row(v), d) / (n1[u] * n2[v]);
      }
      T mx = sims[0] / tau;
      for (std::size_t c = 1; c < sims.size(); ++c)
        mx = std::max(mx, sims[c] / tau);
      T denom = T(0);
      for (T s : sims) denom += std::exp(s / tau - mx);
      loss += -(sims[self_idx] / tau - mx) + std::log(denom);

      if (g1 && g2) {
        p.assign(cols.size(), T(0));
        const T scale = weight / (tau * T(n));
        for (std::size_t c = 0; c < cols.size(); ++c) {
          p[c] = std::exp(sims[c] / tau - mx) / denom;
          const T g = (p[c] - (c == self_idx ? T(1) : T(0))) * scale;
          const std::uint32_t v = cols[c];
          if (n1[u] == T(0) || n2[v] == T(0)) continue;
          detail::add_cosine_grad_a(m1.row(u), m2.row(v), n1[u], n2[v],
                                    sims[c], g, g1->row(u), d);
          detail::add_cosine_grad_a(m2.row(v), m1.row(u), n2[v], n1[u],
                                    sims[c], g, g2->row(v), d);
        }
      }
    }
    return loss / T(n);
  };

  T total = one_side(view1.users, view2.users, grad_users_1, grad_users_2,
                     0x6a11ull);
  total += one_side(view1.items, view2.items, grad_items_1, grad_items_2,
                    0x6a12ull);
  return total;
}

// Per-step objective summary. total = rec + lambda_de * de + lambda_hal * hal.
struct LossBreakdown {
  double rec = 0.0;
  double de = 0.0;
  double hal = 0.0;
  double total = 0.0;
  double lambda_de = 0.0;
  double lambda_hal = 0.0;
  double tau_de = 0.0;
  double tau_hal = 0.0;
};

inline LossBreakdown total_loss(double rec, double de, double hal,
                                double lambda_de, double lambda_hal,
                                double tau_de = 0.5, double tau_hal = 0.5) {
  LossBreakdown b;
  b.rec = rec;
  b.de = de;
  b.hal = hal;
  b.lambda_de = lambda_de;
  b.lambda_hal = lambda_hal;
  b.tau_de = tau_de;
  b.tau_hal = tau_hal;
  b.total = rec + lambda_de * de + lambda_hal * hal;
  if (!std::isfinite(b.total))
    throw std::runtime_error("non-finite loss");
  return b;
}

}  // namespace relden
