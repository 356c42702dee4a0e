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
// Desk-scale synthetic corpus with a planted latent-factor ground truth.
//
// Each user and item draws a unit latent vector; the affinity dot(f_u, f_i)
// drives everything downstream:
//   - interactions: per user, a score-weighted sample without replacement,
//     so observed positives concentrate on (but are not limited to) the
//     user's best items;
//   - text embeddings: a shared random lift of the latent vectors plus
//     noise, so raw cosine similarity correlates with affinity;
//   - hidden relevance: pairs whose affinity clears a global quantile,
//     consumed by the mock oracle as ground truth;
//   - profiles: short texts naming each entity's dominant latent axes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/oracle.hpp"
#include "relden/semantic.hpp"

namespace relden {

struct SyntheticSpec {
  std::uint32_t num_users = 200;
  std::uint32_t num_items = 100;
  std::uint32_t latent_dim = 8;
  std::uint32_t embedding_dim = 32;  // d_llm of the generated text embeddings
  std::uint32_t positives_per_user = 20;
  double sample_sharpness = 6.0;     // weight = sigmoid(sharpness * affinity)
  double embedding_noise = 0.05;
  double relevance_quantile = 0.90;  // top fraction of affinities is relevant
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  InteractionDataset dataset;  // positives only, all tagged train (unsplit)
  ProfileStore profiles;
  RawSemanticEmbeddings raw_embeddings;
  HiddenRelevance relevance;
  Matrix<double> user_latent;
  Matrix<double> item_latent;

  double affinity(UserId u, ItemId i) const {
    return dot(user_latent.row(u), item_latent.row(i), user_latent.cols());
  }
};

namespace detail {

inline Matrix<double> unit_rows(std::uint32_t n, std::uint32_t d, Rng& rng) {
  Matrix<double> m(n, d);
  for (std::uint32_t r = 0; r < n; ++r) {
    double norm = 0.0;
    do {
      for (std::uint32_t c = 0; c < d; ++c)
        m(r, c) = rng.next_normal(0.0, 1.0);
      norm = norm2(m.row(r), d);
    } while (norm < 1e-9);
    for (std::uint32_t c = 0; c < d; ++c) m(r, c) /= norm;
  }
  return m;
}

inline std::string latent_profile_text(const char* kind, std::uint32_t id,
                                       const double* f, std::uint32_t d) {
  std::vector<std::uint32_t> axes(d);
  for (std::uint32_t k = 0; k < d; ++k) axes[k] = k;
  std::sort(axes.begin(), axes.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (f[a] != f[b]) return f[a] > f[b];
    return a < b;
  });
  std::string text = std::string(kind) + " " + std::to_string(id) +
                     ": strong interest in topics";
  for (std::uint32_t k = 0; k < std::min<std::uint32_t>(3, d); ++k)
    text += " t" + std::to_string(axes[k]);
  text += "; little interest in topics";
  for (std::uint32_t k = 0; k < std::min<std::uint32_t>(2, d); ++k)
    text += " t" + std::to_string(axes[d - 1 - k]);
  return text;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.positives_per_user > spec.num_items)
    throw std::invalid_argument("positives_per_user exceeds the catalog");
  SyntheticCorpus corpus;
  Rng latent_rng(derive_seed({spec.seed, 0x5e4aull}));
  corpus.user_latent =
      detail::unit_rows(spec.num_users, spec.latent_dim, latent_rng);
  corpus.item_latent =
      detail::unit_rows(spec.num_items, spec.latent_dim, latent_rng);

  // Interactions: weighted sample without replacement per user.
  auto& ds = corpus.dataset;
  ds.num_users = spec.num_users;
  ds.num_items = spec.num_items;
  std::vector<ItemId> catalog(spec.num_items);
  for (ItemId i = 0; i < spec.num_items; ++i) catalog[i] = i;
  std::vector<double> weights(spec.num_items);
  for (UserId u = 0; u < spec.num_users; ++u) {
    for (ItemId i = 0; i < spec.num_items; ++i)
      weights[i] =
          stable_sigmoid(spec.sample_sharpness * corpus.affinity(u, i));
    Rng rng(derive_seed({spec.seed, 0x1adull, u}));
    auto chosen = detail::weighted_sample_without_replacement(
        catalog, weights, spec.positives_per_user, rng);
    for (ItemId i : chosen) ds.interactions.push_back({u, i, 1,
                                                       SplitTag::train,
                                                       false});
  }

  // Raw text embeddings: e = G f + noise with a shared lift G, so user/item
  // cosine tracks the latent affinity.
  Rng lift_rng(derive_seed({spec.seed, 0x11f7ull}));
  Matrix<double> lift(spec.embedding_dim, spec.latent_dim);
  const double lift_std = 1.0 / std::sqrt(double(spec.embedding_dim));
  for (std::size_t k = 0; k < lift.size(); ++k)
    lift.data()[k] = lift_rng.next_normal(0.0, lift_std);
  auto embed = [&](const Matrix<double>& latents, std::uint64_t tag) {
    Matrix<double> out(latents.rows(), spec.embedding_dim);
    Rng noise_rng(derive_seed({spec.seed, tag}));
    for (std::size_t r = 0; r < latents.rows(); ++r)
      for (std::uint32_t c = 0; c < spec.embedding_dim; ++c) {
        double acc = 0.0;
        for (std::uint32_t k = 0; k < spec.latent_dim; ++k)
          acc += lift(c, k) * latents(r, k);
        out(r, c) = acc + noise_rng.next_normal(0.0, spec.embedding_noise);
      }
    return out;
  };
  corpus.raw_embeddings.users = embed(corpus.user_latent, 0xe1ull);
  corpus.raw_embeddings.items = embed(corpus.item_latent, 0xe2ull);

  // Hidden relevance: affinities above the global quantile.
  std::vector<double> all;
  all.reserve(std::size_t(spec.num_users) * spec.num_items);
  for (UserId u = 0; u < spec.num_users; ++u)
    for (ItemId i = 0; i < spec.num_items; ++i)
      all.push_back(corpus.affinity(u, i));
  std::sort(all.begin(), all.end());
  const std::size_t idx = std::min<std::size_t>(
      all.size() - 1,
      static_cast<std::size_t>(spec.relevance_quantile * all.size()));
  const double threshold = all[idx];
  for (UserId u = 0; u < spec.num_users; ++u)
    for (ItemId i = 0; i < spec.num_items; ++i)
      if (corpus.affinity(u, i) >= threshold)
        corpus.relevance.relevant.push_back({u, i});

  for (UserId u = 0; u < spec.num_users; ++u)
    corpus.profiles.user_profiles[u] = detail::latent_profile_text(
        "user", u, corpus.user_latent.row(u), spec.latent_dim);
  for (ItemId i = 0; i < spec.num_items; ++i)
    corpus.profiles.item_profiles[i] = detail::latent_profile_text(
        "item", i, corpus.item_latent.row(i), spec.latent_dim);
  return corpus;
}

}  // namespace relden
