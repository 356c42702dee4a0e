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
// Hard negative mining: per-user candidate pools refreshed by prediction
// score, with the final pick filtered by semantic similarity.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relden/backbone.hpp"
#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/semantic.hpp"

namespace relden {

// The items a user may draw negatives from: everything except the user's
// train positives and any relevance-confirmed (hard-positive) items.
class NegativeUniverse {
 public:
  NegativeUniverse(const InteractionDataset& ds,
                   const std::vector<std::vector<ItemId>>& extra_excluded = {})
      : num_items_(ds.num_items), excluded_(ds.positives_by_user(SplitTag::train)) {
    for (UserId u = 0; u < extra_excluded.size() && u < excluded_.size(); ++u) {
      auto& ex = excluded_[u];
      ex.insert(ex.end(), extra_excluded[u].begin(), extra_excluded[u].end());
      std::sort(ex.begin(), ex.end());
      ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
    }
  }

  std::uint32_t num_users() const {
    return static_cast<std::uint32_t>(excluded_.size());
  }
  std::size_t size(UserId u) const {
    return num_items_ - excluded_[u].size();
  }
  bool contains(UserId u, ItemId i) const {
    return i < num_items_ &&
           !std::binary_search(excluded_[u].begin(), excluded_[u].end(), i);
  }

  // k-th allowed item in ascending order.
  ItemId at(UserId u, std::size_t k) const {
    ItemId id = static_cast<ItemId>(k);
    for (ItemId e : excluded_[u]) {
      if (e <= id) ++id;
      else break;
    }
    return id;
  }

  ItemId sample(UserId u, Rng& rng) const {
    const std::size_t n = size(u);
    if (n == 0)
      throw std::runtime_error("user " + std::to_string(u) +
                               " has no candidate negatives");
    return at(u, rng.next_below(n));
  }

 private:
  std::uint32_t num_items_;
  std::vector<std::vector<ItemId>> excluded_;
};

struct HardNegativePool {
  std::vector<ItemId> items;  // sorted ascending
};

// K items drawn uniformly without replacement; a user with fewer candidates
// than K gets them all.
inline HardNegativePool init_pool(const NegativeUniverse& universe, UserId u,
                                  std::uint32_t pool_size, std::uint64_t seed) {
  const std::size_t n = universe.size(u);
  if (n == 0)
    throw std::runtime_error("user " + std::to_string(u) +
                             " has no candidate negatives");
  HardNegativePool pool;
  if (n <= pool_size) {
    for (std::size_t k = 0; k < n; ++k) pool.items.push_back(universe.at(u, k));
    return pool;
  }
  Rng rng(derive_seed({seed, 0x90a1ull, u}));
  while (pool.items.size() < pool_size) {
    ItemId j = universe.sample(u, rng);
    if (std::find(pool.items.begin(), pool.items.end(), j) ==
        pool.items.end())
      pool.items.push_back(j);
  }
  std::sort(pool.items.begin(), pool.items.end());
  return pool;
}

namespace detail {

// Weighted sampling without replacement via exponential keys: draw one
// uniform per candidate (ascending id order) and keep the k smallest
// -log(u)/w. Inclusion probability is monotone in the weight.
inline std::vector<ItemId> weighted_sample_without_replacement(
    const std::vector<ItemId>& candidates, const std::vector<double>& weights,
    std::size_t k, Rng& rng) {
  std::vector<std::pair<double, ItemId>> keys(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double u = 1.0 - rng.next_double();  // (0, 1]
    keys[c] = {-std::log(u) / weights[c], candidates[c]};
  }
  std::sort(keys.begin(), keys.end());
  std::vector<ItemId> out;
  out.reserve(k);
  for (std::size_t c = 0; c < k && c < keys.size(); ++c)
    out.push_back(keys[c].second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Draws fresh_draws uniform candidates, then resamples pool_size items from
// pool ∪ fresh with weights proportional to the prediction score shifted
// above zero (score - min + eps). The shift keeps weights positive for
// negative scores while preserving score proportionality at any scale;
// squashing through a sigmoid instead turns near-uniform once scores are
// small. Everything is kept when the union does not exceed the pool size.
template <typename T>
HardNegativePool refresh_pool(const HardNegativePool& pool,
                              const NegativeUniverse& universe, UserId u,
                              const std::vector<T>& scores,
                              std::uint32_t fresh_draws,
                              std::uint32_t pool_size, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x3ef3ull, u}));
  std::vector<ItemId> merged = pool.items;
  for (std::uint32_t m = 0; m < fresh_draws && universe.size(u) > 0; ++m) {
    ItemId j = universe.sample(u, rng);
    if (std::find(merged.begin(), merged.end(), j) == merged.end())
      merged.push_back(j);
  }
  std::sort(merged.begin(), merged.end());
  if (merged.size() <= pool_size) return HardNegativePool{std::move(merged)};

  double lo = std::numeric_limits<double>::max(), hi = -lo;
  for (ItemId j : merged) {
    lo = std::min(lo, double(scores[j]));
    hi = std::max(hi, double(scores[j]));
  }
  const double eps = (hi - lo) * 1e-6 + 1e-300;
  std::vector<double> weights(merged.size());
  for (std::size_t c = 0; c < merged.size(); ++c)
    weights[c] = double(scores[merged[c]]) - lo + eps;
  return HardNegativePool{detail::weighted_sample_without_replacement(
      merged, weights, pool_size, rng)};
}

// Pool member with the lowest semantic similarity to the user; ties broken
// by ascending item id (pools are kept sorted, so the first minimum wins).
template <typename T>
ItemId select_hard_negative(const HardNegativePool& pool,
                            const ProjectedEmbeddings<T>& projected, UserId u) {
  if (pool.items.empty()) throw std::runtime_error("empty hard negative pool");
  const T* zu = projected.users.row(u);
  ItemId best = pool.items[0];
  T best_sim = std::numeric_limits<T>::max();
  for (ItemId j : pool.items) {
    // Projected embeddings are unit-normalized, so dot = cosine.
    const T sim = dot(zu, projected.items.row(j), projected.dim());
    if (sim < best_sim) {
      best_sim = sim;
      best = j;
    }
  }
  return best;
}

// Mean BPR loss -log sigmoid(y_ui - y_uj) with exact gradients w.r.t. the
// representations, accumulated into the provided matrices.
template <typename T>
T bpr_loss(const Representations<T>& rep, const std::vector<UserId>& users,
           const std::vector<ItemId>& pos, const std::vector<ItemId>& neg,
           Matrix<T>* grad_users = nullptr, Matrix<T>* grad_items = nullptr,
           T weight = T(1)) {
  if (users.size() != pos.size() || users.size() != neg.size())
    throw std::invalid_argument("bpr batch arrays must agree in size");
  if (users.empty()) return T(0);
  const std::size_t d = rep.dim();
  T total = T(0);
  const T scale = weight / T(users.size());
  for (std::size_t b = 0; b < users.size(); ++b) {
    const T* zu = rep.users.row(users[b]);
    const T* zi = rep.items.row(pos[b]);
    const T* zj = rep.items.row(neg[b]);
    const T margin = dot(zu, zi, d) - dot(zu, zj, d);
    total += log1p_exp(-margin);
    if (grad_users && grad_items) {
      const T g = -stable_sigmoid(-margin) * scale;  // d loss / d margin
      T* gu = grad_users->row(users[b]);
      T* gi = grad_items->row(pos[b]);
      T* gj = grad_items->row(neg[b]);
      for (std::size_t c = 0; c < d; ++c) {
        gu[c] += g * (zi[c] - zj[c]);
        gi[c] += g * zu[c];
        gj[c] -= g * zu[c];
      }
    }
  }
  return total / T(users.size());
}

// JSONL checkpoint of the per-user pools, for resume.
inline void save_pools(const std::vector<HardNegativePool>& pools,
                       const std::string& path) {
  AtomicFile file(path);
  for (UserId u = 0; u < pools.size(); ++u) {
    nlohmann::json j{{"user", u}, {"pool", pools[u].items}};
    file.out() << j.dump() << '\n';
  }
  file.commit();
}

inline std::vector<HardNegativePool> load_pools(const std::string& path,
                                                std::uint32_t num_users) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<HardNegativePool> pools(num_users);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    const UserId u = j.at("user").get<UserId>();
    if (u >= num_users)
      throw ParseError("line " + std::to_string(line_no) + ": user " +
                       std::to_string(u) + " out of range");
    pools[u].items = j.at("pool").get<std::vector<ItemId>>();
    std::sort(pools[u].items.begin(), pools[u].items.end());
  }
  return pools;
}

}  // namespace relden
