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
// Bipartite interaction graph: verdict-driven edge editing, stochastic edge
// drop for augmented views, and symmetric degree normalization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "relden/core.hpp"
#include "relden/dataset.hpp"

namespace relden {

struct Edge {
  UserId user = 0;
  ItemId item = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Edge set over users and items. Edges are kept sorted and unique so that
// derived randomness (edge drop) is a function of the set, not of insertion
// order.
struct InteractionGraph {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::vector<Edge> edges;  // sorted, unique

  bool has_edge(UserId u, ItemId i) const {
    return std::binary_search(edges.begin(), edges.end(), Edge{u, i});
  }

  void canonicalize() {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& e : edges)
      if (e.user >= num_users || e.item >= num_items)
        throw std::invalid_argument("edge endpoint out of range");
  }
};

// One edge per train positive.
inline InteractionGraph build_graph(const InteractionDataset& ds) {
  InteractionGraph g;
  g.num_users = ds.num_users;
  g.num_items = ds.num_items;
  for (const auto& it : ds.interactions)
    if (it.label == 1 && it.split == SplitTag::train)
      g.edges.push_back({it.user, it.item});
  g.canonicalize();
  return g;
}

// E' = (E \ noisy) ∪ hard. The two pair sets must be disjoint.
inline InteractionGraph apply_relevance_edits(const InteractionGraph& g,
                                              std::vector<Edge> hard,
                                              std::vector<Edge> noisy) {
  std::sort(hard.begin(), hard.end());
  hard.erase(std::unique(hard.begin(), hard.end()), hard.end());
  std::sort(noisy.begin(), noisy.end());
  noisy.erase(std::unique(noisy.begin(), noisy.end()), noisy.end());
  std::vector<Edge> overlap;
  std::set_intersection(hard.begin(), hard.end(), noisy.begin(), noisy.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty())
    throw std::invalid_argument("hard and noisy pair sets overlap");

  InteractionGraph out;
  out.num_users = g.num_users;
  out.num_items = g.num_items;
  std::set_difference(g.edges.begin(), g.edges.end(), noisy.begin(),
                      noisy.end(), std::back_inserter(out.edges));
  std::vector<Edge> merged;
  std::set_union(out.edges.begin(), out.edges.end(), hard.begin(), hard.end(),
                 std::back_inserter(merged));
  out.edges = std::move(merged);
  out.canonicalize();
  return out;
}

struct EdgeMask {
  std::vector<Edge> dropped;  // subset of the source edge set
  double drop_probability = 0.0;
  std::uint64_t seed = 0;
};

// Bernoulli mask over the canonical edge ordering: edge k is dropped iff the
// k-th uniform draw of the seeded stream is < rho. Tests replay the same
// stream to verify the indicator.
inline EdgeMask sample_edge_mask(const InteractionGraph& g, double rho,
                                 std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0)
    throw std::invalid_argument("drop probability must be in [0,1]");
  EdgeMask mask;
  mask.drop_probability = rho;
  mask.seed = seed;
  Rng rng(derive_seed({seed, 0xed6edull}));
  for (const auto& e : g.edges)
    if (rng.next_double() < rho) mask.dropped.push_back(e);
  return mask;
}

inline InteractionGraph apply_mask(const InteractionGraph& g,
                                   const EdgeMask& mask) {
  InteractionGraph out;
  out.num_users = g.num_users;
  out.num_items = g.num_items;
  std::set_difference(g.edges.begin(), g.edges.end(), mask.dropped.begin(),
                      mask.dropped.end(), std::back_inserter(out.edges));
  return out;
}

// Each edge is independently retained with probability 1 - rho.
inline InteractionGraph edge_drop(const InteractionGraph& g, double rho,
                                  std::uint64_t seed) {
  return apply_mask(g, sample_edge_mask(g, rho, seed));
}

// Symmetric normalization 1/sqrt(d_u * d_i) per edge, stored once per edge
// together with per-side CSR layouts for propagation. Isolated nodes have
// empty rows. No self-loops.
struct NormalizedAdjacency {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::vector<Edge> edges;
  std::vector<double> coeff;  // parallel to edges

  // CSR over users (columns are item ids) and its transpose.
  std::vector<std::size_t> user_ptr;
  std::vector<ItemId> user_cols;
  std::vector<double> user_vals;
  std::vector<std::size_t> item_ptr;
  std::vector<UserId> item_cols;
  std::vector<double> item_vals;
};

inline NormalizedAdjacency normalize(const InteractionGraph& g) {
  NormalizedAdjacency adj;
  adj.num_users = g.num_users;
  adj.num_items = g.num_items;
  adj.edges = g.edges;
  std::vector<std::uint32_t> du(g.num_users, 0), di(g.num_items, 0);
  for (const auto& e : g.edges) {
    ++du[e.user];
    ++di[e.item];
  }
  adj.coeff.resize(g.edges.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k)
    adj.coeff[k] = 1.0 / std::sqrt(double(du[g.edges[k].user]) *
                                   double(di[g.edges[k].item]));

  adj.user_ptr.assign(g.num_users + 1, 0);
  for (const auto& e : g.edges) ++adj.user_ptr[e.user + 1];
  for (std::size_t u = 0; u < g.num_users; ++u)
    adj.user_ptr[u + 1] += adj.user_ptr[u];
  adj.user_cols.resize(g.edges.size());
  adj.user_vals.resize(g.edges.size());
  {
    std::vector<std::size_t> cur(adj.user_ptr.begin(), adj.user_ptr.end() - 1);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      auto slot = cur[g.edges[k].user]++;
      adj.user_cols[slot] = g.edges[k].item;
      adj.user_vals[slot] = adj.coeff[k];
    }
  }
  adj.item_ptr.assign(g.num_items + 1, 0);
  for (const auto& e : g.edges) ++adj.item_ptr[e.item + 1];
  for (std::size_t i = 0; i < g.num_items; ++i)
    adj.item_ptr[i + 1] += adj.item_ptr[i];
  adj.item_cols.resize(g.edges.size());
  adj.item_vals.resize(g.edges.size());
  {
    std::vector<std::size_t> cur(adj.item_ptr.begin(), adj.item_ptr.end() - 1);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      auto slot = cur[g.edges[k].item]++;
      adj.item_cols[slot] = g.edges[k].user;
      adj.item_vals[slot] = adj.coeff[k];
    }
  }
  return adj;
}

// Edge-list TSV, used to checkpoint the edited graph between the oracle
// stage and training.
inline void save_edges_tsv(const InteractionGraph& g, const std::string& path) {
  AtomicFile file(path);
  file.out() << "# user\titem\n";
  for (const auto& e : g.edges)
    file.out() << e.user << '\t' << e.item << '\n';
  file.commit();
}

inline std::vector<Edge> load_edge_pairs_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 2)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 2 columns");
    edges.push_back({static_cast<UserId>(detail::parse_id(cols[0], line_no)),
                     static_cast<ItemId>(detail::parse_id(cols[1], line_no))});
  }
  return edges;
}

inline InteractionGraph load_edges_tsv(const std::string& path,
                                       std::uint32_t num_users,
                                       std::uint32_t num_items) {
  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.edges = load_edge_pairs_tsv(path);
  g.canonicalize();
  return g;
}

}  // namespace relden
