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
#include <catch2/catch.hpp>

#include <set>

#include "relden/graph.hpp"
#include "testutil.hpp"

using namespace relden;

namespace {

InteractionGraph graph_of(std::uint32_t users, std::uint32_t items,
                          std::vector<Edge> edges) {
  InteractionGraph g;
  g.num_users = users;
  g.num_items = items;
  g.edges = std::move(edges);
  g.canonicalize();
  return g;
}

}  // namespace

TEST_CASE("build_graph takes one edge per train positive", "[graph]") {
  InteractionDataset ds;
  ds.num_users = 2;
  ds.num_items = 3;
  ds.interactions.push_back({0, 0, 1, SplitTag::train, false});
  ds.interactions.push_back({0, 1, 1, SplitTag::train, false});
  ds.interactions.push_back({1, 2, 1, SplitTag::train, false});
  ds.interactions.push_back({1, 0, 1, SplitTag::test, false});  // not an edge
  ds.interactions.push_back({0, 2, 0, SplitTag::train, false});  // label 0
  auto g = build_graph(ds);
  CHECK(g.edges.size() == 3);
  CHECK(g.edges == std::vector<Edge>{{0, 0}, {0, 1}, {1, 2}});

  InteractionDataset empty;
  empty.num_users = 2;
  empty.num_items = 2;
  CHECK(build_graph(empty).edges.empty());
}

TEST_CASE("relevance edits follow the set algebra", "[graph]") {
  auto g = graph_of(1, 3, {{0, 0}, {0, 1}});
  auto edited = apply_relevance_edits(g, {{0, 2}}, {{0, 1}});
  CHECK(edited.edges == std::vector<Edge>{{0, 0}, {0, 2}});
  CHECK(g.edges == std::vector<Edge>{{0, 0}, {0, 1}});  // input untouched

  SECTION("removing an absent pair is a no-op") {
    auto e = apply_relevance_edits(g, {}, {{0, 2}});
    CHECK(e.edges == g.edges);
  }
  SECTION("adding an existing pair does not duplicate") {
    auto e = apply_relevance_edits(g, {{0, 0}}, {});
    CHECK(e.edges == g.edges);
  }
  SECTION("overlapping sets are rejected") {
    REQUIRE_THROWS_AS(apply_relevance_edits(g, {{0, 1}}, {{0, 1}}),
                      std::invalid_argument);
  }
}

TEST_CASE("relevance edits are idempotent and sized exactly", "[graph]") {
  // |E'| = |E| - |C_N ∩ E| + |C_H \ E| over randomized fixtures.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto g = testutil::random_graph(seed, 6, 6, 0.4);
    Rng rng(derive_seed({seed, 0xabcull}));
    std::vector<Edge> hard, noisy;
    for (UserId u = 0; u < g.num_users; ++u)
      for (ItemId i = 0; i < g.num_items; ++i) {
        const double roll = rng.next_double();
        if (roll < 0.15) hard.push_back({u, i});
        else if (roll < 0.30) noisy.push_back({u, i});
      }
    auto edited = apply_relevance_edits(g, hard, noisy);

    std::size_t removed = 0, added = 0;
    for (const auto& e : noisy) removed += g.has_edge(e.user, e.item);
    for (const auto& e : hard) added += !g.has_edge(e.user, e.item);
    REQUIRE(edited.edges.size() == g.edges.size() - removed + added);

    auto twice = apply_relevance_edits(edited, hard, noisy);
    REQUIRE(twice.edges == edited.edges);
  }
}

TEST_CASE("edge drop keeps endpoints and respects the rate", "[graph]") {
  auto g = testutil::random_graph(3, 8, 8, 0.5);
  SECTION("rho 0 keeps everything") {
    CHECK(edge_drop(g, 0.0, 5).edges == g.edges);
  }
  SECTION("rho 1 removes everything") {
    CHECK(edge_drop(g, 1.0, 5).edges.empty());
  }
  SECTION("output is a subset and deterministic per seed") {
    auto a = edge_drop(g, 0.3, 5);
    auto b = edge_drop(g, 0.3, 5);
    CHECK(a.edges == b.edges);
    for (const auto& e : a.edges) CHECK(g.has_edge(e.user, e.item));
  }
  SECTION("rate out of range throws") {
    CHECK_THROWS_AS(edge_drop(g, -0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(edge_drop(g, 1.1, 5), std::invalid_argument);
  }
}

TEST_CASE("edge drop matches a replayed bernoulli stream", "[graph]") {
  auto g = testutil::random_graph(11, 10, 10, 0.5);
  const double rho = 0.4;
  const std::uint64_t seed = 99;
  auto mask = sample_edge_mask(g, rho, seed);
  // Replay the documented stream: one uniform per edge in canonical order.
  Rng replay(derive_seed({seed, 0xed6edull}));
  std::vector<Edge> expect_dropped;
  for (const auto& e : g.edges)
    if (replay.next_double() < rho) expect_dropped.push_back(e);
  CHECK(mask.dropped == expect_dropped);
  auto dropped = apply_mask(g, mask);
  CHECK(dropped.edges.size() == g.edges.size() - mask.dropped.size());
}

TEST_CASE("retained counts follow the binomial over many seeds", "[graph]") {
  InteractionGraph g;
  g.num_users = 100;
  g.num_items = 100;
  for (UserId u = 0; u < 100; ++u)
    for (ItemId i = 0; i < 100; ++i) g.edges.push_back({u, i});
  g.canonicalize();
  REQUIRE(g.edges.size() == 10000);

  const double rho = 0.1;
  const std::size_t trials = 1000;
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t)
    total += double(edge_drop(g, rho, 1000 + t).edges.size());
  const double mean = total / double(trials);
  const double sigma = std::sqrt(10000 * rho * (1 - rho));  // 30
  // Sample mean of `trials` draws stays within 3 standard errors.
  CHECK(std::abs(mean - 9000.0) <= 3.0 * sigma / std::sqrt(double(trials)));
}

TEST_CASE("normalization produces 1/sqrt(du*di) coefficients", "[graph]") {
  SECTION("single edge has coefficient 1") {
    auto adj = normalize(graph_of(1, 1, {{0, 0}}));
    REQUIRE(adj.coeff.size() == 1);
    CHECK(adj.coeff[0] == Approx(1.0));
  }
  SECTION("degree-2 user gives 1/sqrt(2)") {
    auto adj = normalize(graph_of(1, 2, {{0, 0}, {0, 1}}));
    REQUIRE(adj.coeff.size() == 2);
    CHECK(adj.coeff[0] == Approx(1.0 / std::sqrt(2.0)));
    CHECK(adj.coeff[1] == Approx(1.0 / std::sqrt(2.0)));
  }
  SECTION("coefficients are in (0, 1] and the pattern is symmetric") {
    auto g = testutil::random_graph(7, 10, 10, 0.4);
    auto adj = normalize(g);
    for (double c : adj.coeff) {
      CHECK(c > 0.0);
      CHECK(c <= 1.0);
    }
    // CSR mirrors hold the same (user, item, coeff) triples.
    std::set<std::tuple<UserId, ItemId, double>> via_users, via_items;
    for (UserId u = 0; u < adj.num_users; ++u)
      for (std::size_t k = adj.user_ptr[u]; k < adj.user_ptr[u + 1]; ++k)
        via_users.insert({u, adj.user_cols[k], adj.user_vals[k]});
    for (ItemId i = 0; i < adj.num_items; ++i)
      for (std::size_t k = adj.item_ptr[i]; k < adj.item_ptr[i + 1]; ++k)
        via_items.insert({adj.item_cols[k], i, adj.item_vals[k]});
    CHECK(via_users == via_items);
  }
}

TEST_CASE("normalization matches the dense oracle", "[graph]") {
  auto g = graph_of(3, 3, {{0, 0}, {0, 1}, {1, 1}, {2, 2}, {2, 1}});
  auto adj = normalize(g);
  auto dense = testutil::dense_normalized_adjacency(g);
  for (std::size_t k = 0; k < adj.edges.size(); ++k) {
    const auto& e = adj.edges[k];
    CHECK(adj.coeff[k] ==
          Approx(dense[e.user][g.num_users + e.item]).epsilon(1e-12));
  }
}

TEST_CASE("edge lists round-trip through tsv", "[graph]") {
  testutil::TempDir tmp("edges");
  auto g = testutil::random_graph(23, 7, 9, 0.3);
  save_edges_tsv(g, tmp.path("edges.tsv"));
  auto back = load_edges_tsv(tmp.path("edges.tsv"), g.num_users, g.num_items);
  CHECK(back.edges == g.edges);
}
