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
// Ranking metrics over the full catalog with train positives masked out,
// paired significance testing, Katz proximity, and the easy/hard/noisy
// sample diagnostics.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "relden/backbone.hpp"
#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/graph.hpp"
#include "relden/miner.hpp"

namespace relden {

// |top-K ∩ relevant| / |relevant|. `relevant` must be sorted.
inline double recall_at_k(const std::vector<ItemId>& ranking,
                          const std::vector<ItemId>& relevant,
                          std::uint32_t k) {
  if (relevant.empty())
    throw std::invalid_argument("recall undefined for empty relevant set");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranking.size() && r < k; ++r)
    if (std::binary_search(relevant.begin(), relevant.end(), ranking[r]))
      ++hits;
  return double(hits) / double(relevant.size());
}

// Binary-relevance NDCG with 1/log2(rank+1) gains, rank 1-based.
inline double ndcg_at_k(const std::vector<ItemId>& ranking,
                        const std::vector<ItemId>& relevant, std::uint32_t k) {
  if (relevant.empty())
    throw std::invalid_argument("ndcg undefined for empty relevant set");
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size() && r < k; ++r)
    if (std::binary_search(relevant.begin(), relevant.end(), ranking[r]))
      dcg += 1.0 / std::log2(double(r) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min<std::size_t>(k, relevant.size());
  for (std::size_t r = 0; r < ideal; ++r)
    idcg += 1.0 / std::log2(double(r) + 2.0);
  return dcg / idcg;
}

struct MetricsReport {
  std::vector<std::uint32_t> ks;
  std::vector<double> recall;  // mean per k
  std::vector<double> ndcg;
  std::vector<UserId> users;   // users with >= 1 relevant item
  Matrix<double> user_recall;  // users x ks
  Matrix<double> user_ndcg;

  double recall_at(std::uint32_t k) const { return at(recall, k); }
  double ndcg_at(std::uint32_t k) const { return at(ndcg, k); }

  std::string table() const {
    std::ostringstream os;
    os << "metric";
    for (auto k : ks) os << "\t@" << k;
    os << "\nrecall";
    os << std::fixed << std::setprecision(6);
    for (std::size_t c = 0; c < ks.size(); ++c) os << '\t' << recall[c];
    os << "\nndcg";
    for (std::size_t c = 0; c < ks.size(); ++c) os << '\t' << ndcg[c];
    os << "\nusers\t" << users.size() << '\n';
    return os.str();
  }

  void save_csv(const std::string& path) const {
    AtomicFile file(path);
    auto& out = file.out();
    out.precision(17);
    out << "k,recall,ndcg,users\n";
    for (std::size_t c = 0; c < ks.size(); ++c)
      out << ks[c] << ',' << recall[c] << ',' << ndcg[c] << ','
          << users.size() << '\n';
    file.commit();
  }

 private:
  double at(const std::vector<double>& v, std::uint32_t k) const {
    for (std::size_t c = 0; c < ks.size(); ++c)
      if (ks[c] == k) return v[c];
    throw std::invalid_argument("k=" + std::to_string(k) + " not evaluated");
  }
};

// Full-catalog ranking per user with that user's train positives masked.
// Users without a relevant item in `split` are excluded from the averages.
// Score ties break by ascending item id.
template <typename T>
MetricsReport evaluate(const Representations<T>& rep,
                       const InteractionDataset& ds, SplitTag split,
                       std::vector<std::uint32_t> ks) {
  std::sort(ks.begin(), ks.end());
  if (ks.empty()) throw std::invalid_argument("no cutoffs given");
  const std::uint32_t max_k = ks.back();
  auto train_pos = ds.positives_by_user(SplitTag::train);
  auto relevant = ds.positives_by_user(split);

  MetricsReport report;
  report.ks = ks;
  for (UserId u = 0; u < ds.num_users; ++u)
    if (!relevant[u].empty()) report.users.push_back(u);
  report.user_recall = Matrix<double>(report.users.size(), ks.size());
  report.user_ndcg = Matrix<double>(report.users.size(), ks.size());
  report.recall.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);

  std::vector<ItemId> order(ds.num_items);
  for (std::size_t row = 0; row < report.users.size(); ++row) {
    const UserId u = report.users[row];
    auto scores = score_all(rep, u);
    for (ItemId i : train_pos[u])
      scores[i] = -std::numeric_limits<T>::infinity();
    std::iota(order.begin(), order.end(), 0);
    const std::size_t top = std::min<std::size_t>(max_k, order.size());
    std::partial_sort(order.begin(), order.begin() + top, order.end(),
                      [&](ItemId a, ItemId b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return a < b;
                      });
    std::vector<ItemId> ranking(order.begin(), order.begin() + top);
    for (std::size_t c = 0; c < ks.size(); ++c) {
      report.user_recall(row, c) = recall_at_k(ranking, relevant[u], ks[c]);
      report.user_ndcg(row, c) = ndcg_at_k(ranking, relevant[u], ks[c]);
    }
  }
  for (std::size_t c = 0; c < ks.size(); ++c) {
    double sr = 0.0, sn = 0.0;
    for (std::size_t row = 0; row < report.users.size(); ++row) {
      sr += report.user_recall(row, c);
      sn += report.user_ndcg(row, c);
    }
    const double n = std::max<std::size_t>(report.users.size(), 1);
    report.recall[c] = sr / n;
    report.ndcg[c] = sn / n;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Paired t-test between two reports over the same user population.
// ---------------------------------------------------------------------------
namespace detail {

// Regularized incomplete beta via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 3e-15) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n = 0;
  double mean_diff = 0.0;
};

enum class Metric { recall, ndcg };

inline TTestResult paired_t_test(const MetricsReport& a,
                                 const MetricsReport& b, Metric metric,
                                 std::uint32_t k) {
  if (a.users != b.users)
    throw std::invalid_argument("reports cover different user sets");
  std::size_t col_a = a.ks.size(), col_b = b.ks.size();
  for (std::size_t c = 0; c < a.ks.size(); ++c)
    if (a.ks[c] == k) col_a = c;
  for (std::size_t c = 0; c < b.ks.size(); ++c)
    if (b.ks[c] == k) col_b = c;
  if (col_a == a.ks.size() || col_b == b.ks.size())
    throw std::invalid_argument("k not present in both reports");

  const auto& ma = metric == Metric::recall ? a.user_recall : a.user_ndcg;
  const auto& mb = metric == Metric::recall ? b.user_recall : b.user_ndcg;
  TTestResult res;
  res.n = a.users.size();
  if (res.n < 2) return res;
  double mean = 0.0;
  for (std::size_t r = 0; r < res.n; ++r)
    mean += ma(r, col_a) - mb(r, col_b);
  mean /= double(res.n);
  double var = 0.0;
  for (std::size_t r = 0; r < res.n; ++r) {
    const double d = ma(r, col_a) - mb(r, col_b) - mean;
    var += d * d;
  }
  var /= double(res.n - 1);
  res.mean_diff = mean;
  if (var == 0.0) {
    res.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    res.p = mean == 0.0 ? 1.0 : 0.0;
    return res;
  }
  res.t = mean / std::sqrt(var / double(res.n));
  const double df = double(res.n - 1);
  res.p = detail::ibeta(df / 2.0, 0.5, df / (df + res.t * res.t));
  return res;
}

// ---------------------------------------------------------------------------
// Katz proximity: sum over walk lengths 1..l_max of beta^l (A^l)_{u,i} on the
// undirected bipartite adjacency.
// ---------------------------------------------------------------------------
inline double katz_index(const InteractionGraph& g, UserId u, ItemId i,
                         double beta = 0.5, std::uint32_t l_max = 3) {
  if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
  if (u >= g.num_users || i >= g.num_items)
    throw std::out_of_range("katz_index: id out of range");
  std::vector<double> xu(g.num_users, 0.0), xi(g.num_items, 0.0);
  xu[u] = 1.0;
  double total = 0.0, w = 1.0;
  std::vector<double> nu(g.num_users), ni(g.num_items);
  for (std::uint32_t l = 1; l <= l_max; ++l) {
    std::fill(nu.begin(), nu.end(), 0.0);
    std::fill(ni.begin(), ni.end(), 0.0);
    for (const auto& e : g.edges) {
      nu[e.user] += xi[e.item];
      ni[e.item] += xu[e.user];
    }
    xu.swap(nu);
    xi.swap(ni);
    w *= beta;
    total += w * xi[i];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Easy/hard/noisy diagnostics for histogram plotting.
//
// Loss samples per train positive: easy uses one uniform negative, hard the
// highest-scored of n_hard uniform draws, noisy a held-out test positive in
// the negative slot. Score samples stratify train positives by Katz
// percentile (easy above the upper, hard below the lower) and take uniform
// non-interactions for the noisy column.
// ---------------------------------------------------------------------------
struct DiagnosticsTables {
  std::vector<double> easy_loss, hard_loss, noisy_loss;
  std::vector<double> easy_score, hard_score, noisy_score;

  void save_csv(const std::string& path) const {
    AtomicFile file(path);
    auto& out = file.out();
    out.precision(17);
    out << "category,kind,value\n";
    auto dump = [&](const char* cat, const char* kind,
                    const std::vector<double>& vals) {
      for (double v : vals) out << cat << ',' << kind << ',' << v << '\n';
    };
    dump("easy", "loss", easy_loss);
    dump("hard", "loss", hard_loss);
    dump("noisy", "loss", noisy_loss);
    dump("easy", "score", easy_score);
    dump("hard", "score", hard_score);
    dump("noisy", "score", noisy_score);
    file.commit();
  }
};

template <typename T>
DiagnosticsTables sample_diagnostics(const Representations<T>& rep,
                                     const InteractionDataset& ds,
                                     const InteractionGraph& g,
                                     std::uint32_t n_hard = 3,
                                     std::uint64_t seed = 0,
                                     double katz_beta = 0.5,
                                     std::uint32_t katz_lmax = 3,
                                     double upper_pct = 0.70,
                                     double lower_pct = 0.30) {
  DiagnosticsTables tables;
  auto train_pos = ds.positives_by_user(SplitTag::train);
  auto test_pos = ds.positives_by_user(SplitTag::test);
  NegativeUniverse universe(ds);

  // The three loss categories must cover disjoint pair sets: train positives
  // are split by seeded parity between easy and hard, and the noisy samples
  // are identified with their held-out test pair.
  std::vector<std::pair<Edge, double>> katz;  // train positives with Katz
  for (UserId u = 0; u < ds.num_users; ++u) {
    if (train_pos[u].empty() || universe.size(u) == 0) continue;
    const auto scores = score_all(rep, u);
    for (ItemId i : train_pos[u]) {
      const double y_pos = double(scores[i]);
      Rng rng(derive_seed({seed, 0xd1a9ull, u, i}));
      if (derive_seed({seed, 0x9a57ull, u, i}) & 1) {
        double hard_score = -std::numeric_limits<double>::infinity();
        for (std::uint32_t k = 0; k < n_hard; ++k) {
          const ItemId j = universe.at(u, rng.next_below(universe.size(u)));
          hard_score = std::max(hard_score, double(scores[j]));
        }
        tables.hard_loss.push_back(log1p_exp(-(y_pos - hard_score)));
      } else {
        const ItemId j = universe.at(u, rng.next_below(universe.size(u)));
        tables.easy_loss.push_back(log1p_exp(-(y_pos - double(scores[j]))));
      }
      katz.push_back({{u, i}, katz_index(g, u, i, katz_beta, katz_lmax)});
    }
    for (ItemId j : test_pos[u]) {
      Rng rng(derive_seed({seed, 0xd3c1ull, u, j}));
      const ItemId anchor =
          train_pos[u][rng.next_below(train_pos[u].size())];
      tables.noisy_loss.push_back(
          log1p_exp(-(double(scores[anchor]) - double(scores[j]))));
    }
  }

  if (!katz.empty()) {
    std::vector<double> vals;
    vals.reserve(katz.size());
    for (const auto& [e, v] : katz) vals.push_back(v);
    std::sort(vals.begin(), vals.end());
    auto pct = [&](double q) {
      const std::size_t idx = std::min<std::size_t>(
          vals.size() - 1, static_cast<std::size_t>(q * vals.size()));
      return vals[idx];
    };
    const double hi = pct(upper_pct), lo = pct(lower_pct);
    for (const auto& [e, v] : katz) {
      const double s = double(score(rep, e.user, e.item));
      if (v >= hi)
        tables.easy_score.push_back(s);
      else if (v <= lo)
        tables.hard_score.push_back(s);
    }
  }

  // Non-existent interactions, as many as there are train positives.
  std::unordered_set<std::uint64_t> seen;
  for (const auto& it : ds.interactions)
    seen.insert((std::uint64_t(it.user) << 32) | it.item);
  Rng rng(derive_seed({seed, 0xd2b0ull}));
  const std::size_t want =
      std::min<std::size_t>(katz.size(),
                            std::size_t(ds.num_users) * ds.num_items -
                                seen.size());
  std::size_t guard = 0;
  while (tables.noisy_score.size() < want && guard < want * 64 + 64) {
    ++guard;
    const UserId u = static_cast<UserId>(rng.next_below(ds.num_users));
    const ItemId i = static_cast<ItemId>(rng.next_below(ds.num_items));
    if (!seen.insert((std::uint64_t(u) << 32) | i).second) continue;
    tables.noisy_score.push_back(double(score(rep, u, i)));
  }
  return tables;
}

}  // namespace relden
