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
// Training orchestration: configuration, checkpointing, the plain pairwise
// pretraining stage, and joint optimization of the recommendation loss with
// the cross-graph and view-agreement objectives.
//
// Every random draw is keyed by (seed, purpose, epoch, batch, ...), so a
// resumed run consumes exactly the streams the uninterrupted run would.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relden/adam.hpp"
#include "relden/backbone.hpp"
#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/eval.hpp"
#include "relden/graph.hpp"
#include "relden/losses.hpp"
#include "relden/miner.hpp"
#include "relden/semantic.hpp"

namespace relden {

enum class BackboneKind { lightgcn, mf };
enum class TrainMode { plain_bpr, denoise };
enum class NegSampling { uniform, mined };
enum class ScoreGraph { edited, original };

struct TrainConfig {
  // model
  std::string mode = "plain_bpr";     // plain_bpr | denoise
  std::string backbone = "lightgcn";  // lightgcn | mf
  std::uint32_t d_rec = 64;
  std::uint32_t layers = 3;
  double init_std = 0.01;

  // optimization
  std::uint32_t batch_size = 1024;
  double lr = 1e-3;
  std::uint32_t epochs = 200;
  std::uint32_t patience = 10;
  std::uint32_t eval_every = 1;
  double weight_decay = 0.0;
  std::uint64_t seed = 42;

  // hard negative mining
  std::string neg_sampling = "mined";  // uniform | mined (denoise mode)
  std::uint32_t pool_size = 10;        // candidates kept per user
  std::uint32_t fresh_negatives = 30;  // uniform draws per refresh
  std::uint32_t pool_refresh_every = 1;

  // semantic alignment
  std::uint32_t align_top_n = 50;
  std::uint32_t align_negatives = 50;
  double align_tau = 0.5;
  double align_lr = 1e-3;
  std::uint32_t align_epochs = 60;
  std::uint32_t align_hidden = 256;
  std::uint32_t align_batch = 256;

  // denoising objectives
  double tau_de = 0.5;
  double tau_hal = 0.5;
  double lambda_de = 0.1;
  double lambda_hal = 0.1;
  double edge_drop_rate = 0.1;
  std::uint32_t hal_scope = 0;  // sampled denominator size; 0 = all nodes

  // relevance oracle staging
  std::uint32_t cand_negatives = 2;  // per-user high-score negatives
  std::uint32_t cand_positives = 2;  // per-user low-score positives
  std::string cand_mode = "deterministic";  // deterministic | stochastic
  std::uint32_t evidence_size = 5;
  std::string score_graph = "edited";  // edited | original

  // evaluation
  std::string eval_ks = "10,20";

  TrainMode train_mode() const {
    if (mode == "plain_bpr") return TrainMode::plain_bpr;
    if (mode == "denoise") return TrainMode::denoise;
    throw std::invalid_argument("unknown mode '" + mode + "'");
  }
  BackboneKind backbone_kind() const {
    if (backbone == "lightgcn") return BackboneKind::lightgcn;
    if (backbone == "mf") return BackboneKind::mf;
    throw std::invalid_argument("unknown backbone '" + backbone + "'");
  }
  NegSampling sampling() const {
    if (neg_sampling == "uniform") return NegSampling::uniform;
    if (neg_sampling == "mined") return NegSampling::mined;
    throw std::invalid_argument("unknown neg_sampling '" + neg_sampling + "'");
  }
  ScoreGraph score_graph_kind() const {
    if (score_graph == "edited") return ScoreGraph::edited;
    if (score_graph == "original") return ScoreGraph::original;
    throw std::invalid_argument("unknown score_graph '" + score_graph + "'");
  }
  // The matrix-factorization backbone is propagation with zero layers.
  std::uint32_t effective_layers() const {
    return backbone_kind() == BackboneKind::mf ? 0 : layers;
  }
  std::vector<std::uint32_t> eval_cutoffs() const {
    std::vector<std::uint32_t> ks;
    std::stringstream ss(eval_ks);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) ks.push_back(std::uint32_t(std::stoul(tok)));
    if (ks.empty()) throw std::invalid_argument("eval_ks is empty");
    return ks;
  }
};

namespace detail {

struct ConfigField {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

inline const std::vector<ConfigField>& config_fields() {
  auto u32 = [](std::uint32_t TrainConfig::* f) {
    return std::make_pair(
        std::function<std::string(const TrainConfig&)>(
            [f](const TrainConfig& c) { return std::to_string(c.*f); }),
        std::function<void(TrainConfig&, const std::string&)>(
            [f](TrainConfig& c, const std::string& v) {
              c.*f = std::uint32_t(std::stoul(v));
            }));
  };
  auto u64 = [](std::uint64_t TrainConfig::* f) {
    return std::make_pair(
        std::function<std::string(const TrainConfig&)>(
            [f](const TrainConfig& c) { return std::to_string(c.*f); }),
        std::function<void(TrainConfig&, const std::string&)>(
            [f](TrainConfig& c, const std::string& v) { c.*f = std::stoull(v); }));
  };
  auto dbl = [](double TrainConfig::* f) {
    return std::make_pair(
        std::function<std::string(const TrainConfig&)>(
            [f](const TrainConfig& c) {
              std::ostringstream os;
              os.precision(17);
              os << c.*f;
              return os.str();
            }),
        std::function<void(TrainConfig&, const std::string&)>(
            [f](TrainConfig& c, const std::string& v) { c.*f = std::stod(v); }));
  };
  auto str = [](std::string TrainConfig::* f) {
    return std::make_pair(
        std::function<std::string(const TrainConfig&)>(
            [f](const TrainConfig& c) { return c.*f; }),
        std::function<void(TrainConfig&, const std::string&)>(
            [f](TrainConfig& c, const std::string& v) { c.*f = v; }));
  };
  static const std::vector<ConfigField> fields = [&] {
    std::vector<ConfigField> out;
    auto add = [&out](const char* key, auto pair) {
      out.push_back({key, pair.first, pair.second});
    };
    add("mode", str(&TrainConfig::mode));
    add("backbone", str(&TrainConfig::backbone));
    add("d_rec", u32(&TrainConfig::d_rec));
    add("layers", u32(&TrainConfig::layers));
    add("init_std", dbl(&TrainConfig::init_std));
    add("batch_size", u32(&TrainConfig::batch_size));
    add("lr", dbl(&TrainConfig::lr));
    add("epochs", u32(&TrainConfig::epochs));
    add("patience", u32(&TrainConfig::patience));
    add("eval_every", u32(&TrainConfig::eval_every));
    add("weight_decay", dbl(&TrainConfig::weight_decay));
    add("seed", u64(&TrainConfig::seed));
    add("neg_sampling", str(&TrainConfig::neg_sampling));
    add("pool_size", u32(&TrainConfig::pool_size));
    add("fresh_negatives", u32(&TrainConfig::fresh_negatives));
    add("pool_refresh_every", u32(&TrainConfig::pool_refresh_every));
    add("align_top_n", u32(&TrainConfig::align_top_n));
    add("align_negatives", u32(&TrainConfig::align_negatives));
    add("align_tau", dbl(&TrainConfig::align_tau));
    add("align_lr", dbl(&TrainConfig::align_lr));
    add("align_epochs", u32(&TrainConfig::align_epochs));
    add("align_hidden", u32(&TrainConfig::align_hidden));
    add("align_batch", u32(&TrainConfig::align_batch));
    add("tau_de", dbl(&TrainConfig::tau_de));
    add("tau_hal", dbl(&TrainConfig::tau_hal));
    add("lambda_de", dbl(&TrainConfig::lambda_de));
    add("lambda_hal", dbl(&TrainConfig::lambda_hal));
    add("edge_drop_rate", dbl(&TrainConfig::edge_drop_rate));
    add("hal_scope", u32(&TrainConfig::hal_scope));
    add("cand_negatives", u32(&TrainConfig::cand_negatives));
    add("cand_positives", u32(&TrainConfig::cand_positives));
    add("cand_mode", str(&TrainConfig::cand_mode));
    add("evidence_size", u32(&TrainConfig::evidence_size));
    add("score_graph", str(&TrainConfig::score_graph));
    add("eval_ks", str(&TrainConfig::eval_ks));
    return out;
  }();
  return fields;
}

}  // namespace detail

// Canonical `key = value` serialization; also the config-hash input.
inline std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields())
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

inline std::uint64_t config_hash(const TrainConfig& cfg) {
  return fnv1a(config_to_text(cfg));
}

inline void set_config_key(TrainConfig& cfg, const std::string& key,
                           const std::string& value) {
  for (const auto& f : detail::config_fields())
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

// Flat `key = value` file; '#' starts a comment.
inline TrainConfig load_config_file(const std::string& path,
                                    TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'key = value'");
    try {
      set_config_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline void save_config_file(const TrainConfig& cfg, const std::string& path) {
  AtomicFile file(path);
  file.out() << config_to_text(cfg);
  file.commit();
}

// ---------------------------------------------------------------------------
// Checkpoints: <stem>.emb/.m1/.m2 reuse the embedding container; metadata
// (stage, epoch, step counter, config hash) lives in <stem>.meta.json; pools
// are stored alongside when mining is active.
// ---------------------------------------------------------------------------
struct TrainState {
  EmbeddingTable<float> table;
  AdamState<float> adam;
  std::vector<HardNegativePool> pools;
  std::uint32_t next_epoch = 0;
  double best_valid = -1.0;
  std::uint32_t best_epoch = 0;
  std::uint32_t stale_evals = 0;
  EmbeddingTable<float> best_table;
};

struct CheckpointMeta {
  std::string stage;  // pretrain | main
  std::uint32_t epoch = 0;
  std::int64_t adam_t = 0;
  std::uint64_t config_hash = 0;
  double best_valid = -1.0;
  std::uint32_t best_epoch = 0;
  std::uint32_t stale_evals = 0;
  bool has_pools = false;
};

inline void save_checkpoint(const std::string& stem, const TrainState& state,
                            const std::string& stage,
                            std::uint64_t cfg_hash) {
  save_embedding_file(stem + ".emb", state.table);
  Matrix<float> m_users(state.table.users.rows(), state.table.users.cols());
  Matrix<float> m_items(state.table.items.rows(), state.table.items.cols());
  auto write_moments = [&](const std::vector<float>& src,
                           const std::string& path) {
    std::copy(src.begin(), src.begin() + m_users.size(), m_users.data());
    std::copy(src.begin() + m_users.size(), src.end(), m_items.data());
    save_embedding_file(path, m_users, m_items);
  };
  write_moments(state.adam.m, stem + ".m1");
  write_moments(state.adam.v, stem + ".m2");
  save_embedding_file(stem + ".best.emb", state.best_table);
  if (!state.pools.empty()) save_pools(state.pools, stem + ".pools.jsonl");

  nlohmann::json meta{{"version", 1},
                      {"stage", stage},
                      {"epoch", state.next_epoch},
                      {"adam_t", state.adam.t},
                      {"config_hash", cfg_hash},
                      {"best_valid", state.best_valid},
                      {"best_epoch", state.best_epoch},
                      {"stale_evals", state.stale_evals},
                      {"has_pools", !state.pools.empty()}};
  AtomicFile file(stem + ".meta.json");
  file.out() << meta.dump(2) << '\n';
  file.commit();
}

inline CheckpointMeta load_checkpoint_meta(const std::string& stem) {
  std::ifstream in(stem + ".meta.json");
  if (!in) throw IoError("cannot open '" + stem + ".meta.json'");
  nlohmann::json j;
  in >> j;
  CheckpointMeta meta;
  meta.stage = j.at("stage").get<std::string>();
  meta.epoch = j.at("epoch").get<std::uint32_t>();
  meta.adam_t = j.at("adam_t").get<std::int64_t>();
  meta.config_hash = j.at("config_hash").get<std::uint64_t>();
  meta.best_valid = j.at("best_valid").get<double>();
  meta.best_epoch = j.at("best_epoch").get<std::uint32_t>();
  meta.stale_evals = j.at("stale_evals").get<std::uint32_t>();
  meta.has_pools = j.at("has_pools").get<bool>();
  return meta;
}

inline TrainState load_checkpoint(const std::string& stem,
                                  const CheckpointMeta& meta,
                                  std::uint32_t num_users) {
  TrainState state;
  state.table = load_embedding_file(stem + ".emb");
  auto m1 = load_embedding_file(stem + ".m1");
  auto m2 = load_embedding_file(stem + ".m2");
  state.adam = AdamState<float>(state.table.users.size() +
                                state.table.items.size());
  std::copy(m1.users.data(), m1.users.data() + m1.users.size(),
            state.adam.m.begin());
  std::copy(m1.items.data(), m1.items.data() + m1.items.size(),
            state.adam.m.begin() + m1.users.size());
  std::copy(m2.users.data(), m2.users.data() + m2.users.size(),
            state.adam.v.begin());
  std::copy(m2.items.data(), m2.items.data() + m2.items.size(),
            state.adam.v.begin() + m2.users.size());
  state.adam.t = meta.adam_t;
  state.best_table = load_embedding_file(stem + ".best.emb");
  state.next_epoch = meta.epoch;
  state.best_valid = meta.best_valid;
  state.best_epoch = meta.best_epoch;
  state.stale_evals = meta.stale_evals;
  if (meta.has_pools)
    state.pools = load_pools(stem + ".pools.jsonl", num_users);
  return state;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------
struct LossLogRow {
  std::uint32_t epoch = 0;
  double rec = 0.0, de = 0.0, hal = 0.0, total = 0.0;
};

struct MiningLogRow {
  std::uint32_t epoch = 0;
  double mined_mean_score = 0.0;
  double uniform_mean_score = 0.0;
};

struct TrainResult {
  EmbeddingTable<float> table;  // best validation snapshot when available
  std::vector<LossLogRow> loss_log;
  std::vector<MiningLogRow> mining_log;
  std::uint32_t epochs_run = 0;
  std::uint32_t best_epoch = 0;
  double best_valid = -1.0;
  bool early_stopped = false;
};

inline void save_loss_log_csv(const std::vector<LossLogRow>& rows,
                              const std::string& path) {
  AtomicFile file(path);
  auto& out = file.out();
  out.precision(17);
  out << "epoch,l_rec,l_de,l_hal,l_total\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << r.rec << ',' << r.de << ',' << r.hal << ','
        << r.total << '\n';
  file.commit();
}

inline void save_mining_log_csv(const std::vector<MiningLogRow>& rows,
                                const std::string& path) {
  AtomicFile file(path);
  auto& out = file.out();
  out.precision(17);
  out << "epoch,mined_mean_score,uniform_mean_score\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << r.mined_mean_score << ','
        << r.uniform_mean_score << '\n';
  file.commit();
}

// Graphs and stage artifacts feeding the joint objective. `edited`,
// `projected` and `hard_items_by_user` stay null/empty for the plain control.
struct TrainGraphs {
  const InteractionGraph* original = nullptr;
  const InteractionGraph* edited = nullptr;
  const ProjectedEmbeddings<float>* projected = nullptr;
  std::vector<std::vector<ItemId>> hard_items_by_user;
};

namespace detail {

template <typename T>
void adam_apply(T* params, const T* grads, std::size_t n, T* m, T* v,
                std::int64_t t, const AdamConfig<T>& cfg) {
  const T bc1 = T(1) - std::pow(cfg.beta1, T(t));
  const T bc2 = T(1) - std::pow(cfg.beta2, T(t));
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(double(grads[k])))
      throw std::runtime_error("non-finite gradient");
    m[k] = cfg.beta1 * m[k] + (T(1) - cfg.beta1) * grads[k];
    v[k] = cfg.beta2 * v[k] + (T(1) - cfg.beta2) * grads[k] * grads[k];
    params[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
  }
}

// One optimizer step over the user and item tables with a shared counter.
template <typename T>
void adam_step_table(EmbeddingTable<T>& table, const EmbeddingTable<T>& grad,
                     AdamState<T>& state, const AdamConfig<T>& cfg) {
  const std::size_t nu = table.users.size();
  if (state.size() != nu + table.items.size())
    throw std::invalid_argument("adam state size mismatch");
  state.t += 1;
  adam_apply(table.users.data(), grad.users.data(), nu, state.m.data(),
             state.v.data(), state.t, cfg);
  adam_apply(table.items.data(), grad.items.data(), table.items.size(),
             state.m.data() + nu, state.v.data() + nu, state.t, cfg);
}

}  // namespace detail

// Runs epochs [state.next_epoch, max_epochs) or until early stopping. The
// state is advanced in place, so a checkpoint written after any epoch resumes
// into the identical trajectory.
inline TrainResult run_training(const TrainConfig& cfg,
                                const InteractionDataset& ds,
                                const TrainGraphs& graphs,
                                TrainState& state,
                                std::uint32_t max_epochs) {
  const TrainMode mode = cfg.train_mode();
  const bool denoise = mode == TrainMode::denoise;
  const bool mined = denoise && cfg.sampling() == NegSampling::mined;
  const double lambda_de = denoise ? cfg.lambda_de : 0.0;
  const double lambda_hal = denoise ? cfg.lambda_hal : 0.0;
  const std::uint32_t layers = cfg.effective_layers();

  if (!graphs.original) throw StageError("prepare", "missing base graph");
  if (denoise && !graphs.edited)
    throw StageError("edit-graph", "denoise mode requires the edited graph");
  if (mined && !graphs.projected)
    throw StageError("projector",
                     "mined negative sampling requires projected embeddings");

  const InteractionGraph& g = *graphs.original;
  const InteractionGraph& g_score =
      denoise && cfg.score_graph_kind() == ScoreGraph::edited
          ? *graphs.edited
          : *graphs.original;
  const auto adj_g = normalize(g);
  const auto adj_gp = denoise ? normalize(*graphs.edited)
                              : NormalizedAdjacency{};
  const auto adj_score = normalize(g_score);

  // Positive pairs; negatives come from the complement of the train
  // positives, additionally excluding relevance-confirmed items.
  std::vector<UserId> pair_user;
  std::vector<ItemId> pair_item;
  for (const auto& it : ds.interactions)
    if (it.label == 1 && it.split == SplitTag::train) {
      pair_user.push_back(it.user);
      pair_item.push_back(it.item);
    }
  if (pair_user.empty()) throw std::runtime_error("no train positives");
  NegativeUniverse universe(ds, graphs.hard_items_by_user);

  if (state.table.users.rows() == 0) {
    state.table = init_embeddings<float>(ds.num_users, ds.num_items,
                                         cfg.d_rec, cfg.seed, cfg.init_std);
    state.adam = AdamState<float>(state.table.users.size() +
                                  state.table.items.size());
    state.best_table = state.table;
  }
  if (mined && state.pools.empty()) {
    state.pools.resize(ds.num_users);
    for (UserId u = 0; u < ds.num_users; ++u)
      if (universe.size(u) > 0)
        state.pools[u] = init_pool(universe, u, cfg.pool_size,
                                   derive_seed({cfg.seed, 0x9001ull}));
  }

  AdamConfig<float> adam_cfg;
  adam_cfg.lr = static_cast<float>(cfg.lr);
  const auto eval_ks = cfg.eval_cutoffs();
  const bool has_valid = ds.count_positives(SplitTag::valid) > 0;

  TrainResult result;
  EmbeddingTable<float> grad;
  grad.users = Matrix<float>(ds.num_users, cfg.d_rec);
  grad.items = Matrix<float>(ds.num_items, cfg.d_rec);

  std::vector<std::size_t> order(pair_user.size());
  for (std::uint32_t epoch = state.next_epoch; epoch < max_epochs; ++epoch) {
    // Pool refresh against current prediction scores.
    if (mined && (epoch % std::max<std::uint32_t>(cfg.pool_refresh_every, 1)
                  == 0)) {
      const auto rep = propagate(state.table, adj_score, layers);
      const std::uint64_t refresh_seed =
          derive_seed({cfg.seed, 0x9002ull, epoch});
      for (UserId u = 0; u < ds.num_users; ++u) {
        if (universe.size(u) == 0) continue;
        const auto scores = score_all(rep, u);
        state.pools[u] =
            refresh_pool(state.pools[u], universe, u, scores,
                         cfg.fresh_negatives, cfg.pool_size, refresh_seed);
      }
    }

    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed({cfg.seed, 0x9003ull, epoch}));
    for (std::size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[shuffle_rng.next_below(k)]);

    double ep_rec = 0.0, ep_de = 0.0, ep_hal = 0.0;
    double mined_score_sum = 0.0, uniform_score_sum = 0.0;
    std::size_t mined_count = 0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++batches) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      std::vector<UserId> bu;
      std::vector<ItemId> bi, bj;
      bu.reserve(stop - start);
      bi.reserve(stop - start);

      Rng neg_rng(derive_seed({cfg.seed, 0x9004ull, epoch, batches}));
      for (std::size_t k = start; k < stop; ++k) {
        const UserId u = pair_user[order[k]];
        if (universe.size(u) == 0) continue;  // no negatives to rank against
        bu.push_back(u);
        bi.push_back(pair_item[order[k]]);
        if (mined)
          bj.push_back(select_hard_negative(state.pools[u],
                                            *graphs.projected, u));
        else
          bj.push_back(universe.sample(u, neg_rng));
      }
      if (bu.empty()) continue;

      const auto z_score = propagate(state.table, adj_score, layers);

      grad.users.fill(0.0f);
      grad.items.fill(0.0f);
      Matrix<float> gsu(ds.num_users, cfg.d_rec), gsi(ds.num_items, cfg.d_rec);
      const double l_rec = bpr_loss(z_score, bu, bi, bj, &gsu, &gsi, 1.0f);

      double l_de = 0.0, l_hal = 0.0;
      Matrix<float> ggu, ggi, gpu, gpi;
      std::optional<Representations<float>> z_g, z_gp;
      if (lambda_de > 0.0) {
        z_g = propagate(state.table, adj_g, layers, GraphTag::original);
        z_gp = propagate(state.table, adj_gp, layers, GraphTag::edited);
        ggu = Matrix<float>(ds.num_users, cfg.d_rec);
        ggi = Matrix<float>(ds.num_items, cfg.d_rec);
        gpu = Matrix<float>(ds.num_users, cfg.d_rec);
        gpi = Matrix<float>(ds.num_items, cfg.d_rec);
        l_de = cross_graph_loss(z_g->users, z_g->items, z_gp->users,
                                z_gp->items, bu, bi,
                                static_cast<float>(cfg.tau_de), &ggu, &ggi,
                                &gpu, &gpi, static_cast<float>(lambda_de));
      }

      Matrix<float> g1u, g1i, g2u, g2i;
      std::optional<NormalizedAdjacency> adj_aug1, adj_aug2;
      if (lambda_hal > 0.0) {
        const auto aug_seed_1 =
            derive_seed({cfg.seed, 0x9005ull, epoch, batches, 1});
        const auto aug_seed_2 =
            derive_seed({cfg.seed, 0x9005ull, epoch, batches, 2});
        const auto g_aug1 = edge_drop(denoise ? *graphs.edited : g,
                                      cfg.edge_drop_rate, aug_seed_1);
        const auto g_aug2 = edge_drop(g, cfg.edge_drop_rate, aug_seed_2);
        adj_aug1 = normalize(g_aug1);
        adj_aug2 = normalize(g_aug2);
        const auto z1 = propagate(state.table, *adj_aug1, layers,
                                  GraphTag::edited_aug);
        const auto z2 = propagate(state.table, *adj_aug2, layers,
                                  GraphTag::original_aug);
        g1u = Matrix<float>(ds.num_users, cfg.d_rec);
        g1i = Matrix<float>(ds.num_items, cfg.d_rec);
        g2u = Matrix<float>(ds.num_users, cfg.d_rec);
        g2i = Matrix<float>(ds.num_items, cfg.d_rec);
        l_hal = view_agreement_loss(
            z1, z2, static_cast<float>(cfg.tau_hal), &g1u, &g1i, &g2u, &g2i,
            static_cast<float>(lambda_hal), cfg.hal_scope,
            derive_seed({cfg.seed, 0x9006ull, epoch, batches}));
      }

      const auto breakdown =
          total_loss(l_rec, l_de, l_hal, lambda_de, lambda_hal, cfg.tau_de,
                     cfg.tau_hal);
      if (!std::isfinite(breakdown.total))
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch));

      // Backpropagate each view through its own propagation and accumulate.
      auto accumulate = [&](const Matrix<float>& du, const Matrix<float>& di,
                            const NormalizedAdjacency& adj) {
        const auto g_tab = backpropagate(du, di, adj, layers);
        for (std::size_t k = 0; k < grad.users.size(); ++k)
          grad.users.data()[k] += g_tab.users.data()[k];
        for (std::size_t k = 0; k < grad.items.size(); ++k)
          grad.items.data()[k] += g_tab.items.data()[k];
      };
      accumulate(gsu, gsi, adj_score);
      if (lambda_de > 0.0) {
        accumulate(ggu, ggi, adj_g);
        accumulate(gpu, gpi, adj_gp);
      }
      if (lambda_hal > 0.0) {
        accumulate(g1u, g1i, *adj_aug1);
        accumulate(g2u, g2i, *adj_aug2);
      }
      if (cfg.weight_decay > 0.0) {
        const float wd = static_cast<float>(cfg.weight_decay);
        for (std::size_t k = 0; k < grad.users.size(); ++k)
          grad.users.data()[k] += wd * state.table.users.data()[k];
        for (std::size_t k = 0; k < grad.items.size(); ++k)
          grad.items.data()[k] += wd * state.table.items.data()[k];
      }
      detail::adam_step_table(state.table, grad, state.adam, adam_cfg);

      ep_rec += l_rec * double(bu.size());
      ep_de += l_de * double(bu.size());
      ep_hal += l_hal * double(bu.size());

      if (mined) {
        for (std::size_t k = 0; k < bu.size(); ++k)
          mined_score_sum += double(score(z_score, bu[k], bj[k]));
        Rng ref_rng(derive_seed({cfg.seed, 0x9007ull, epoch, batches}));
        for (std::size_t k = 0; k < bu.size(); ++k)
          uniform_score_sum +=
              double(score(z_score, bu[k], universe.sample(bu[k], ref_rng)));
        mined_count += bu.size();
      }
    }

    const double denom = double(pair_user.size());
    LossLogRow row;
    row.epoch = epoch;
    row.rec = ep_rec / denom;
    row.de = ep_de / denom;
    row.hal = ep_hal / denom;
    row.total = row.rec + lambda_de * row.de + lambda_hal * row.hal;
    result.loss_log.push_back(row);
    if (mined && mined_count > 0)
      result.mining_log.push_back({epoch,
                                   mined_score_sum / double(mined_count),
                                   uniform_score_sum / double(mined_count)});

    state.next_epoch = epoch + 1;
    result.epochs_run = state.next_epoch;

    if (has_valid && ((epoch + 1) % std::max<std::uint32_t>(cfg.eval_every, 1)
                      == 0)) {
      const auto rep = propagate(state.table, adj_score, layers);
      const auto report = evaluate(rep, ds, SplitTag::valid, {20});
      const double metric = report.recall_at(20);
      if (metric > state.best_valid) {
        state.best_valid = metric;
        state.best_epoch = epoch;
        state.best_table = state.table;
        state.stale_evals = 0;
      } else {
        ++state.stale_evals;
        if (state.stale_evals >= cfg.patience) {
          result.early_stopped = true;
          break;
        }
      }
    }
  }

  result.epochs_run = state.next_epoch;
  result.best_epoch = state.best_epoch;
  result.best_valid = state.best_valid;
  result.table = has_valid && state.best_valid >= 0.0 ? state.best_table
                                                      : state.table;
  return result;
}

// Plain pairwise pretraining; reads no oracle or projector artifact.
inline TrainResult pretrain(const TrainConfig& cfg,
                            const InteractionDataset& ds,
                            TrainState* state_out = nullptr) {
  TrainConfig plain = cfg;
  plain.mode = "plain_bpr";
  const auto g = build_graph(ds);
  TrainGraphs graphs;
  graphs.original = &g;
  TrainState state;
  auto result = run_training(plain, ds, graphs, state, plain.epochs);
  if (state_out) *state_out = std::move(state);
  return result;
}

// Joint optimization over the prepared stage artifacts.
inline TrainResult train_main(const TrainConfig& cfg,
                              const InteractionDataset& ds,
                              const TrainGraphs& graphs,
                              TrainState* state_out = nullptr) {
  TrainState state;
  auto result = run_training(cfg, ds, graphs, state, cfg.epochs);
  if (state_out) *state_out = std::move(state);
  return result;
}

}  // namespace relden
