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
// Staged pipeline over a run directory. Each stage persists its artifacts
// and validates that its upstream stages ran first, so the expensive oracle
// stage stays cacheable and every command is re-runnable.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/eval.hpp"
#include "relden/graph.hpp"
#include "relden/oracle.hpp"
#include "relden/semantic.hpp"
#include "relden/synthetic.hpp"
#include "relden/trainer.hpp"

namespace relden {

struct RunPaths {
  std::string dir;

  std::string at(const std::string& name) const {
    return (std::filesystem::path(dir) / name).string();
  }
  std::string config() const { return at("config_resolved.cfg"); }
  std::string dataset() const { return at("dataset.tsv"); }
  std::string remap() const { return at("remap.tsv"); }
  std::string profiles() const { return at("profiles.jsonl"); }
  std::string missing_profiles() const { return at("missing_profiles.txt"); }
  std::string user_embeddings() const { return at("user_embeddings.txt"); }
  std::string item_embeddings() const { return at("item_embeddings.txt"); }
  std::string mock_truth() const { return at("mock_truth.tsv"); }
  std::string pretrain_stem() const { return at("pretrain"); }
  std::string pretrain_log() const { return at("pretrain_log.csv"); }
  std::string projector() const { return at("projector.bin"); }
  std::string projected() const { return at("projected.emb"); }
  std::string candidates() const { return at("candidates.tsv"); }
  std::string verdicts() const { return at("verdicts.jsonl"); }
  std::string hard_pairs() const { return at("c_h.tsv"); }
  std::string noisy_pairs() const { return at("c_n.tsv"); }
  std::string edited_edges() const { return at("edges_edited.tsv"); }
  std::string main_stem() const { return at("main"); }
  std::string train_log() const { return at("train_log.csv"); }
  std::string mining_log() const { return at("mining_log.csv"); }
  std::string metrics() const { return at("metrics.csv"); }
  std::string diagnostics() const { return at("diagnostics.csv"); }
};

// RUN_DIR env var overrides the default hash-named directory.
inline RunPaths resolve_run_dir(const TrainConfig& cfg,
                                const std::string& override_dir = "") {
  std::string dir = override_dir;
  if (dir.empty())
    if (const char* env = std::getenv("RUN_DIR"); env && *env) dir = env;
  if (dir.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    dir = "runs/run_" + std::string(buf);
  }
  std::filesystem::create_directories(dir);
  return RunPaths{dir};
}

inline void require_artifact(const std::string& path,
                             const std::string& stage) {
  if (!std::filesystem::exists(path))
    throw StageError(stage, "missing artifact '" + path +
                                "'; run the '" + stage + "' stage first");
}

inline CandidateMode candidate_mode_of(const TrainConfig& cfg) {
  if (cfg.cand_mode == "deterministic") return CandidateMode::deterministic;
  if (cfg.cand_mode == "stochastic") return CandidateMode::stochastic;
  throw std::invalid_argument("unknown cand_mode '" + cfg.cand_mode + "'");
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------
struct PrepareOptions {
  // Either synthetic generation...
  bool synthetic = false;
  SyntheticSpec synthetic_spec;
  // ...or external files.
  std::string input_path;
  DatasetFormat format = DatasetFormat::tsv;
  std::string profiles_path;  // optional JSONL

  double train_ratio = 0.6, valid_ratio = 0.2, test_ratio = 0.2;
  double noise_ratio = 0.0;
  std::uint64_t seed = 42;
  bool presplit = false;  // input already carries split tags
};

struct PrepareResult {
  InteractionDataset dataset;
  Warnings warnings;
};

inline PrepareResult stage_prepare(const PrepareOptions& opt,
                                   const RunPaths& paths) {
  PrepareResult res;
  if (opt.synthetic) {
    auto corpus = generate_synthetic_corpus(opt.synthetic_spec);
    res.dataset = split_dataset(corpus.dataset, opt.train_ratio,
                                opt.valid_ratio, opt.test_ratio, opt.seed,
                                &res.warnings);
    save_profiles(corpus.profiles, paths.profiles());
    save_embeddings_text(paths.user_embeddings(), corpus.raw_embeddings.users);
    save_embeddings_text(paths.item_embeddings(), corpus.raw_embeddings.items);
    corpus.relevance.save(paths.mock_truth());
    IdRemap identity;
    for (std::uint32_t u = 0; u < res.dataset.num_users; ++u)
      identity.user_original.push_back(u);
    for (std::uint32_t i = 0; i < res.dataset.num_items; ++i)
      identity.item_original.push_back(i);
    save_remap_tsv(identity, paths.remap());
  } else {
    auto loaded = load_dataset(opt.input_path, opt.format);
    res.warnings = loaded.warnings;
    res.dataset = opt.presplit
                      ? loaded.dataset
                      : split_dataset(loaded.dataset, opt.train_ratio,
                                      opt.valid_ratio, opt.test_ratio,
                                      opt.seed, &res.warnings);
    save_remap_tsv(loaded.remap, paths.remap());
    if (!opt.profiles_path.empty()) {
      auto profs = load_profiles(opt.profiles_path, &loaded.remap);
      for (auto& w : profs.warnings) res.warnings.push_back(w);
      save_profiles(profs.store, paths.profiles());
      auto missing = profs.store.missing_against(res.dataset);
      std::ofstream rep(paths.missing_profiles());
      for (UserId u : missing.users) rep << "user\t" << u << '\n';
      for (ItemId i : missing.items) rep << "item\t" << i << '\n';
      if (!missing.empty())
        res.warnings.push_back(std::to_string(missing.users.size()) +
                               " user / " +
                               std::to_string(missing.items.size()) +
                               " item profile(s) missing; see " +
                               paths.missing_profiles());
    }
  }
  if (opt.noise_ratio > 0.0)
    res.dataset = inject_noise(res.dataset, {opt.noise_ratio, opt.seed});
  save_dataset_tsv(res.dataset, paths.dataset());
  return res;
}

inline InteractionDataset load_prepared_dataset(const RunPaths& paths) {
  require_artifact(paths.dataset(), "prepare");
  auto loaded = load_dataset(paths.dataset(), DatasetFormat::tsv);
  loaded.dataset.validate();
  return loaded.dataset;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------
inline TrainResult stage_pretrain(const TrainConfig& cfg,
                                  const RunPaths& paths) {
  const auto ds = load_prepared_dataset(paths);
  TrainConfig plain = cfg;
  plain.mode = "plain_bpr";
  TrainState state;
  auto result = pretrain(plain, ds, &state);
  save_checkpoint(paths.pretrain_stem(), state, "pretrain",
                  config_hash(plain));
  save_loss_log_csv(result.loss_log, paths.pretrain_log());
  save_config_file(cfg, paths.config());
  return result;
}

// Best-validation snapshot when one exists, current table otherwise.
inline EmbeddingTable<float> load_deployed_table(const std::string& stem) {
  const auto meta = load_checkpoint_meta(stem);
  if (meta.best_valid >= 0.0) return load_embedding_file(stem + ".best.emb");
  return load_embedding_file(stem + ".emb");
}

template <typename T>
Representations<T> representations_from(const EmbeddingTable<T>& table,
                                        const InteractionGraph& g,
                                        const TrainConfig& cfg,
                                        GraphTag tag = GraphTag::original) {
  const auto adj = normalize(g);
  return propagate(table, adj, cfg.effective_layers(), tag);
}

// ---------------------------------------------------------------------------
// align (projector training)
// ---------------------------------------------------------------------------
struct AlignArtifacts {
  AlignmentLabels labels;
  Projector<float> projector;
  ProjectedEmbeddings<float> projected;
};

inline AlignArtifacts stage_align(const TrainConfig& cfg,
                                  const RunPaths& paths) {
  require_artifact(paths.pretrain_stem() + ".meta.json", "pretrain");
  const auto ds = load_prepared_dataset(paths);
  require_artifact(paths.user_embeddings(), "prepare");
  require_artifact(paths.item_embeddings(), "prepare");
  auto raw = ingest_llm_embeddings(paths.user_embeddings(),
                                   paths.item_embeddings(), ds.num_users,
                                   ds.num_items);
  AlignArtifacts out;
  out.labels = build_alignment_labels(raw, ds, cfg.align_top_n);
  AlignTrainConfig acfg;
  acfg.tau = cfg.align_tau;
  acfg.negatives = cfg.align_negatives;
  acfg.epochs = cfg.align_epochs;
  acfg.lr = cfg.align_lr;
  acfg.hidden = cfg.align_hidden;
  acfg.batch_size = cfg.align_batch;
  acfg.out_dim = cfg.d_rec;
  acfg.seed = derive_seed({cfg.seed, 0xa113ull});
  out.projector = train_projector<float>(raw, out.labels, acfg);
  out.projected = project(out.projector, raw);
  save_projector(out.projector, paths.projector());
  save_embedding_file(paths.projected(), out.projected.users,
                      out.projected.items);
  return out;
}

// ---------------------------------------------------------------------------
// candidates / rate / edit-graph
// ---------------------------------------------------------------------------
inline std::vector<CandidatePair> stage_candidates(const TrainConfig& cfg,
                                                   const RunPaths& paths,
                                                   Warnings* warnings =
                                                       nullptr) {
  require_artifact(paths.pretrain_stem() + ".meta.json", "pretrain");
  const auto ds = load_prepared_dataset(paths);
  const auto table = load_deployed_table(paths.pretrain_stem());
  const auto rep = representations_from(table, build_graph(ds), cfg);
  auto candidates = build_candidates(rep, ds, cfg.cand_negatives,
                                     cfg.cand_positives,
                                     candidate_mode_of(cfg),
                                     derive_seed({cfg.seed, 0xca9dull}),
                                     warnings);
  save_candidates_tsv(candidates, paths.candidates());
  return candidates;
}

inline std::vector<RelevanceVerdict> stage_rate(const TrainConfig& cfg,
                                                const RunPaths& paths,
                                                OracleProvider& provider) {
  require_artifact(paths.candidates(), "candidates");
  require_artifact(paths.profiles(), "prepare");
  const auto ds = load_prepared_dataset(paths);
  const auto candidates = load_candidates_tsv(paths.candidates());
  const auto profiles = load_profiles(paths.profiles()).store;

  const auto table = load_deployed_table(paths.pretrain_stem());
  const auto rep = representations_from(table, build_graph(ds), cfg);
  auto positives = ds.positives_by_user(SplitTag::train);
  std::vector<std::vector<ItemId>> evidence(ds.num_users);
  for (UserId u = 0; u < ds.num_users; ++u)
    evidence[u] =
        build_evidence_items(rep, positives[u], u, cfg.evidence_size);

  auto cache = VerdictCache::load_or_empty(paths.verdicts());
  auto verdicts =
      rate_candidates(provider, &cache, candidates, profiles, evidence);
  cache.save(paths.verdicts());
  return verdicts;
}

struct EditResult {
  Classification classes;
  InteractionGraph edited;
};

inline EditResult stage_edit_graph(const TrainConfig& cfg,
                                   const RunPaths& paths) {
  (void)cfg;
  require_artifact(paths.candidates(), "candidates");
  require_artifact(paths.verdicts(), "rate");
  const auto ds = load_prepared_dataset(paths);
  const auto candidates = load_candidates_tsv(paths.candidates());
  const auto verdicts = load_verdicts_jsonl(paths.verdicts());
  EditResult res;
  res.classes = classify(verdicts, candidates);
  const auto g = build_graph(ds);
  res.edited = apply_relevance_edits(g, res.classes.hard, res.classes.noisy);
  save_pairs_tsv(res.classes.hard, paths.hard_pairs());
  save_pairs_tsv(res.classes.noisy, paths.noisy_pairs());
  save_edges_tsv(res.edited, paths.edited_edges());
  return res;
}

// ---------------------------------------------------------------------------
// train / evaluate
// ---------------------------------------------------------------------------
inline TrainResult stage_train(const TrainConfig& cfg, const RunPaths& paths,
                               bool resume = false) {
  const auto ds = load_prepared_dataset(paths);
  const auto g = build_graph(ds);
  TrainGraphs graphs;
  graphs.original = &g;

  InteractionGraph edited;
  ProjectedEmbeddings<float> projected;
  if (cfg.train_mode() == TrainMode::denoise) {
    require_artifact(paths.edited_edges(), "edit-graph");
    edited = load_edges_tsv(paths.edited_edges(), ds.num_users, ds.num_items);
    graphs.edited = &edited;
    if (cfg.sampling() == NegSampling::mined) {
      require_artifact(paths.projected(), "align");
      auto stored = load_embedding_file(paths.projected());
      projected.users = std::move(stored.users);
      projected.items = std::move(stored.items);
      graphs.projected = &projected;
    }
    require_artifact(paths.hard_pairs(), "edit-graph");
    graphs.hard_items_by_user.resize(ds.num_users);
    for (const auto& e : load_edge_pairs_tsv(paths.hard_pairs())) {
      if (e.user >= ds.num_users || e.item >= ds.num_items)
        throw ParseError("pair (" + std::to_string(e.user) + "," +
                         std::to_string(e.item) + ") in '" +
                         paths.hard_pairs() + "' is out of range");
      graphs.hard_items_by_user[e.user].push_back(e.item);
    }
  }

  TrainState state;
  if (resume) {
    require_artifact(paths.main_stem() + ".meta.json", "train");
    const auto meta = load_checkpoint_meta(paths.main_stem());
    if (meta.config_hash != config_hash(cfg))
      throw std::runtime_error(
          "checkpoint was written under a different configuration "
          "(hash mismatch); refusing to resume");
    state = load_checkpoint(paths.main_stem(), meta, ds.num_users);
  }
  auto result = run_training(cfg, ds, graphs, state, cfg.epochs);
  save_checkpoint(paths.main_stem(), state, "main", config_hash(cfg));
  save_loss_log_csv(result.loss_log, paths.train_log());
  if (!result.mining_log.empty())
    save_mining_log_csv(result.mining_log, paths.mining_log());
  save_config_file(cfg, paths.config());
  return result;
}

inline MetricsReport stage_evaluate(const TrainConfig& cfg,
                                    const RunPaths& paths, SplitTag split,
                                    const std::string& stem_override = "") {
  const auto ds = load_prepared_dataset(paths);
  const std::string stem =
      stem_override.empty() ? paths.main_stem() : stem_override;
  require_artifact(stem + ".meta.json", "train");
  const auto table = load_deployed_table(stem);

  InteractionGraph g;
  if (cfg.train_mode() == TrainMode::denoise &&
      cfg.score_graph_kind() == ScoreGraph::edited) {
    require_artifact(paths.edited_edges(), "edit-graph");
    g = load_edges_tsv(paths.edited_edges(), ds.num_users, ds.num_items);
  } else {
    g = build_graph(ds);
  }
  auto report = evaluate(representations_from(table, g, cfg), ds, split,
                         cfg.eval_cutoffs());
  report.save_csv(paths.metrics());
  return report;
}

// ---------------------------------------------------------------------------
// Full pipeline + noise sweep
// ---------------------------------------------------------------------------
struct MockOracleOptions {
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
};

// Runs every stage the mode requires against the prepared run directory.
inline MetricsReport run_pipeline(const TrainConfig& cfg,
                                  const RunPaths& paths,
                                  const MockOracleOptions& oracle) {
  stage_pretrain(cfg, paths);
  if (cfg.train_mode() == TrainMode::denoise) {
    stage_align(cfg, paths);
    stage_candidates(cfg, paths);
    MockProvider provider(HiddenRelevance::load(paths.mock_truth()),
                          oracle.flip_rate, oracle.seed);
    stage_rate(cfg, paths, provider);
    stage_edit_graph(cfg, paths);
  }
  stage_train(cfg, paths);
  return stage_evaluate(cfg, paths, SplitTag::test);
}

struct RobustnessRow {
  double ratio = 0.0;
  std::string mode;
  MetricsReport report;
  std::vector<double> recall_drop;  // per k, vs the same mode at ratio 0
  std::vector<double> ndcg_drop;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;

  void save_csv(const std::string& path) const {
    AtomicFile file(path);
    auto& out = file.out();
    out.precision(17);
    out << "mode,ratio,k,recall,ndcg,recall_drop,ndcg_drop\n";
    for (const auto& r : rows)
      for (std::size_t c = 0; c < r.report.ks.size(); ++c)
        out << r.mode << ',' << r.ratio << ',' << r.report.ks[c] << ','
            << r.report.recall[c] << ',' << r.report.ndcg[c] << ','
            << r.recall_drop[c] << ',' << r.ndcg_drop[c] << '\n';
    file.commit();
  }

  const RobustnessRow& row(const std::string& mode, double ratio) const {
    for (const auto& r : rows)
      if (r.mode == mode && r.ratio == ratio) return r;
    throw std::invalid_argument("no sweep row for " + mode);
  }
};

struct NoiseSweepOptions {
  PrepareOptions prepare;           // noise_ratio is overridden per run
  std::vector<double> ratios{0.0, 0.05, 0.10, 0.15, 0.20};
  std::vector<std::string> modes{"plain_bpr", "denoise"};
  MockOracleOptions oracle;
  std::string root;  // sub-run directories live here
};

inline RobustnessReport noise_sweep(const TrainConfig& base,
                                    const NoiseSweepOptions& opt) {
  RobustnessReport report;
  for (const auto& mode : opt.modes) {
    for (double ratio : opt.ratios) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      char sub[64];
      std::snprintf(sub, sizeof(sub), "%s_noise_%04d", mode.c_str(),
                    int(std::lround(ratio * 1000)));
      RunPaths paths{(std::filesystem::path(opt.root) / sub).string()};
      std::filesystem::create_directories(paths.dir);

      PrepareOptions prep = opt.prepare;
      prep.noise_ratio = ratio;
      stage_prepare(prep, paths);
      RobustnessRow row;
      row.ratio = ratio;
      row.mode = mode;
      row.report = run_pipeline(cfg, paths, opt.oracle);
      report.rows.push_back(std::move(row));
    }
    // Drop rates against the zero-noise run of the same mode.
    const RobustnessRow* base_row = nullptr;
    for (auto& r : report.rows)
      if (r.mode == mode && r.ratio == 0.0) base_row = &r;
    for (auto& r : report.rows) {
      if (r.mode != mode || !r.recall_drop.empty()) continue;
      r.recall_drop.assign(r.report.ks.size(), 0.0);
      r.ndcg_drop.assign(r.report.ks.size(), 0.0);
      if (!base_row) continue;
      for (std::size_t c = 0; c < r.report.ks.size(); ++c) {
        if (base_row->report.recall[c] > 0.0)
          r.recall_drop[c] = (base_row->report.recall[c] -
                              r.report.recall[c]) /
                             base_row->report.recall[c];
        if (base_row->report.ndcg[c] > 0.0)
          r.ndcg_drop[c] =
              (base_row->report.ndcg[c] - r.report.ndcg[c]) /
              base_row->report.ndcg[c];
      }
    }
  }
  return report;
}

inline DiagnosticsTables stage_diagnose(const TrainConfig& cfg,
                                        const RunPaths& paths,
                                        std::uint32_t n_hard = 3) {
  const auto ds = load_prepared_dataset(paths);
  const std::string stem = paths.main_stem();
  require_artifact(stem + ".meta.json", "train");
  const auto table = load_deployed_table(stem);
  const auto g = build_graph(ds);
  const auto rep = representations_from(table, g, cfg);
  auto tables = sample_diagnostics(rep, ds, g, n_hard,
                                   derive_seed({cfg.seed, 0xd1a6ull}));
  tables.save_csv(paths.diagnostics());
  return tables;
}

}  // namespace relden
