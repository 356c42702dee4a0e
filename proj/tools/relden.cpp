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
// Command-line front end for the staged training pipeline:
//   prepare | pretrain | align | candidates | rate | edit-graph | train |
//   evaluate | noise-sweep | diagnose
//
// Exit codes: 0 success, 2 missing upstream stage artifact, 3 oracle
// provider failure, 1 any other error.
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relden/pipeline.hpp"

namespace {

using namespace relden;

struct CommonArgs {
  std::string run_dir;
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_file.empty()) cfg = load_config_file(config_file);
    for (const auto& [key, value] : overrides) set_config_key(cfg, key, value);
    return cfg;
  }
};

// Help text per configuration key, shown with defaults by --help.
const char* config_key_help(const std::string& key) {
  static const std::map<std::string, const char*> help{
      {"mode", "training mode: plain_bpr (control) or denoise"},
      {"backbone", "scorer backbone: lightgcn or mf"},
      {"d_rec", "embedding width of users and items"},
      {"layers", "propagation depth for the lightgcn backbone"},
      {"init_std", "std-dev of the normal embedding initialization"},
      {"batch_size", "positive pairs per optimization step"},
      {"lr", "Adam learning rate"},
      {"epochs", "epoch budget (early stopping may end sooner)"},
      {"patience", "stale validation evaluations before stopping"},
      {"eval_every", "epochs between validation evaluations"},
      {"weight_decay", "L2 coefficient added to the gradient"},
      {"seed", "master seed; every random stream derives from it"},
      {"neg_sampling", "negative selection in denoise mode: uniform or mined"},
      {"pool_size", "hard-negative candidates kept per user"},
      {"fresh_negatives", "uniform draws per pool refresh"},
      {"pool_refresh_every", "epochs between pool refreshes"},
      {"align_top_n", "top-N similarity cut for alignment labels"},
      {"align_negatives", "sampled negatives per alignment pair"},
      {"align_tau", "softmax temperature of the alignment objective"},
      {"align_lr", "Adam learning rate for the projector"},
      {"align_epochs", "projector training epochs"},
      {"align_hidden", "projector hidden width"},
      {"align_batch", "alignment pairs per projector step"},
      {"tau_de", "temperature of the cross-graph objective"},
      {"tau_hal", "temperature of the view-agreement objective"},
      {"lambda_de", "weight of the cross-graph objective"},
      {"lambda_hal", "weight of the view-agreement objective"},
      {"edge_drop_rate", "per-edge drop probability for augmented views"},
      {"hal_scope", "sampled denominator size for view agreement; 0 = all"},
      {"cand_negatives", "high-scored negatives sent to the oracle per user"},
      {"cand_positives", "low-scored positives sent to the oracle per user"},
      {"cand_mode", "candidate selection: deterministic or stochastic"},
      {"evidence_size", "interacted-item profiles per item-based query"},
      {"score_graph",
       "graph behind recommendation scores: edited or original"},
      {"eval_ks", "comma-separated ranking cutoffs"},
  };
  auto it = help.find(key);
  return it == help.end() ? "" : it->second;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--run-dir", args.run_dir,
                  "artifact directory (default: RUN_DIR env or a "
                  "config-hash-named directory under runs/)");
  cmd->add_option("--config", args.config_file,
                  "flat key=value config file; flags below override it");
  const TrainConfig defaults;
  for (const auto& field : detail::config_fields()) {
    const std::string key = field.key;
    cmd->add_option_function<std::string>(
           "--" + key,
           [&args, key](const std::string& v) {
             args.overrides.emplace_back(key, v);
           },
           config_key_help(key))
        ->default_str(field.get(defaults));
  }
}

RunPaths open_run(const CommonArgs& args, const TrainConfig& cfg) {
  auto paths = resolve_run_dir(cfg, args.run_dir);
  std::fprintf(stderr, "run dir: %s (config hash %016llx)\n",
               paths.dir.c_str(),
               static_cast<unsigned long long>(config_hash(cfg)));
  return paths;
}

void print_warnings(const Warnings& warnings) {
  for (const auto& w : warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
}

struct ProviderArgs {
  std::string kind = "mock";
  double flip_rate = 0.0;
  std::uint64_t oracle_seed = 0;
  std::string truth_file;
  std::string verdict_file;
  HttpProviderConfig http;
};

void add_provider(CLI::App* cmd, ProviderArgs& args) {
  cmd->add_option("--provider", args.kind, "oracle provider: mock, file, http")
      ->check(CLI::IsMember({"mock", "file", "http"}))
      ->capture_default_str();
  cmd->add_option("--flip-rate", args.flip_rate,
                  "mock: per-channel probability of flipping the hidden "
                  "relevance bit")
      ->capture_default_str();
  cmd->add_option("--oracle-seed", args.oracle_seed,
                  "mock: seed of the flip stream")
      ->capture_default_str();
  cmd->add_option("--truth", args.truth_file,
                  "mock: hidden-relevance pair TSV (default: the prepared "
                  "mock_truth.tsv)");
  cmd->add_option("--verdict-file", args.verdict_file,
                  "file: verdict JSONL to replay");
  cmd->add_option("--endpoint", args.http.url,
                  "http: full URL of the rating endpoint (or env "
                  "RELDEN_ORACLE_URL)");
  cmd->add_option("--auth-header", args.http.auth_header,
                  "http: header carrying the api key")
      ->capture_default_str();
  cmd->add_option("--api-key-env", args.http.api_key_env,
                  "http: environment variable holding the api key")
      ->capture_default_str();
  cmd->add_option("--template-dir", args.http.template_dir,
                  "http: prompt template directory; when set the rendered "
                  "prompt is included in the payload");
  cmd->add_option("--timeout", args.http.timeout_seconds,
                  "http: per-request timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--retries", args.http.max_retries,
                  "http: retries after transient failures")
      ->capture_default_str();
}

std::unique_ptr<OracleProvider> make_provider(const ProviderArgs& args,
                                              const RunPaths& paths) {
  if (args.kind == "mock") {
    std::string truth =
        args.truth_file.empty() ? paths.mock_truth() : args.truth_file;
    require_artifact(truth, "prepare");
    return std::make_unique<MockProvider>(HiddenRelevance::load(truth),
                                          args.flip_rate, args.oracle_seed);
  }
  if (args.kind == "file") {
    if (args.verdict_file.empty())
      throw std::invalid_argument(
          "--verdict-file is required with file provider");
    return std::make_unique<FileProvider>(args.verdict_file);
  }
  HttpProviderConfig cfg = args.http;
  if (cfg.url.empty())
    if (const char* env = std::getenv("RELDEN_ORACLE_URL"); env && *env)
      cfg.url = env;
  if (cfg.url.empty())
    throw std::invalid_argument(
        "--endpoint (or RELDEN_ORACLE_URL) is required with http provider");
  return std::make_unique<HttpProvider>(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relevance-guided denoising trainer for implicit-feedback "
               "recommenders"};
  app.require_subcommand(1);

  // ---- prepare ----
  CommonArgs prep_common;
  PrepareOptions prep;
  std::string prep_format = "tsv";
  std::string ratios = "0.6,0.2,0.2";
  auto* cmd_prepare = app.add_subcommand(
      "prepare", "Load or synthesize a dataset, split it, and inject noise");
  add_common(cmd_prepare, prep_common);
  cmd_prepare->add_flag("--synthetic", prep.synthetic,
                        "generate the synthetic latent-factor corpus");
  cmd_prepare->add_option("--users", prep.synthetic_spec.num_users,
                          "synthetic: user count")
      ->capture_default_str();
  cmd_prepare->add_option("--items", prep.synthetic_spec.num_items,
                          "synthetic: item count")
      ->capture_default_str();
  cmd_prepare->add_option("--latent-dim", prep.synthetic_spec.latent_dim,
                          "synthetic: hidden factor width")
      ->capture_default_str();
  cmd_prepare->add_option("--embed-dim", prep.synthetic_spec.embedding_dim,
                          "synthetic: generated text-embedding width")
      ->capture_default_str();
  cmd_prepare->add_option("--positives-per-user",
                          prep.synthetic_spec.positives_per_user,
                          "synthetic: interactions sampled per user")
      ->capture_default_str();
  cmd_prepare->add_option("--relevance-quantile",
                          prep.synthetic_spec.relevance_quantile,
                          "synthetic: affinity quantile above which a pair "
                          "is hidden-relevant")
      ->capture_default_str();
  cmd_prepare->add_option("--embed-noise", prep.synthetic_spec.embedding_noise,
                          "synthetic: noise std-dev on text embeddings")
      ->capture_default_str();
  cmd_prepare->add_option("--input", prep.input_path,
                          "interaction file to load instead of synthesizing");
  cmd_prepare->add_option("--format", prep_format, "input format")
      ->check(CLI::IsMember({"tsv", "jsonl"}))
      ->capture_default_str();
  cmd_prepare->add_option("--profiles", prep.profiles_path,
                          "profile JSONL keyed by original ids");
  cmd_prepare->add_option("--ratios", ratios, "train,valid,test split ratios")
      ->capture_default_str();
  cmd_prepare->add_flag("--presplit", prep.presplit,
                        "input already carries split tags; do not re-split");
  cmd_prepare->add_option("--noise-ratio", prep.noise_ratio,
                          "injected noise as a fraction of train positives")
      ->capture_default_str();

  // ---- staged commands ----
  CommonArgs pre_common, align_common, cand_common, rate_common, edit_common,
      train_common, eval_common, diag_common, sweep_common;
  auto* cmd_pretrain = app.add_subcommand(
      "pretrain", "Train the plain pairwise control used for candidates");
  add_common(cmd_pretrain, pre_common);

  auto* cmd_align = app.add_subcommand(
      "align", "Train the embedding projector on reliable-positive labels");
  add_common(cmd_align, align_common);
  std::string user_emb_override, item_emb_override;
  cmd_align->add_option("--user-embeddings", user_emb_override,
                        "external user embedding file (text or binary)");
  cmd_align->add_option("--item-embeddings", item_emb_override,
                        "external item embedding file (text or binary)");

  auto* cmd_candidates = app.add_subcommand(
      "candidates", "Select suspect pairs from the pretrained scorer");
  add_common(cmd_candidates, cand_common);

  ProviderArgs provider_args;
  auto* cmd_rate = app.add_subcommand(
      "rate", "Obtain relevance verdicts for the candidate pairs");
  add_common(cmd_rate, rate_common);
  add_provider(cmd_rate, provider_args);

  auto* cmd_edit = app.add_subcommand(
      "edit-graph", "Classify verdicts and rewrite the interaction graph");
  add_common(cmd_edit, edit_common);

  auto* cmd_train =
      app.add_subcommand("train", "Joint training over the staged artifacts");
  add_common(cmd_train, train_common);
  bool train_resume = false;
  cmd_train->add_flag("--resume", train_resume,
                      "continue from the existing main checkpoint (config "
                      "hash must match)");

  std::string eval_split = "test";
  std::string eval_stem, compare_dir;
  auto* cmd_evaluate = app.add_subcommand(
      "evaluate", "Rank the full catalog and report recall/NDCG");
  add_common(cmd_evaluate, eval_common);
  cmd_evaluate->add_option("--split", eval_split, "split to evaluate")
      ->check(CLI::IsMember({"valid", "test"}))
      ->capture_default_str();
  cmd_evaluate->add_option("--stem", eval_stem,
                           "checkpoint stem inside the run dir (default "
                           "main; e.g. pretrain)");
  cmd_evaluate->add_option("--compare", compare_dir,
                           "second run dir; prints a paired t-test against "
                           "its report");

  ProviderArgs sweep_provider;
  std::string sweep_ratios = "0,0.05,0.1,0.15,0.2";
  std::string sweep_modes = "plain_bpr,denoise";
  PrepareOptions sweep_prep;
  sweep_prep.synthetic = true;
  auto* cmd_sweep = app.add_subcommand(
      "noise-sweep",
      "Train each mode across noise ratios on the synthetic corpus and "
      "report drop rates");
  add_common(cmd_sweep, sweep_common);
  cmd_sweep->add_option("--ratios", sweep_ratios, "noise ratios")
      ->capture_default_str();
  cmd_sweep->add_option("--modes", sweep_modes, "modes to sweep")
      ->capture_default_str();
  cmd_sweep->add_option("--users", sweep_prep.synthetic_spec.num_users,
                        "synthetic corpus user count")
      ->capture_default_str();
  cmd_sweep->add_option("--items", sweep_prep.synthetic_spec.num_items,
                        "synthetic corpus item count")
      ->capture_default_str();
  cmd_sweep->add_option("--flip-rate", sweep_provider.flip_rate,
                        "mock oracle flip rate")
      ->capture_default_str();
  cmd_sweep->add_option("--oracle-seed", sweep_provider.oracle_seed,
                        "mock oracle flip seed")
      ->capture_default_str();

  std::uint32_t diag_hard_draws = 3;
  auto* cmd_diagnose = app.add_subcommand(
      "diagnose", "Emit easy/hard/noisy loss and score samples as CSV");
  add_common(cmd_diagnose, diag_common);
  cmd_diagnose->add_option("--hard-draws", diag_hard_draws,
                           "negatives drawn per hard-loss sample")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_prepare->parsed()) {
      auto cfg = prep_common.resolve();
      auto paths = open_run(prep_common, cfg);
      prep.format =
          prep_format == "tsv" ? DatasetFormat::tsv : DatasetFormat::jsonl;
      prep.seed = cfg.seed;
      if (std::sscanf(ratios.c_str(), "%lf,%lf,%lf", &prep.train_ratio,
                      &prep.valid_ratio, &prep.test_ratio) != 3)
        throw std::invalid_argument("--ratios expects three numbers");
      if (!prep.synthetic && prep.input_path.empty())
        throw std::invalid_argument("pass --synthetic or --input FILE");
      prep.synthetic_spec.seed = cfg.seed;
      auto res = stage_prepare(prep, paths);
      print_warnings(res.warnings);
      save_config_file(cfg, paths.config());
      std::printf("prepared %u users, %u items, %zu interactions -> %s\n",
                  res.dataset.num_users, res.dataset.num_items,
                  res.dataset.interactions.size(), paths.dataset().c_str());
    } else if (cmd_pretrain->parsed()) {
      auto cfg = pre_common.resolve();
      auto paths = open_run(pre_common, cfg);
      auto result = stage_pretrain(cfg, paths);
      std::printf("pretrained %u epochs (best valid recall@20 %.6f at epoch "
                  "%u) -> %s.emb\n",
                  result.epochs_run, result.best_valid, result.best_epoch,
                  paths.pretrain_stem().c_str());
    } else if (cmd_align->parsed()) {
      auto cfg = align_common.resolve();
      auto paths = open_run(align_common, cfg);
      if (!user_emb_override.empty() || !item_emb_override.empty()) {
        // External embeddings come keyed by original ids; translate them
        // into the run directory's canonical text files.
        const auto ds = load_prepared_dataset(paths);
        IdRemap remap = load_remap_tsv(paths.remap());
        auto raw = ingest_llm_embeddings(user_emb_override, item_emb_override,
                                         ds.num_users, ds.num_items,
                                         remap.identity() ? nullptr : &remap);
        save_embeddings_text(paths.user_embeddings(), raw.users);
        save_embeddings_text(paths.item_embeddings(), raw.items);
      }
      auto artifacts = stage_align(cfg, paths);
      std::printf("aligned projector over %zu labeled pairs -> %s\n",
                  artifacts.labels.pair_count(), paths.projector().c_str());
    } else if (cmd_candidates->parsed()) {
      auto cfg = cand_common.resolve();
      auto paths = open_run(cand_common, cfg);
      Warnings warnings;
      auto candidates = stage_candidates(cfg, paths, &warnings);
      print_warnings(warnings);
      std::printf("selected %zu candidate pairs -> %s\n", candidates.size(),
                  paths.candidates().c_str());
    } else if (cmd_rate->parsed()) {
      auto cfg = rate_common.resolve();
      auto paths = open_run(rate_common, cfg);
      auto provider = make_provider(provider_args, paths);
      auto verdicts = stage_rate(cfg, paths, *provider);
      std::printf("rated %zu pairs (%zu provider calls) -> %s\n",
                  verdicts.size(), provider->calls(),
                  paths.verdicts().c_str());
    } else if (cmd_edit->parsed()) {
      auto cfg = edit_common.resolve();
      auto paths = open_run(edit_common, cfg);
      auto res = stage_edit_graph(cfg, paths);
      std::printf(
          "hard pairs: %zu, noisy pairs: %zu, edited edges: %zu -> %s\n",
          res.classes.hard.size(), res.classes.noisy.size(),
          res.edited.edges.size(), paths.edited_edges().c_str());
    } else if (cmd_train->parsed()) {
      auto cfg = train_common.resolve();
      auto paths = open_run(train_common, cfg);
      auto result = stage_train(cfg, paths, train_resume);
      std::printf("trained %u epochs (best valid recall@20 %.6f at epoch %u) "
                  "-> %s.emb\n",
                  result.epochs_run, result.best_valid, result.best_epoch,
                  paths.main_stem().c_str());
    } else if (cmd_evaluate->parsed()) {
      auto cfg = eval_common.resolve();
      auto paths = open_run(eval_common, cfg);
      const std::string stem =
          eval_stem.empty() ? std::string() : paths.at(eval_stem);
      auto report =
          stage_evaluate(cfg, paths, split_from_string(eval_split), stem);
      std::fputs(report.table().c_str(), stdout);
      if (!compare_dir.empty()) {
        // The other run is evaluated under its own resolved configuration.
        RunPaths other{compare_dir};
        require_artifact(other.config(), "train");
        auto other_cfg = load_config_file(other.config());
        auto other_report = stage_evaluate(other_cfg, other,
                                           split_from_string(eval_split),
                                           std::string());
        for (auto k : report.ks) {
          auto t = paired_t_test(report, other_report, Metric::recall, k);
          std::printf("recall@%u vs %s: diff %+0.6f, t=%.3f, p=%.4g\n", k,
                      compare_dir.c_str(), t.mean_diff, t.t, t.p);
        }
      }
    } else if (cmd_sweep->parsed()) {
      auto cfg = sweep_common.resolve();
      auto paths = open_run(sweep_common, cfg);
      NoiseSweepOptions opt;
      opt.prepare = sweep_prep;
      opt.prepare.seed = cfg.seed;
      opt.prepare.synthetic_spec.seed = cfg.seed;
      opt.oracle.flip_rate = sweep_provider.flip_rate;
      opt.oracle.seed = sweep_provider.oracle_seed;
      opt.root = paths.at("sweep");
      opt.ratios.clear();
      std::stringstream rs(sweep_ratios);
      for (std::string tok; std::getline(rs, tok, ',');)
        if (!tok.empty()) opt.ratios.push_back(std::stod(tok));
      opt.modes.clear();
      std::stringstream ms(sweep_modes);
      for (std::string tok; std::getline(ms, tok, ',');)
        if (!tok.empty()) opt.modes.push_back(tok);
      auto report = noise_sweep(cfg, opt);
      report.save_csv(paths.at("robustness.csv"));
      std::printf("mode\tratio\trecall@%u\tdrop\n",
                  report.rows[0].report.ks[0]);
      for (const auto& row : report.rows)
        std::printf("%s\t%.2f\t%.6f\t%.4f\n", row.mode.c_str(), row.ratio,
                    row.report.recall[0], row.recall_drop[0]);
      std::printf("robustness table -> %s\n",
                  paths.at("robustness.csv").c_str());
    } else if (cmd_diagnose->parsed()) {
      auto cfg = diag_common.resolve();
      auto paths = open_run(diag_common, cfg);
      auto tables = stage_diagnose(cfg, paths, diag_hard_draws);
      std::printf("diagnostics (%zu easy, %zu hard, %zu noisy losses) -> %s\n",
                  tables.easy_loss.size(), tables.hard_loss.size(),
                  tables.noisy_loss.size(), paths.diagnostics().c_str());
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s (missing stage: %s)\n", e.what(),
                 e.stage().c_str());
    return 2;
  } catch (const ProviderError& e) {
    std::fprintf(stderr, "provider error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
