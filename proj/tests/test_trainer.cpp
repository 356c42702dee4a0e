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

#include "relden/pipeline.hpp"
#include "relden/synthetic.hpp"
#include "relden/trainer.hpp"
#include "testutil.hpp"

using namespace relden;

namespace {

// Small split corpus shared by the trainer tests.
InteractionDataset small_corpus(std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.num_users = 40;
  spec.num_items = 30;
  spec.positives_per_user = 10;
  spec.seed = seed;
  auto corpus = generate_synthetic_corpus(spec);
  return split_dataset(corpus.dataset, 0.6, 0.2, 0.2, seed);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.d_rec = 16;
  cfg.layers = 2;
  cfg.batch_size = 128;
  cfg.epochs = 8;
  cfg.patience = 50;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("config files round-trip and reject unknown keys", "[trainer]") {
  testutil::TempDir tmp("cfg");
  TrainConfig cfg;
  cfg.mode = "denoise";
  cfg.lambda_de = 0.3;
  cfg.pool_size = 7;
  save_config_file(cfg, tmp.path("c.cfg"));
  auto back = load_config_file(tmp.path("c.cfg"));
  CHECK(back.mode == "denoise");
  CHECK(back.lambda_de == Approx(0.3));
  CHECK(back.pool_size == 7);
  CHECK(config_hash(back) == config_hash(cfg));

  testutil::write_file(tmp.path("bad.cfg"), "no_such_key = 1\n");
  REQUIRE_THROWS_WITH(load_config_file(tmp.path("bad.cfg")),
                      Catch::Contains("no_such_key"));

  TrainConfig other = cfg;
  set_config_key(other, "lambda_de", "0.9");
  CHECK(other.lambda_de == Approx(0.9));
  CHECK(config_hash(other) != config_hash(cfg));
  CHECK_THROWS_AS(set_config_key(other, "bogus", "1"), std::invalid_argument);
}

TEST_CASE("mode and backbone strings are validated", "[trainer]") {
  TrainConfig cfg;
  cfg.mode = "launder";
  CHECK_THROWS_AS(cfg.train_mode(), std::invalid_argument);
  cfg.mode = "denoise";
  CHECK(cfg.train_mode() == TrainMode::denoise);
  cfg.backbone = "mf";
  CHECK(cfg.effective_layers() == 0);
  cfg.backbone = "lightgcn";
  cfg.layers = 3;
  CHECK(cfg.effective_layers() == 3);
}

TEST_CASE("pretraining loss decreases and is seed-stable", "[trainer]") {
  auto ds = small_corpus();
  auto cfg = small_config();
  cfg.epochs = 6;
  auto a = pretrain(cfg, ds);
  auto b = pretrain(cfg, ds);

  REQUIRE(a.loss_log.size() == 6);
  // Loss decreases over the first five epochs in at least four steps.
  int drops = 0;
  for (int e = 1; e < 5; ++e)
    drops += a.loss_log[e].total < a.loss_log[e - 1].total;
  CHECK(drops >= 3);
  CHECK(a.loss_log.back().total < a.loss_log.front().total);

  // Identical seeds give identical trajectories and tables, bitwise.
  REQUIRE(b.loss_log.size() == a.loss_log.size());
  for (std::size_t e = 0; e < a.loss_log.size(); ++e)
    REQUIRE(a.loss_log[e].total == b.loss_log[e].total);
  for (std::size_t k = 0; k < a.table.users.size(); ++k)
    REQUIRE(a.table.users.data()[k] == b.table.users.data()[k]);
  CHECK(a.best_valid == b.best_valid);

  // Plain mode never reports the auxiliary losses.
  for (const auto& row : a.loss_log) {
    CHECK(row.de == 0.0);
    CHECK(row.hal == 0.0);
    CHECK(row.total == row.rec);
  }
}

TEST_CASE("the control path equals main training with zero weights",
          "[trainer]") {
  auto ds = small_corpus(11);
  auto cfg = small_config();
  cfg.epochs = 4;

  TrainState pre_state;
  auto plain = pretrain(cfg, ds, &pre_state);

  // Main training in denoise mode with zero-weight objectives, uniform
  // sampling, and an edited graph identical to the base graph.
  TrainConfig main_cfg = cfg;
  main_cfg.mode = "denoise";
  main_cfg.neg_sampling = "uniform";
  main_cfg.lambda_de = 0.0;
  main_cfg.lambda_hal = 0.0;
  main_cfg.score_graph = "edited";
  const auto g = build_graph(ds);
  TrainGraphs graphs;
  graphs.original = &g;
  graphs.edited = &g;
  auto main = train_main(main_cfg, ds, graphs);

  REQUIRE(main.loss_log.size() == plain.loss_log.size());
  for (std::size_t e = 0; e < main.loss_log.size(); ++e)
    REQUIRE(main.loss_log[e].total == plain.loss_log[e].total);
  for (std::size_t k = 0; k < main.table.users.size(); ++k)
    REQUIRE(main.table.users.data()[k] == plain.table.users.data()[k]);
}

TEST_CASE("one small-rate step descends on a frozen batch", "[trainer]") {
  auto ds = small_corpus(13);
  SyntheticSpec spec;
  spec.num_users = 40;
  spec.num_items = 30;
  spec.seed = 13;
  auto corpus = generate_synthetic_corpus(spec);

  TrainConfig cfg = small_config();
  cfg.mode = "denoise";
  cfg.epochs = 2;
  cfg.batch_size = 100000;      // single batch per epoch
  cfg.lr = 1e-4;
  cfg.edge_drop_rate = 0.0;     // deterministic augmented views
  cfg.lambda_de = 0.2;
  cfg.lambda_hal = 0.2;
  cfg.pool_refresh_every = 100; // pools fixed after initialization
  cfg.eval_every = 100;         // no early-stop interference

  const auto g = build_graph(ds);
  // Edit with a couple of synthetic verdicts so G' differs from G.
  std::vector<Edge> hard{{0, 5}, {1, 7}};
  std::vector<Edge> noisy;
  for (const auto& e : g.edges)
    if (std::find(hard.begin(), hard.end(), e) == hard.end()) {
      noisy.push_back(e);
      break;
    }
  auto edited = apply_relevance_edits(g, hard, noisy);
  auto labels = build_alignment_labels(corpus.raw_embeddings, ds, 10);
  AlignTrainConfig acfg;
  acfg.negatives = 5;
  acfg.epochs = 4;
  acfg.hidden = 8;
  acfg.out_dim = cfg.d_rec;
  acfg.seed = 2;
  auto projector = train_projector<float>(corpus.raw_embeddings, labels, acfg);
  auto projected = project(projector, corpus.raw_embeddings);

  TrainGraphs graphs;
  graphs.original = &g;
  graphs.edited = &edited;
  graphs.projected = &projected;
  auto result = train_main(cfg, ds, graphs);
  REQUIRE(result.loss_log.size() == 2);
  // Epoch 1 re-evaluates the identical objective after exactly one Adam
  // step at lr=1e-4; it must have gone down.
  CHECK(result.loss_log[1].total < result.loss_log[0].total);
}

TEST_CASE("mined training logs the mining score gap", "[trainer]") {
  auto ds = small_corpus(17);
  SyntheticSpec spec;
  spec.num_users = 40;
  spec.num_items = 30;
  spec.seed = 17;
  auto corpus = generate_synthetic_corpus(spec);

  TrainConfig cfg = small_config();
  cfg.mode = "denoise";
  cfg.epochs = 3;
  cfg.lambda_de = 0.1;
  cfg.lambda_hal = 0.1;

  const auto g = build_graph(ds);
  auto labels = build_alignment_labels(corpus.raw_embeddings, ds, 10);
  AlignTrainConfig acfg;
  acfg.negatives = 5;
  acfg.epochs = 4;
  acfg.hidden = 8;
  acfg.out_dim = cfg.d_rec;
  acfg.seed = 2;
  auto projector = train_projector<float>(corpus.raw_embeddings, labels, acfg);
  auto projected = project(projector, corpus.raw_embeddings);

  TrainGraphs graphs;
  graphs.original = &g;
  graphs.edited = &g;
  graphs.projected = &projected;
  auto result = train_main(cfg, ds, graphs);
  REQUIRE(result.mining_log.size() == 3);
  for (const auto& row : result.mining_log) {
    CHECK(std::isfinite(row.mined_mean_score));
    CHECK(std::isfinite(row.uniform_mean_score));
  }
}

TEST_CASE("missing stage artifacts raise stage errors", "[trainer]") {
  auto ds = small_corpus(19);
  TrainConfig cfg = small_config();
  cfg.mode = "denoise";
  const auto g = build_graph(ds);

  SECTION("edited graph required") {
    TrainGraphs graphs;
    graphs.original = &g;
    try {
      train_main(cfg, ds, graphs);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "edit-graph");
    }
  }
  SECTION("projected embeddings required for mined sampling") {
    TrainGraphs graphs;
    graphs.original = &g;
    graphs.edited = &g;
    try {
      train_main(cfg, ds, graphs);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "projector");
    }
  }
}

TEST_CASE("checkpoints resume into the identical trajectory", "[trainer]") {
  testutil::TempDir tmp("resume");
  auto ds = small_corpus(23);
  TrainConfig cfg = small_config();
  cfg.epochs = 6;
  cfg.mode = "plain_bpr";
  const auto g = build_graph(ds);
  TrainGraphs graphs;
  graphs.original = &g;

  // Uninterrupted run.
  TrainState full_state;
  auto full = run_training(cfg, ds, graphs, full_state, cfg.epochs);

  // Run three epochs, checkpoint, reload, run three more.
  TrainState half_state;
  auto first = run_training(cfg, ds, graphs, half_state, 3);
  save_checkpoint(tmp.path("ck"), half_state, "pretrain", config_hash(cfg));
  auto meta = load_checkpoint_meta(tmp.path("ck"));
  CHECK(meta.stage == "pretrain");
  CHECK(meta.epoch == 3);
  REQUIRE(meta.config_hash == config_hash(cfg));
  auto resumed_state = load_checkpoint(tmp.path("ck"), meta, ds.num_users);
  auto second = run_training(cfg, ds, graphs, resumed_state, cfg.epochs);

  REQUIRE(first.loss_log.size() + second.loss_log.size() ==
          full.loss_log.size());
  for (std::size_t e = 0; e < 3; ++e)
    REQUIRE(full.loss_log[e].total == first.loss_log[e].total);
  for (std::size_t e = 3; e < 6; ++e)
    REQUIRE(full.loss_log[e].total == second.loss_log[e - 3].total);
  for (std::size_t k = 0; k < full_state.table.users.size(); ++k)
    REQUIRE(full_state.table.users.data()[k] ==
            resumed_state.table.users.data()[k]);
  for (std::size_t k = 0; k < full_state.adam.m.size(); ++k)
    REQUIRE(full_state.adam.m[k] == resumed_state.adam.m[k]);
}

TEST_CASE("early stopping keeps the best validation snapshot", "[trainer]") {
  auto ds = small_corpus(29);
  TrainConfig cfg = small_config();
  cfg.epochs = 40;
  cfg.patience = 3;
  const auto g = build_graph(ds);
  TrainGraphs graphs;
  graphs.original = &g;
  TrainState state;
  auto result = run_training(cfg, ds, graphs, state, cfg.epochs);
  if (result.early_stopped) {
    CHECK(result.epochs_run < 40);
    CHECK(result.best_epoch < result.epochs_run);
  }
  CHECK(result.best_valid >= 0.0);
  // The published table is the best snapshot.
  for (std::size_t k = 0; k < result.table.users.size(); ++k)
    REQUIRE(result.table.users.data()[k] == state.best_table.users.data()[k]);
}

TEST_CASE("loss and mining logs serialize as csv", "[trainer]") {
  testutil::TempDir tmp("logs");
  std::vector<LossLogRow> rows{{0, 0.9, 0.1, 0.2, 0.93},
                               {1, 0.8, 0.1, 0.2, 0.83}};
  save_loss_log_csv(rows, tmp.path("loss.csv"));
  std::ifstream in(tmp.path("loss.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,l_rec,l_de,l_hal,l_total");
  std::getline(in, line);
  CHECK_THAT(line, Catch::StartsWith("0,"));

  std::vector<MiningLogRow> mrows{{0, 0.5, -0.1}};
  save_mining_log_csv(mrows, tmp.path("mine.csv"));
  std::ifstream min(tmp.path("mine.csv"));
  std::getline(min, line);
  CHECK(line == "epoch,mined_mean_score,uniform_mean_score");
}
