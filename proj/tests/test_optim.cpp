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

#include "relden/adam.hpp"
#include "relden/trainer.hpp"
#include "testutil.hpp"

using namespace relden;

TEST_CASE("zero gradients leave parameters unchanged", "[optim]") {
  std::vector<double> params{1.0, -2.0, 0.5};
  std::vector<double> grads{0.0, 0.0, 0.0};
  AdamState<double> state(3);
  AdamConfig<double> cfg;
  adam_step(params, grads, state, cfg);
  CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(state.t == 1);
}

TEST_CASE("first unit-gradient step moves by about lr", "[optim]") {
  // Bias correction makes m_hat = 1 and v_hat = 1 at t=1, so the update is
  // lr / (1 + eps).
  std::vector<double> params{0.0};
  std::vector<double> grads{1.0};
  AdamState<double> state(1);
  AdamConfig<double> cfg;
  cfg.lr = 0.05;
  adam_step(params, grads, state, cfg);
  CHECK(params[0] == Approx(-0.05 / (1.0 + 1e-8)).margin(1e-15));
}

TEST_CASE("adam matches a 64-bit reference over 100 steps", "[optim]") {
  const std::size_t n = 24;
  std::vector<double> params(n), ref_params(n);
  Rng rng(5);
  for (std::size_t k = 0; k < n; ++k)
    params[k] = ref_params[k] = rng.next_normal(0.0, 1.0);

  AdamState<double> state(n);
  AdamConfig<double> cfg;
  cfg.lr = 3e-3;
  testutil::ReferenceAdam ref(n);
  ref.lr = 3e-3;

  std::vector<double> grads(n);
  for (int step = 0; step < 100; ++step) {
    for (std::size_t k = 0; k < n; ++k)
      grads[k] = rng.next_normal(0.0, 1.0) + 0.2 * params[k];
    adam_step(params, grads, state, cfg);
    ref.step(ref_params, grads);
    // Same gradients fed to both; trajectories must agree tightly.
  }
  for (std::size_t k = 0; k < n; ++k)
    REQUIRE(params[k] == Approx(ref_params[k]).margin(1e-10));
}

TEST_CASE("non-finite gradients abort the step", "[optim]") {
  std::vector<double> params{1.0};
  std::vector<double> grads{std::numeric_limits<double>::quiet_NaN()};
  AdamState<double> state(1);
  AdamConfig<double> cfg;
  REQUIRE_THROWS_WITH(adam_step(params, grads, state, cfg),
                      Catch::Contains("non-finite"));
  std::vector<double> inf_grads{std::numeric_limits<double>::infinity()};
  REQUIRE_THROWS(adam_step(params, inf_grads, state, cfg));
}

TEST_CASE("size mismatches are rejected", "[optim]") {
  std::vector<double> params{1.0, 2.0};
  std::vector<double> grads{0.1};
  AdamState<double> state(2);
  AdamConfig<double> cfg;
  CHECK_THROWS_AS(adam_step(params, grads, state, cfg),
                  std::invalid_argument);
  AdamState<double> wrong(3);
  std::vector<double> g2{0.1, 0.2};
  CHECK_THROWS_AS(adam_step(params, g2, wrong, cfg), std::invalid_argument);
}

TEST_CASE("the table step equals one flat step", "[optim]") {
  // adam_step_table must advance the shared counter once and match the
  // update of a single concatenated parameter vector.
  EmbeddingTable<float> table;
  table.users = Matrix<float>(2, 3);
  table.items = Matrix<float>(3, 3);
  EmbeddingTable<float> grad;
  grad.users = Matrix<float>(2, 3);
  grad.items = Matrix<float>(3, 3);
  Rng rng(13);
  std::vector<float> flat_params, flat_grads;
  for (std::size_t k = 0; k < table.users.size(); ++k) {
    table.users.data()[k] = float(rng.next_normal(0, 1));
    grad.users.data()[k] = float(rng.next_normal(0, 1));
  }
  for (std::size_t k = 0; k < table.items.size(); ++k) {
    table.items.data()[k] = float(rng.next_normal(0, 1));
    grad.items.data()[k] = float(rng.next_normal(0, 1));
  }
  for (std::size_t k = 0; k < table.users.size(); ++k) {
    flat_params.push_back(table.users.data()[k]);
    flat_grads.push_back(grad.users.data()[k]);
  }
  for (std::size_t k = 0; k < table.items.size(); ++k) {
    flat_params.push_back(table.items.data()[k]);
    flat_grads.push_back(grad.items.data()[k]);
  }

  AdamState<float> table_state(15);
  AdamState<float> flat_state(15);
  AdamConfig<float> cfg;
  for (int step = 0; step < 3; ++step) {
    detail::adam_step_table(table, grad, table_state, cfg);
    adam_step(flat_params, flat_grads, flat_state, cfg);
  }
  REQUIRE(table_state.t == 3);
  std::size_t off = 0;
  for (std::size_t k = 0; k < table.users.size(); ++k, ++off)
    REQUIRE(table.users.data()[k] == flat_params[off]);
  for (std::size_t k = 0; k < table.items.size(); ++k, ++off)
    REQUIRE(table.items.data()[k] == flat_params[off]);
}
