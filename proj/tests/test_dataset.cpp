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

#include "relden/dataset.hpp"
#include "testutil.hpp"

using namespace relden;

TEST_CASE("tsv load assigns dense ids and counts", "[dataset]") {
  testutil::TempDir tmp("load");
  testutil::write_file(tmp.path("a.tsv"), "0\t0\n0\t1\n1\t0\n");
  auto res = load_dataset(tmp.path("a.tsv"), DatasetFormat::tsv);
  CHECK(res.dataset.num_users == 2);
  CHECK(res.dataset.num_items == 2);
  CHECK(res.dataset.interactions.size() == 3);
  CHECK(res.dataset.count_positives(SplitTag::train) == 3);
  CHECK(res.warnings.empty());
}

TEST_CASE("empty file is an error", "[dataset]") {
  testutil::TempDir tmp("empty");
  testutil::write_file(tmp.path("e.tsv"), "# only a comment\n");
  REQUIRE_THROWS_WITH(load_dataset(tmp.path("e.tsv"), DatasetFormat::tsv),
                      Catch::Contains("no interactions"));
}

TEST_CASE("duplicate pairs keep one copy with a warning", "[dataset]") {
  testutil::TempDir tmp("dup");
  testutil::write_file(tmp.path("d.tsv"), "0\t0\n0\t0\n1\t1\n");
  auto res = load_dataset(tmp.path("d.tsv"), DatasetFormat::tsv);
  CHECK(res.dataset.interactions.size() == 2);
  REQUIRE(res.warnings.size() == 1);
  CHECK_THAT(res.warnings[0], Catch::Contains("duplicate"));
}

TEST_CASE("malformed line names its line number", "[dataset]") {
  testutil::TempDir tmp("bad");
  testutil::write_file(tmp.path("b.tsv"), "0\t0\nnot-an-id\t3\n");
  REQUIRE_THROWS_WITH(load_dataset(tmp.path("b.tsv"), DatasetFormat::tsv),
                      Catch::Contains("line 2"));
}

TEST_CASE("non-contiguous ids are remapped with a table", "[dataset]") {
  testutil::TempDir tmp("remap");
  testutil::write_file(tmp.path("r.tsv"), "10\t7\n10\t9\n42\t7\n");
  auto res = load_dataset(tmp.path("r.tsv"), DatasetFormat::tsv);
  CHECK(res.dataset.num_users == 2);
  CHECK(res.dataset.num_items == 2);
  REQUIRE(res.remap.user_original == std::vector<std::uint64_t>{10, 42});
  REQUIRE(res.remap.item_original == std::vector<std::uint64_t>{7, 9});
  CHECK(res.remap.dense_user(42) == UserId{1});
  CHECK_FALSE(res.remap.dense_user(11).has_value());
  CHECK_THAT(res.warnings[0], Catch::Contains("remapped"));

  // The table round-trips through its TSV form.
  save_remap_tsv(res.remap, tmp.path("remap.tsv"));
  auto back = load_remap_tsv(tmp.path("remap.tsv"));
  CHECK(back.user_original == res.remap.user_original);
  CHECK(back.item_original == res.remap.item_original);
}

TEST_CASE("jsonl interactions parse", "[dataset]") {
  testutil::TempDir tmp("jsonl");
  testutil::write_file(tmp.path("d.jsonl"),
                       "{\"user\":0,\"item\":1}\n"
                       "{\"user\":1,\"item\":0,\"label\":1}\n");
  auto res = load_dataset(tmp.path("d.jsonl"), DatasetFormat::jsonl);
  CHECK(res.dataset.interactions.size() == 2);
  testutil::write_file(tmp.path("bad.jsonl"), "{\"user\":0}\n");
  REQUIRE_THROWS_AS(load_dataset(tmp.path("bad.jsonl"), DatasetFormat::jsonl),
                    ParseError);
}

namespace {

InteractionDataset make_dataset(std::uint32_t users, std::uint32_t items,
                                std::uint32_t per_user) {
  InteractionDataset ds;
  ds.num_users = users;
  ds.num_items = items;
  for (UserId u = 0; u < users; ++u)
    for (std::uint32_t k = 0; k < per_user; ++k)
      ds.interactions.push_back(
          {u, ItemId((u + k * 3) % items), 1, SplitTag::train, false});
  std::sort(ds.interactions.begin(), ds.interactions.end(),
            [](const Interaction& a, const Interaction& b) {
              return std::tie(a.user, a.item) < std::tie(b.user, b.item);
            });
  ds.interactions.erase(
      std::unique(ds.interactions.begin(), ds.interactions.end(),
                  [](const Interaction& a, const Interaction& b) {
                    return a.user == b.user && a.item == b.item;
                  }),
      ds.interactions.end());
  return ds;
}

}  // namespace

TEST_CASE("split honors the 3:1:1 shape for five positives", "[dataset]") {
  InteractionDataset ds;
  ds.num_users = 1;
  ds.num_items = 5;
  for (ItemId i = 0; i < 5; ++i)
    ds.interactions.push_back({0, i, 1, SplitTag::train, false});
  auto split = split_dataset(ds, 0.6, 0.2, 0.2, 17);
  CHECK(split.count_positives(SplitTag::train) == 3);
  CHECK(split.count_positives(SplitTag::valid) == 1);
  CHECK(split.count_positives(SplitTag::test) == 1);
}

TEST_CASE("split is deterministic in the seed", "[dataset]") {
  auto ds = make_dataset(12, 30, 7);
  auto a = split_dataset(ds, 0.6, 0.2, 0.2, 5);
  auto b = split_dataset(ds, 0.6, 0.2, 0.2, 5);
  auto c = split_dataset(ds, 0.6, 0.2, 0.2, 6);
  REQUIRE(a.interactions.size() == b.interactions.size());
  bool same_as_b = true, same_as_c = true;
  for (std::size_t k = 0; k < a.interactions.size(); ++k) {
    same_as_b &= a.interactions[k].split == b.interactions[k].split;
    same_as_c &= a.interactions[k].split == c.interactions[k].split;
  }
  CHECK(same_as_b);
  CHECK_FALSE(same_as_c);  // different seed moves something
}

TEST_CASE("users with few positives stay in train", "[dataset]") {
  InteractionDataset ds;
  ds.num_users = 2;
  ds.num_items = 4;
  ds.interactions.push_back({0, 0, 1, SplitTag::train, false});
  ds.interactions.push_back({1, 0, 1, SplitTag::train, false});
  ds.interactions.push_back({1, 1, 1, SplitTag::train, false});
  Warnings warnings;
  auto split = split_dataset(ds, 0.6, 0.2, 0.2, 3, &warnings);
  for (const auto& it : split.interactions)
    CHECK(it.split == SplitTag::train);
  REQUIRE_FALSE(warnings.empty());
}

TEST_CASE("splits partition the positives", "[dataset]") {
  auto ds = make_dataset(25, 40, 9);
  auto split = split_dataset(ds, 0.6, 0.2, 0.2, 11);
  CHECK(split.count_positives(SplitTag::train) +
            split.count_positives(SplitTag::valid) +
            split.count_positives(SplitTag::test) ==
        ds.interactions.size());
  // Same pair set before and after, each pair in exactly one split.
  std::set<std::uint64_t> before, after;
  for (const auto& it : ds.interactions)
    before.insert((std::uint64_t(it.user) << 32) | it.item);
  for (const auto& it : split.interactions)
    after.insert((std::uint64_t(it.user) << 32) | it.item);
  CHECK(before == after);
  CHECK_NOTHROW(split.validate());
  // Every user with >=3 positives keeps at least one train positive.
  auto train = split.positives_by_user(SplitTag::train);
  auto all = ds.positives_by_user(SplitTag::train);
  for (UserId u = 0; u < ds.num_users; ++u)
    if (all[u].size() >= 3) CHECK_FALSE(train[u].empty());
}

TEST_CASE("bad ratios are rejected", "[dataset]") {
  auto ds = make_dataset(3, 9, 4);
  CHECK_THROWS_AS(split_dataset(ds, 0.7, 0.2, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 0.0, 0.0, 1), std::invalid_argument);
}

TEST_CASE("noise ratio zero is the identity", "[dataset]") {
  auto ds = make_dataset(10, 10, 4);
  auto noisy = inject_noise(ds, {0.0, 9});
  CHECK(noisy.interactions.size() == ds.interactions.size());
}

TEST_CASE("noise injection adds flagged train positives", "[dataset]") {
  // 100 train positives at 20% -> exactly 20 injected pairs.
  InteractionDataset ds;
  ds.num_users = 20;
  ds.num_items = 25;
  for (UserId u = 0; u < 20; ++u)
    for (ItemId i = 0; i < 5; ++i)
      ds.interactions.push_back(
          {u, ItemId((u + i) % 25), 1, SplitTag::train, false});
  auto split = split_dataset(ds, 0.6, 0.2, 0.2, 4);
  REQUIRE(split.count_positives(SplitTag::train) == 60);
  auto noisy = inject_noise(split, {0.20, 21});
  std::size_t injected = 0;
  for (const auto& it : noisy.interactions)
    if (it.injected) {
      ++injected;
      CHECK(it.split == SplitTag::train);
      CHECK(it.label == 1);
    }
  CHECK(injected == 12);  // floor(0.2 * 60)
  CHECK(noisy.count_positives(SplitTag::test) ==
        split.count_positives(SplitTag::test));
}

TEST_CASE("injected pairs never collide with existing pairs", "[dataset]") {
  auto ds = make_dataset(10, 10, 5);
  auto split = split_dataset(ds, 0.6, 0.2, 0.2, 2);
  auto noisy = inject_noise(split, {0.5, 77});
  std::set<std::pair<UserId, ItemId>> original;
  for (const auto& it : split.interactions)
    original.insert({it.user, it.item});
  for (const auto& it : noisy.interactions)
    if (it.injected) CHECK_FALSE(original.count({it.user, it.item}));
  CHECK_NOTHROW(noisy.validate());
}

TEST_CASE("noise injection fails when the catalog is exhausted", "[dataset]") {
  InteractionDataset ds;
  ds.num_users = 1;
  ds.num_items = 2;
  ds.interactions.push_back({0, 0, 1, SplitTag::train, false});
  ds.interactions.push_back({0, 1, 1, SplitTag::train, false});
  REQUIRE_THROWS_WITH(inject_noise(ds, {1.0, 3}),
                      Catch::Contains("not enough"));
}

TEST_CASE("split tsv round-trips including the injected flag", "[dataset]") {
  testutil::TempDir tmp("roundtrip");
  auto ds = make_dataset(8, 12, 5);
  auto noisy = inject_noise(split_dataset(ds, 0.6, 0.2, 0.2, 13), {0.2, 13});
  save_dataset_tsv(noisy, tmp.path("out.tsv"));
  auto back = load_dataset(tmp.path("out.tsv"), DatasetFormat::tsv);
  REQUIRE(back.dataset.interactions.size() == noisy.interactions.size());
  std::size_t injected = 0;
  for (const auto& it : back.dataset.interactions) injected += it.injected;
  std::size_t expected = 0;
  for (const auto& it : noisy.interactions) expected += it.injected;
  CHECK(injected == expected);
  CHECK(back.dataset.count_positives(SplitTag::valid) ==
        noisy.count_positives(SplitTag::valid));
}

TEST_CASE("profiles load with dedup and missing report", "[dataset]") {
  testutil::TempDir tmp("profiles");
  testutil::write_file(
      tmp.path("p.jsonl"),
      "{\"id\":0,\"kind\":\"user\",\"text\":\"likes horror\"}\n"
      "{\"id\":0,\"kind\":\"item\",\"text\":\"a horror film\"}\n"
      "{\"id\":0,\"kind\":\"user\",\"text\":\"likes comedies\"}\n");
  auto res = load_profiles(tmp.path("p.jsonl"));
  CHECK(res.store.user_profiles.at(0) == "likes comedies");  // last wins
  CHECK(res.store.item_profiles.at(0) == "a horror film");
  REQUIRE(res.warnings.size() == 1);
  CHECK_THAT(res.warnings[0], Catch::Contains("duplicate"));

  InteractionDataset ds;
  ds.num_users = 2;
  ds.num_items = 1;
  ds.interactions.push_back({1, 0, 1, SplitTag::train, false});
  auto missing = res.store.missing_against(ds);
  REQUIRE(missing.users == std::vector<UserId>{1});
  CHECK(missing.items.empty());
}

TEST_CASE("unknown profile kind is a parse error", "[dataset]") {
  testutil::TempDir tmp("badkind");
  testutil::write_file(tmp.path("p.jsonl"),
                       "{\"id\":0,\"kind\":\"shop\",\"text\":\"x\"}\n");
  REQUIRE_THROWS_WITH(load_profiles(tmp.path("p.jsonl")),
                      Catch::Contains("unknown kind"));
}

TEST_CASE("loaders are deterministic per path", "[dataset]") {
  testutil::TempDir tmp("det");
  testutil::write_file(tmp.path("d.tsv"), "3\t1\n3\t2\n9\t1\n");
  auto a = load_dataset(tmp.path("d.tsv"), DatasetFormat::tsv);
  auto b = load_dataset(tmp.path("d.tsv"), DatasetFormat::tsv);
  REQUIRE(a.dataset.interactions.size() == b.dataset.interactions.size());
  for (std::size_t k = 0; k < a.dataset.interactions.size(); ++k) {
    CHECK(a.dataset.interactions[k].user == b.dataset.interactions[k].user);
    CHECK(a.dataset.interactions[k].item == b.dataset.interactions[k].item);
  }
}
