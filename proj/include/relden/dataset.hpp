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
// Interaction datasets: loading, per-user stratified splitting, noise
// injection, and user/item text profiles.
//
// File formats:
//   Interaction TSV   user_id<TAB>item_id[<TAB>label[<TAB>split[<TAB>injected]]]
//                     label defaults to 1; '#'-prefixed lines are comments.
//   Interaction JSONL one object per line:
//                     {"user":u,"item":i,"label":1,"split":"train","injected":0}
//                     label/split/injected optional.
//   Profile JSONL     {"id":0,"kind":"user","text":"..."} one object per line.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "relden/core.hpp"

namespace relden {

enum class SplitTag : std::uint8_t { train = 0, valid = 1, test = 2 };

inline const char* to_string(SplitTag s) {
  switch (s) {
    case SplitTag::train: return "train";
    case SplitTag::valid: return "valid";
    case SplitTag::test: return "test";
  }
  return "?";
}

inline SplitTag split_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "valid") return SplitTag::valid;
  if (s == "test") return SplitTag::test;
  throw ParseError("unknown split tag '" + s + "'");
}

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::uint8_t label = 1;  // observed y*
  SplitTag split = SplitTag::train;
  bool injected = false;
};

struct InteractionDataset {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::vector<Interaction> interactions;

  std::size_t count_positives(SplitTag s) const {
    std::size_t n = 0;
    for (const auto& it : interactions)
      if (it.label == 1 && it.split == s) ++n;
    return n;
  }

  // Positive item lists per user for one split, each sorted ascending.
  std::vector<std::vector<ItemId>> positives_by_user(SplitTag s) const {
    std::vector<std::vector<ItemId>> out(num_users);
    for (const auto& it : interactions)
      if (it.label == 1 && it.split == s) out[it.user].push_back(it.item);
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
  }

  void validate() const {
    std::set<std::pair<std::uint64_t, std::uint8_t>> seen;
    for (const auto& it : interactions) {
      if (it.user >= num_users || it.item >= num_items)
        throw std::invalid_argument("interaction id out of range");
      if (it.label > 1) throw std::invalid_argument("label must be 0 or 1");
      auto key = std::make_pair(
          (std::uint64_t(it.user) << 32) | it.item,
          static_cast<std::uint8_t>(it.split));
      if (!seen.insert(key).second)
        throw std::invalid_argument("duplicate (user,item) within a split");
    }
  }
};

// Maps original file ids to the dense 0-based ids used everywhere else.
struct IdRemap {
  std::vector<std::uint64_t> user_original;  // index = dense user id
  std::vector<std::uint64_t> item_original;  // index = dense item id

  bool identity() const {
    for (std::size_t k = 0; k < user_original.size(); ++k)
      if (user_original[k] != k) return false;
    for (std::size_t k = 0; k < item_original.size(); ++k)
      if (item_original[k] != k) return false;
    return true;
  }

  std::optional<UserId> dense_user(std::uint64_t orig) const {
    auto it = std::lower_bound(user_original.begin(), user_original.end(), orig);
    if (it == user_original.end() || *it != orig) return std::nullopt;
    return static_cast<UserId>(it - user_original.begin());
  }
  std::optional<ItemId> dense_item(std::uint64_t orig) const {
    auto it = std::lower_bound(item_original.begin(), item_original.end(), orig);
    if (it == item_original.end() || *it != orig) return std::nullopt;
    return static_cast<ItemId>(it - item_original.begin());
  }
};

struct NoiseSpec {
  double ratio = 0.0;  // fraction of |train positives| to inject
  std::uint64_t seed = 0;
};

enum class DatasetFormat { tsv, jsonl };

struct LoadResult {
  InteractionDataset dataset;
  IdRemap remap;
  Warnings warnings;
};

namespace detail {

struct RawInteraction {
  std::uint64_t user, item;
  std::uint8_t label;
  std::optional<SplitTag> split;
  bool injected;
};

inline std::uint64_t parse_id(const std::string& tok, std::size_t line_no) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError("line " + std::to_string(line_no) +
                     ": expected non-negative integer id, got '" + tok + "'");
  return std::stoull(tok);
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

inline std::vector<RawInteraction> parse_interactions(std::istream& in,
                                                      DatasetFormat format) {
  std::vector<RawInteraction> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    RawInteraction r{0, 0, 1, std::nullopt, false};
    if (format == DatasetFormat::tsv) {
      auto cols = split_tabs(line);
      if (cols.size() < 2 || cols.size() > 5)
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 2-5 tab-separated columns, got " +
                         std::to_string(cols.size()));
      r.user = parse_id(cols[0], line_no);
      r.item = parse_id(cols[1], line_no);
      if (cols.size() >= 3 && !cols[2].empty()) {
        auto v = parse_id(cols[2], line_no);
        if (v > 1)
          throw ParseError("line " + std::to_string(line_no) +
                           ": label must be 0 or 1");
        r.label = static_cast<std::uint8_t>(v);
      }
      if (cols.size() >= 4) r.split = split_from_string(cols[3]);
      if (cols.size() >= 5) r.injected = parse_id(cols[4], line_no) != 0;
    } else {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.contains("user") || !j.contains("item"))
        throw ParseError("line " + std::to_string(line_no) +
                         ": object needs 'user' and 'item'");
      r.user = j.at("user").get<std::uint64_t>();
      r.item = j.at("item").get<std::uint64_t>();
      if (j.contains("label")) {
        auto v = j.at("label").get<int>();
        if (v != 0 && v != 1)
          throw ParseError("line " + std::to_string(line_no) +
                           ": label must be 0 or 1");
        r.label = static_cast<std::uint8_t>(v);
      }
      if (j.contains("split"))
        r.split = split_from_string(j.at("split").get<std::string>());
      if (j.contains("injected")) {
        const auto& v = j.at("injected");
        r.injected = v.is_boolean() ? v.get<bool>() : (v.get<int>() != 0);
      }
    }
    raw.push_back(r);
  }
  return raw;
}

}  // namespace detail

// Loads an interaction file, remapping arbitrary integer ids to dense
// 0-based ids (ascending by original id). Duplicate (user,item) pairs keep
// the first occurrence with a warning.
inline LoadResult load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  auto raw = detail::parse_interactions(in, format);
  if (raw.empty()) throw ParseError("no interactions in '" + path + "'");

  LoadResult res;
  std::set<std::uint64_t> users, items;
  for (const auto& r : raw) {
    users.insert(r.user);
    items.insert(r.item);
  }
  res.remap.user_original.assign(users.begin(), users.end());
  res.remap.item_original.assign(items.begin(), items.end());
  if (!res.remap.identity())
    res.warnings.push_back("ids were not contiguous; remapped to dense "
                           "0-based indices");

  auto& ds = res.dataset;
  ds.num_users = static_cast<std::uint32_t>(res.remap.user_original.size());
  ds.num_items = static_cast<std::uint32_t>(res.remap.item_original.size());

  std::unordered_set<std::uint64_t> seen;
  std::size_t dupes = 0;
  for (const auto& r : raw) {
    Interaction it;
    it.user = *res.remap.dense_user(r.user);
    it.item = *res.remap.dense_item(r.item);
    it.label = r.label;
    it.split = r.split.value_or(SplitTag::train);
    it.injected = r.injected;
    std::uint64_t key = (std::uint64_t(it.user) << 32) | it.item;
    if (!seen.insert(key).second) {
      ++dupes;
      continue;
    }
    ds.interactions.push_back(it);
  }
  if (dupes > 0)
    res.warnings.push_back("dropped " + std::to_string(dupes) +
                           " duplicate interaction(s)");
  return res;
}

// Per-user stratified split of the positive interactions. Users with fewer
// than 3 positives keep everything in train. Counts per user: valid and test
// take floor(ratio * n), train takes the rest (never empty).
inline InteractionDataset split_dataset(const InteractionDataset& ds,
                                        double train_ratio, double valid_ratio,
                                        double test_ratio, std::uint64_t seed,
                                        Warnings* warnings = nullptr) {
  if (train_ratio <= 0 || valid_ratio <= 0 || test_ratio <= 0)
    throw std::invalid_argument("split ratios must be positive");
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");

  std::vector<std::vector<std::size_t>> pos_index(ds.num_users);
  InteractionDataset out;
  out.num_users = ds.num_users;
  out.num_items = ds.num_items;
  out.interactions = ds.interactions;
  for (std::size_t k = 0; k < out.interactions.size(); ++k) {
    auto& it = out.interactions[k];
    it.split = SplitTag::train;
    if (it.label == 1) pos_index[it.user].push_back(k);
  }

  std::size_t small_users = 0;
  for (UserId u = 0; u < ds.num_users; ++u) {
    auto& idx = pos_index[u];
    if (idx.empty()) continue;
    if (idx.size() < 3) {
      ++small_users;
      continue;  // everything stays in train
    }
    // Deterministic per-user shuffle so the split is independent of
    // interaction file order.
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return out.interactions[a].item < out.interactions[b].item;
    });
    Rng rng(derive_seed({seed, 0x5117ull, u}));
    for (std::size_t k = idx.size(); k > 1; --k)
      std::swap(idx[k - 1], idx[rng.next_below(k)]);

    const std::size_t n = idx.size();
    const std::size_t n_valid = static_cast<std::size_t>(valid_ratio * n);
    const std::size_t n_test = static_cast<std::size_t>(test_ratio * n);
    for (std::size_t k = 0; k < n_valid; ++k)
      out.interactions[idx[k]].split = SplitTag::valid;
    for (std::size_t k = n_valid; k < n_valid + n_test; ++k)
      out.interactions[idx[k]].split = SplitTag::test;
  }
  if (small_users > 0)
    warn(warnings, std::to_string(small_users) +
                       " user(s) with <3 positives kept entirely in train");
  return out;
}

// Adds floor(ratio * |train positives|) uniformly sampled (user,item) pairs
// that appear in no split, labeled positive and flagged injected. The trainer
// never reads the flag; the harness uses it to score noise identification.
inline InteractionDataset inject_noise(const InteractionDataset& ds,
                                       const NoiseSpec& spec) {
  if (spec.ratio < 0) throw std::invalid_argument("noise ratio must be >= 0");
  InteractionDataset out = ds;
  if (spec.ratio == 0) return out;

  std::unordered_set<std::uint64_t> taken;
  std::size_t train_pos = 0;
  for (const auto& it : ds.interactions) {
    taken.insert((std::uint64_t(it.user) << 32) | it.item);
    if (it.label == 1 && it.split == SplitTag::train) ++train_pos;
  }
  const std::size_t want =
      static_cast<std::size_t>(spec.ratio * static_cast<double>(train_pos));
  const std::size_t total_pairs =
      std::size_t(ds.num_users) * std::size_t(ds.num_items);
  if (total_pairs - taken.size() < want)
    throw std::runtime_error("not enough non-interacted pairs to inject " +
                             std::to_string(want) + " noise interactions");

  Rng rng(derive_seed({spec.seed, 0x401bull}));
  std::size_t added = 0;
  while (added < want) {
    UserId u = static_cast<UserId>(rng.next_below(ds.num_users));
    ItemId i = static_cast<ItemId>(rng.next_below(ds.num_items));
    std::uint64_t key = (std::uint64_t(u) << 32) | i;
    if (!taken.insert(key).second) continue;
    Interaction it;
    it.user = u;
    it.item = i;
    it.label = 1;
    it.split = SplitTag::train;
    it.injected = true;
    out.interactions.push_back(it);
    ++added;
  }
  return out;
}

// Writes the split TSV (dense ids). The injected column is emitted only when
// some interaction carries the flag.
inline void save_dataset_tsv(const InteractionDataset& ds,
                             const std::string& path) {
  AtomicFile file(path);
  auto& outf = file.out();
  bool any_injected = false;
  for (const auto& it : ds.interactions) any_injected |= it.injected;
  outf << "# user\titem\tlabel\tsplit" << (any_injected ? "\tinjected" : "")
       << "\n";
  for (const auto& it : ds.interactions) {
    outf << it.user << '\t' << it.item << '\t' << int(it.label) << '\t'
         << to_string(it.split);
    if (any_injected) outf << '\t' << (it.injected ? 1 : 0);
    outf << '\n';
  }
  file.commit();
}

inline void save_remap_tsv(const IdRemap& remap, const std::string& path) {
  AtomicFile file(path);
  auto& outf = file.out();
  outf << "# kind\toriginal_id\tdense_id\n";
  for (std::size_t k = 0; k < remap.user_original.size(); ++k)
    outf << "user\t" << remap.user_original[k] << '\t' << k << '\n';
  for (std::size_t k = 0; k < remap.item_original.size(); ++k)
    outf << "item\t" << remap.item_original[k] << '\t' << k << '\n';
  file.commit();
}

inline IdRemap load_remap_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  IdRemap remap;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 3)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 3 columns");
    auto orig = detail::parse_id(cols[1], line_no);
    auto dense = detail::parse_id(cols[2], line_no);
    auto& vec =
        cols[0] == "user" ? remap.user_original : remap.item_original;
    if (cols[0] != "user" && cols[0] != "item")
      throw ParseError("line " + std::to_string(line_no) + ": unknown kind '" +
                       cols[0] + "'");
    if (vec.size() != dense)
      throw ParseError("line " + std::to_string(line_no) +
                       ": dense ids must be contiguous and ascending");
    vec.push_back(orig);
  }
  return remap;
}

// ---------------------------------------------------------------------------
// Text profiles
// ---------------------------------------------------------------------------
struct ProfileStore {
  std::unordered_map<UserId, std::string> user_profiles;
  std::unordered_map<ItemId, std::string> item_profiles;

  const std::string& user(UserId u) const {
    auto it = user_profiles.find(u);
    if (it == user_profiles.end())
      throw std::out_of_range("no profile for user " + std::to_string(u));
    return it->second;
  }
  const std::string& item(ItemId i) const {
    auto it = item_profiles.find(i);
    if (it == item_profiles.end())
      throw std::out_of_range("no profile for item " + std::to_string(i));
    return it->second;
  }

  // Dataset ids that lack a profile entry.
  struct Missing {
    std::vector<UserId> users;
    std::vector<ItemId> items;
    bool empty() const { return users.empty() && items.empty(); }
  };
  Missing missing_against(const InteractionDataset& ds) const {
    Missing m;
    for (UserId u = 0; u < ds.num_users; ++u)
      if (!user_profiles.count(u)) m.users.push_back(u);
    for (ItemId i = 0; i < ds.num_items; ++i)
      if (!item_profiles.count(i)) m.items.push_back(i);
    return m;
  }
};

struct ProfileLoadResult {
  ProfileStore store;
  Warnings warnings;
};

// Loads a profile JSONL. When a remap is given, ids in the file are original
// ids and are translated; unmatched ids are skipped with a warning.
inline ProfileLoadResult load_profiles(const std::string& path,
                                       const IdRemap* remap = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  ProfileLoadResult res;
  std::string line;
  std::size_t line_no = 0, dupes = 0, unmatched = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("kind") || !j.contains("text"))
      throw ParseError("line " + std::to_string(line_no) +
                       ": object needs 'id', 'kind', 'text'");
    const auto kind = j.at("kind").get<std::string>();
    const auto orig = j.at("id").get<std::uint64_t>();
    auto text = j.at("text").get<std::string>();
    if (kind == "user") {
      std::optional<UserId> id = remap
          ? remap->dense_user(orig)
          : std::optional<UserId>(static_cast<UserId>(orig));
      if (!id) {
        ++unmatched;
        continue;
      }
      if (!res.store.user_profiles.emplace(*id, text).second) {
        res.store.user_profiles[*id] = std::move(text);  // last entry wins
        ++dupes;
      }
    } else if (kind == "item") {
      std::optional<ItemId> id = remap
          ? remap->dense_item(orig)
          : std::optional<ItemId>(static_cast<ItemId>(orig));
      if (!id) {
        ++unmatched;
        continue;
      }
      if (!res.store.item_profiles.emplace(*id, text).second) {
        res.store.item_profiles[*id] = std::move(text);
        ++dupes;
      }
    } else {
      throw ParseError("line " + std::to_string(line_no) +
                       ": unknown kind '" + kind + "'");
    }
  }
  if (dupes > 0)
    res.warnings.push_back(std::to_string(dupes) +
                           " duplicate profile id(s); last entry wins");
  if (unmatched > 0)
    res.warnings.push_back(std::to_string(unmatched) +
                           " profile id(s) not present in the id remap");
  return res;
}

inline void save_profiles(const ProfileStore& store, const std::string& path) {
  AtomicFile file(path);
  auto& outf = file.out();
  std::map<UserId, std::string> users(store.user_profiles.begin(),
                                      store.user_profiles.end());
  std::map<ItemId, std::string> items(store.item_profiles.begin(),
                                      store.item_profiles.end());
  for (const auto& [id, text] : users) {
    nlohmann::json j{{"id", id}, {"kind", "user"}, {"text", text}};
    outf << j.dump() << '\n';
  }
  for (const auto& [id, text] : items) {
    nlohmann::json j{{"id", id}, {"kind", "item"}, {"text", text}};
    outf << j.dump() << '\n';
  }
  file.commit();
}

}  // namespace relden
