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
// Logical-relevance oracle: candidate selection from a pretrained scorer,
// pluggable rating providers (mock / file / http), verdict caching, and the
// hard/noisy classification.
//
// Verdict JSONL: {"user":u,"item":i,"user_rating":"High","item_rating":"Low"}
// HTTP contract: POST {"template_id":"user|item","variables":{...}}
//            ->  {"rating":"High|Mid|Low","raw":"..."}
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relden/backbone.hpp"
#include "relden/core.hpp"
#include "relden/dataset.hpp"
#include "relden/graph.hpp"
#include "relden/miner.hpp"

namespace relden {

enum class Rating : std::uint8_t { Low = 0, Mid = 1, High = 2 };

inline const char* to_string(Rating r) {
  switch (r) {
    case Rating::Low: return "Low";
    case Rating::Mid: return "Mid";
    case Rating::High: return "High";
  }
  return "?";
}

inline std::optional<Rating> rating_from_string(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(unsigned(c)));
  if (s == "high") return Rating::High;
  if (s == "mid") return Rating::Mid;
  if (s == "low") return Rating::Low;
  return std::nullopt;
}

enum class CandidateChannel : std::uint8_t {
  high_score_negative,
  low_score_positive,
};

inline const char* to_string(CandidateChannel c) {
  return c == CandidateChannel::high_score_negative ? "high_score_negative"
                                                    : "low_score_positive";
}

struct CandidatePair {
  UserId user = 0;
  ItemId item = 0;
  CandidateChannel channel = CandidateChannel::high_score_negative;
  double pretrain_score = 0.0;
};

enum class CandidateMode { deterministic, stochastic };

// Per user: the n1 highest-scored non-interacted items and the n2
// lowest-scored train positives (or score-weighted samples in stochastic
// mode). Users with fewer positives than n2 contribute what they have.
template <typename T>
std::vector<CandidatePair> build_candidates(
    const Representations<T>& pre_rep, const InteractionDataset& ds,
    std::uint32_t n1, std::uint32_t n2, CandidateMode mode,
    std::uint64_t seed, Warnings* warnings = nullptr) {
  std::vector<CandidatePair> out;
  auto positives = ds.positives_by_user(SplitTag::train);
  std::size_t short_users = 0;

  for (UserId u = 0; u < ds.num_users; ++u) {
    const auto scores = score_all(pre_rep, u);
    const auto& pos = positives[u];
    std::vector<ItemId> negs;
    negs.reserve(ds.num_items - pos.size());
    for (ItemId i = 0; i < ds.num_items; ++i)
      if (!std::binary_search(pos.begin(), pos.end(), i)) negs.push_back(i);

    auto pick = [&](const std::vector<ItemId>& universe, std::uint32_t want,
                    bool highest, CandidateChannel channel,
                    std::uint64_t tag) {
      const std::size_t n = std::min<std::size_t>(want, universe.size());
      if (n == 0) return;
      std::vector<ItemId> chosen;
      if (mode == CandidateMode::deterministic) {
        chosen = universe;
        std::partial_sort(chosen.begin(), chosen.begin() + n, chosen.end(),
                          [&](ItemId a, ItemId b) {
                            const T sa = scores[a], sb = scores[b];
                            if (sa != sb) return highest ? sa > sb : sa < sb;
                            return a < b;
                          });
        chosen.resize(n);
      } else {
        std::vector<double> w(universe.size());
        for (std::size_t k = 0; k < universe.size(); ++k)
          w[k] = stable_sigmoid(double(highest ? scores[universe[k]]
                                               : -scores[universe[k]]));
        Rng rng(derive_seed({seed, tag, u}));
        chosen =
            detail::weighted_sample_without_replacement(universe, w, n, rng);
      }
      for (ItemId i : chosen)
        out.push_back({u, i, channel, double(scores[i])});
    };

    pick(negs, n1, /*highest=*/true, CandidateChannel::high_score_negative,
         0xca1dull);
    if (pos.size() < n2) ++short_users;
    pick(pos, n2, /*highest=*/false, CandidateChannel::low_score_positive,
         0xca2dull);
  }
  if (short_users > 0)
    warn(warnings, std::to_string(short_users) +
                       " user(s) have fewer positives than requested; "
                       "took all of them");
  return out;
}

inline void save_candidates_tsv(const std::vector<CandidatePair>& candidates,
                                const std::string& path) {
  AtomicFile file(path);
  auto& out = file.out();
  out.precision(17);
  out << "# user\titem\tchannel\tpretrain_score\n";
  for (const auto& c : candidates)
    out << c.user << '\t' << c.item << '\t' << to_string(c.channel) << '\t'
        << c.pretrain_score << '\n';
  file.commit();
}

inline std::vector<CandidatePair> load_candidates_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<CandidatePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 4)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 4 columns");
    CandidatePair c;
    c.user = static_cast<UserId>(detail::parse_id(cols[0], line_no));
    c.item = static_cast<ItemId>(detail::parse_id(cols[1], line_no));
    if (cols[2] == "high_score_negative")
      c.channel = CandidateChannel::high_score_negative;
    else if (cols[2] == "low_score_positive")
      c.channel = CandidateChannel::low_score_positive;
    else
      throw ParseError("line " + std::to_string(line_no) +
                       ": unknown channel '" + cols[2] + "'");
    c.pretrain_score = std::stod(cols[3]);
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------
enum class RatingChannel : std::uint8_t { user_based = 0, item_based = 1 };

struct RatingRequest {
  RatingChannel channel = RatingChannel::user_based;
  UserId user = 0;
  ItemId item = 0;
  std::string user_profile;
  std::string item_profile;
  std::vector<std::string> evidence_profiles;  // item_based only
};

class OracleProvider {
 public:
  virtual ~OracleProvider() = default;
  virtual Rating rate(const RatingRequest& request) = 0;
  virtual std::string name() const = 0;
  std::size_t calls() const { return calls_; }

 protected:
  std::size_t calls_ = 0;
};

// Ground-truth relevance pairs for the mock provider, produced by the
// synthetic generator.
struct HiddenRelevance {
  std::vector<Edge> relevant;  // sorted unique

  bool contains(UserId u, ItemId i) const {
    return std::binary_search(relevant.begin(), relevant.end(), Edge{u, i});
  }
  static HiddenRelevance load(const std::string& path) {
    HiddenRelevance h;
    h.relevant = load_edge_pairs_tsv(path);
    std::sort(h.relevant.begin(), h.relevant.end());
    h.relevant.erase(std::unique(h.relevant.begin(), h.relevant.end()),
                     h.relevant.end());
    return h;
  }
  void save(const std::string& path) const {
    AtomicFile file(path);
    file.out() << "# user\titem\n";
    for (const auto& e : relevant)
      file.out() << e.user << '\t' << e.item << '\n';
    file.commit();
  }
};

// Rates High for hidden-relevant pairs and `nonrelevant` otherwise, with an
// independent per-channel flip of the relevance bit at the given rate. The
// flip is a pure function of (seed, user, item, channel), so verdicts are
// reproducible regardless of query order.
class MockProvider : public OracleProvider {
 public:
  MockProvider(HiddenRelevance truth, double flip_rate, std::uint64_t seed,
               Rating nonrelevant = Rating::Low)
      : truth_(std::move(truth)),
        flip_rate_(flip_rate),
        seed_(seed),
        nonrelevant_(nonrelevant) {
    if (flip_rate < 0.0 || flip_rate > 1.0)
      throw std::invalid_argument("flip rate must be in [0,1]");
  }

  Rating rate(const RatingRequest& request) override {
    ++calls_;
    bool relevant = truth_.contains(request.user, request.item);
    if (flip_rate_ > 0.0) {
      Rng rng(derive_seed({seed_, 0xf11bull, request.user, request.item,
                           std::uint64_t(request.channel)}));
      if (rng.next_double() < flip_rate_) relevant = !relevant;
    }
    return relevant ? Rating::High : nonrelevant_;
  }

  std::string name() const override { return "mock"; }

 private:
  HiddenRelevance truth_;
  double flip_rate_;
  std::uint64_t seed_;
  Rating nonrelevant_;
};

struct RelevanceVerdict {
  UserId user = 0;
  ItemId item = 0;
  Rating user_rating = Rating::Low;
  Rating item_rating = Rating::Low;
  std::string provider;
};

inline void save_verdicts_jsonl(const std::vector<RelevanceVerdict>& verdicts,
                                const std::string& path) {
  AtomicFile file(path);
  for (const auto& v : verdicts) {
    nlohmann::json j{{"user", v.user},
                     {"item", v.item},
                     {"user_rating", to_string(v.user_rating)},
                     {"item_rating", to_string(v.item_rating)}};
    file.out() << j.dump() << '\n';
  }
  file.commit();
}

inline std::vector<RelevanceVerdict> load_verdicts_jsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<RelevanceVerdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    RelevanceVerdict v;
    v.user = j.at("user").get<UserId>();
    v.item = j.at("item").get<ItemId>();
    auto ur = rating_from_string(j.at("user_rating").get<std::string>());
    auto ir = rating_from_string(j.at("item_rating").get<std::string>());
    if (!ur || !ir)
      throw ParseError("line " + std::to_string(line_no) +
                       ": unknown rating value");
    v.user_rating = *ur;
    v.item_rating = *ir;
    out.push_back(v);
  }
  return out;
}

// Replays ratings recorded in a verdict JSONL file.
class FileProvider : public OracleProvider {
 public:
  explicit FileProvider(const std::string& path) {
    for (const auto& v : load_verdicts_jsonl(path))
      records_[key(v.user, v.item)] = {v.user_rating, v.item_rating};
  }

  Rating rate(const RatingRequest& request) override {
    ++calls_;
    auto it = records_.find(key(request.user, request.item));
    if (it == records_.end())
      throw ProviderError("no recorded verdict for pair (" +
                          std::to_string(request.user) + "," +
                          std::to_string(request.item) + ")");
    return request.channel == RatingChannel::user_based ? it->second.first
                                                        : it->second.second;
  }

  std::string name() const override { return "file"; }

 private:
  static std::uint64_t key(UserId u, ItemId i) {
    return (std::uint64_t(u) << 32) | i;
  }
  std::map<std::uint64_t, std::pair<Rating, Rating>> records_;
};

// Prompt templates with {user_profile}, {item_profile} and
// {evidence_profiles} placeholders.
struct PromptTemplates {
  std::string user_template;
  std::string item_template;

  static PromptTemplates load(const std::string& dir) {
    auto read = [](const std::string& p) {
      std::ifstream in(p);
      if (!in) throw IoError("cannot open '" + p + "'");
      std::string s((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
      return s;
    };
    return {read(dir + "/user_rating.txt"), read(dir + "/item_rating.txt")};
  }
};

inline std::string render_template(
    std::string text, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string needle = "{" + k + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      text.replace(pos, needle.size(), v);
      pos += v.size();
    }
  }
  return text;
}

// Extracts the first High/Mid/Low occurrence after a "rating" marker.
// Unparseable payloads are an error, never a silent Mid.
inline Rating parse_rating_payload(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (j.contains("rating") && j.at("rating").is_string())
      if (auto r = rating_from_string(j.at("rating").get<std::string>()))
        return *r;
  } catch (const nlohmann::json::exception&) {
    // fall through to the marker scan
  }
  std::string lower(body);
  for (auto& c : lower) c = static_cast<char>(std::tolower(unsigned(c)));
  const auto marker = lower.find("rating");
  if (marker != std::string::npos) {
    std::size_t best = std::string::npos;
    Rating best_rating = Rating::Mid;
    for (const auto& [word, rating] :
         {std::pair<const char*, Rating>{"high", Rating::High},
          {"mid", Rating::Mid},
          {"low", Rating::Low}}) {
      const auto pos = lower.find(word, marker + 6);
      if (pos != std::string::npos && pos < best) {
        best = pos;
        best_rating = rating;
      }
    }
    if (best != std::string::npos) return best_rating;
  }
  throw ProviderError("unparseable rating payload: " + body);
}

struct HttpProviderConfig {
  std::string url;  // e.g. http://localhost:8080/rate
  std::string auth_header = "Authorization";
  std::string api_key_env = "RELDEN_ORACLE_KEY";
  std::string template_dir;  // optional; rendered prompt sent when set
  int timeout_seconds = 30;
  int max_retries = 2;
};

class HttpProvider : public OracleProvider {
 public:
  explicit HttpProvider(HttpProviderConfig cfg);
  Rating rate(const RatingRequest& request) override;
  std::string name() const override { return "http"; }

 private:
  HttpProviderConfig cfg_;
  std::string base_, path_;
  std::optional<PromptTemplates> templates_;
};

// ---------------------------------------------------------------------------
// Verdict cache: keyed by (user, item, channel), persisted in the verdict
// JSONL format so a cache file doubles as a file-provider input.
// ---------------------------------------------------------------------------
class VerdictCache {
 public:
  VerdictCache() = default;

  static VerdictCache load_or_empty(const std::string& path) {
    VerdictCache cache;
    std::ifstream probe(path);
    if (!probe) return cache;
    probe.close();
    for (const auto& v : load_verdicts_jsonl(path)) {
      cache.put(v.user, v.item, RatingChannel::user_based, v.user_rating);
      cache.put(v.user, v.item, RatingChannel::item_based, v.item_rating);
    }
    return cache;
  }

  std::optional<Rating> get(UserId u, ItemId i, RatingChannel c) const {
    auto it = entries_.find(key(u, i));
    if (it == entries_.end()) return std::nullopt;
    return c == RatingChannel::user_based ? it->second.first
                                          : it->second.second;
  }

  void put(UserId u, ItemId i, RatingChannel c, Rating r) {
    auto& e = entries_[key(u, i)];
    (c == RatingChannel::user_based ? e.first : e.second) = r;
  }

  // Entries with both channels present, in key order.
  std::vector<RelevanceVerdict> complete_verdicts() const {
    std::vector<RelevanceVerdict> out;
    for (const auto& [k, e] : entries_) {
      if (!e.first || !e.second) continue;
      RelevanceVerdict v;
      v.user = static_cast<UserId>(k >> 32);
      v.item = static_cast<ItemId>(k & 0xffffffffull);
      v.user_rating = *e.first;
      v.item_rating = *e.second;
      out.push_back(v);
    }
    return out;
  }

  void save(const std::string& path) const {
    save_verdicts_jsonl(complete_verdicts(), path);
  }

 private:
  static std::uint64_t key(UserId u, ItemId i) {
    return (std::uint64_t(u) << 32) | i;
  }
  std::map<std::uint64_t, std::pair<std::optional<Rating>,
                                    std::optional<Rating>>> entries_;
};

inline Rating rate_user_based(OracleProvider& provider,
                              const std::string& user_profile,
                              const std::string& item_profile, UserId u,
                              ItemId i) {
  RatingRequest req;
  req.channel = RatingChannel::user_based;
  req.user = u;
  req.item = i;
  req.user_profile = user_profile;
  req.item_profile = item_profile;
  return provider.rate(req);
}

inline Rating rate_item_based(OracleProvider& provider,
                              std::vector<std::string> evidence_profiles,
                              const std::string& item_profile, UserId u,
                              ItemId i) {
  RatingRequest req;
  req.channel = RatingChannel::item_based;
  req.user = u;
  req.item = i;
  req.item_profile = item_profile;
  req.evidence_profiles = std::move(evidence_profiles);
  return provider.rate(req);
}

// Profiles of the user's highest-scored interacted items under the
// pretrained scorer, truncated to evidence_size.
template <typename T>
std::vector<ItemId> build_evidence_items(const Representations<T>& pre_rep,
                                         const std::vector<ItemId>& positives,
                                         UserId u,
                                         std::uint32_t evidence_size) {
  std::vector<ItemId> sorted = positives;
  const auto scores = score_all(pre_rep, u);
  std::sort(sorted.begin(), sorted.end(), [&](ItemId a, ItemId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  if (sorted.size() > evidence_size) sorted.resize(evidence_size);
  return sorted;
}

// Rates every candidate pair on both channels, consulting the cache first.
// Returns one verdict per distinct pair, ordered by (user, item).
inline std::vector<RelevanceVerdict> rate_candidates(
    OracleProvider& provider, VerdictCache* cache,
    const std::vector<CandidatePair>& candidates, const ProfileStore& profiles,
    const std::vector<std::vector<ItemId>>& evidence_by_user) {
  std::map<std::uint64_t, RelevanceVerdict> out;
  for (const auto& c : candidates) {
    const std::uint64_t k = (std::uint64_t(c.user) << 32) | c.item;
    if (out.count(k)) continue;
    RelevanceVerdict v;
    v.user = c.user;
    v.item = c.item;
    v.provider = provider.name();

    auto cached_user =
        cache ? cache->get(c.user, c.item, RatingChannel::user_based)
              : std::nullopt;
    if (cached_user) {
      v.user_rating = *cached_user;
    } else {
      v.user_rating = rate_user_based(provider, profiles.user(c.user),
                                      profiles.item(c.item), c.user, c.item);
      if (cache)
        cache->put(c.user, c.item, RatingChannel::user_based, v.user_rating);
    }

    auto cached_item =
        cache ? cache->get(c.user, c.item, RatingChannel::item_based)
              : std::nullopt;
    if (cached_item) {
      v.item_rating = *cached_item;
    } else {
      std::vector<std::string> evidence;
      if (c.user < evidence_by_user.size())
        for (ItemId j : evidence_by_user[c.user])
          evidence.push_back(profiles.item(j));
      v.item_rating = rate_item_based(provider, std::move(evidence),
                                      profiles.item(c.item), c.user, c.item);
      if (cache)
        cache->put(c.user, c.item, RatingChannel::item_based, v.item_rating);
    }
    out.emplace(k, std::move(v));
  }
  std::vector<RelevanceVerdict> verdicts;
  verdicts.reserve(out.size());
  for (auto& [k, v] : out) verdicts.push_back(std::move(v));
  return verdicts;
}

struct Classification {
  std::vector<Edge> hard;   // C_H: both channels High
  std::vector<Edge> noisy;  // C_N: everything else in C
};

// Exact partition of the candidate set: a pair is hard iff both ratings are
// High; every other candidate is noisy.
inline Classification classify(const std::vector<RelevanceVerdict>& verdicts,
                               const std::vector<CandidatePair>& candidates) {
  std::map<std::uint64_t, const RelevanceVerdict*> by_pair;
  for (const auto& v : verdicts)
    by_pair[(std::uint64_t(v.user) << 32) | v.item] = &v;

  Classification out;
  std::vector<Edge> missing;
  std::vector<Edge> pairs;
  for (const auto& c : candidates) pairs.push_back({c.user, c.item});
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  for (const auto& e : pairs) {
    auto it = by_pair.find((std::uint64_t(e.user) << 32) | e.item);
    if (it == by_pair.end()) {
      missing.push_back(e);
      continue;
    }
    const auto& v = *it->second;
    if (v.user_rating == Rating::High && v.item_rating == Rating::High)
      out.hard.push_back(e);
    else
      out.noisy.push_back(e);
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 16); ++k)
      ids += (k ? ", " : "") + ("(" + std::to_string(missing[k].user) + "," +
                                std::to_string(missing[k].item) + ")");
    if (missing.size() > 16) ids += ", ...";
    throw std::runtime_error("missing verdicts for " +
                             std::to_string(missing.size()) +
                             " candidate pair(s): " + ids);
  }
  return out;
}

inline void save_pairs_tsv(const std::vector<Edge>& pairs,
                           const std::string& path) {
  AtomicFile file(path);
  file.out() << "# user\titem\n";
  for (const auto& e : pairs)
    file.out() << e.user << '\t' << e.item << '\n';
  file.commit();
}

}  // namespace relden

#include <httplib.h>

namespace relden {

inline HttpProvider::HttpProvider(HttpProviderConfig cfg)
    : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("oracle url must include a scheme: " +
                                cfg_.url);
  const auto path_start = cfg_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = cfg_.url;
    path_ = "/";
  } else {
    base_ = cfg_.url.substr(0, path_start);
    path_ = cfg_.url.substr(path_start);
  }
  if (!cfg_.template_dir.empty())
    templates_ = PromptTemplates::load(cfg_.template_dir);
}

inline Rating HttpProvider::rate(const RatingRequest& request) {
  ++calls_;
  nlohmann::json vars{{"item_profile", request.item_profile}};
  std::string rendered;
  if (request.channel == RatingChannel::user_based) {
    vars["user_profile"] = request.user_profile;
    if (templates_)
      rendered = render_template(templates_->user_template,
                                 {{"user_profile", request.user_profile},
                                  {"item_profile", request.item_profile}});
  } else {
    std::string evidence;
    for (const auto& p : request.evidence_profiles) {
      if (!evidence.empty()) evidence += "\n";
      evidence += "- " + p;
    }
    vars["evidence_profiles"] = evidence;
    if (templates_)
      rendered = render_template(templates_->item_template,
                                 {{"evidence_profiles", evidence},
                                  {"item_profile", request.item_profile}});
  }
  if (!rendered.empty()) vars["prompt"] = rendered;
  nlohmann::json body{
      {"template_id",
       request.channel == RatingChannel::user_based ? "user" : "item"},
      {"variables", vars}};

  httplib::Client client(base_);
  client.set_read_timeout(cfg_.timeout_seconds, 0);
  client.set_connection_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str());
      key && *key && !cfg_.auth_header.empty())
    headers.emplace(cfg_.auth_header, key);

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "connection failure (" + httplib::to_string(res.error()) +
                   ")";
      continue;
    }
    if (res->status >= 500) {
      last_error = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderError("oracle returned status " +
                          std::to_string(res->status) + ": " + res->body);
    return parse_rating_payload(res->body);
  }
  throw ProviderError("oracle unreachable after " +
                      std::to_string(cfg_.max_retries + 1) + " attempt(s): " +
                      last_error);
}

}  // namespace relden
