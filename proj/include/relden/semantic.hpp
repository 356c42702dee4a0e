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
// Semantic alignment: ingest text-encoder embeddings, build reliable-positive
// alignment labels, train the projector with a temperature-scaled softmax
// objective, and emit unit-normalized projected embeddings.
//
// Embedding text format: first line `count dim`, then one `id v1 ... v_dim`
// line per entity. A binary variant reuses the embedding checkpoint
// container with the matrix stored in the user slot.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "relden/adam.hpp"
#include "relden/backbone.hpp"
#include "relden/core.hpp"
#include "relden/dataset.hpp"

namespace relden {

struct RawSemanticEmbeddings {
  Matrix<double> users;  // num_users x d_llm
  Matrix<double> items;  // num_items x d_llm
  std::size_t dim() const { return users.cols(); }
};

namespace detail {

inline bool sniff_binary_embedding(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return in && std::memcmp(magic, kEmbeddingMagic, 4) == 0;
}

// Parses one embedding file into rows indexed by dense id.
inline Matrix<double> read_embedding_matrix(
    const std::string& path, std::size_t expected_count, bool is_user,
    const IdRemap* remap) {
  if (sniff_binary_embedding(path)) {
    auto table = load_embedding_file(path);
    if (table.users.rows() != expected_count || table.items.rows() != 0)
      throw ParseError("'" + path + "': binary embedding count " +
                       std::to_string(table.users.rows()) + ", expected " +
                       std::to_string(expected_count));
    return table.users.template cast<double>();
  }

  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("'" + path + "' is empty");
  std::istringstream head(line);
  std::size_t count = 0, dim = 0;
  if (!(head >> count >> dim) || dim == 0)
    throw ParseError("'" + path + "': first line must be 'count dim'");

  Matrix<double> out(expected_count, dim);
  std::vector<bool> seen(expected_count, false);
  std::size_t line_no = 1;
  for (std::size_t row = 0; row < count; ++row) {
    if (!std::getline(in, line))
      throw ParseError("'" + path + "': expected " + std::to_string(count) +
                       " rows, found " + std::to_string(row));
    ++line_no;
    std::istringstream ls(line);
    std::uint64_t orig = 0;
    if (!(ls >> orig))
      throw ParseError("line " + std::to_string(line_no) + ": missing id");
    std::size_t dense;
    if (remap) {
      auto d = is_user ? remap->dense_user(orig) : remap->dense_item(orig);
      if (!d) continue;  // entity not in the dataset
      dense = *d;
    } else {
      dense = orig;
    }
    if (dense >= expected_count)
      throw ParseError("line " + std::to_string(line_no) + ": id " +
                       std::to_string(orig) + " out of range");
    double v;
    std::size_t got = 0;
    while (got < dim && (ls >> v)) out(dense, got++) = v;
    if (got != dim)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values, got " +
                       std::to_string(got));
    seen[dense] = true;
  }
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < expected_count; ++k)
    if (!seen[k]) missing.push_back(k);
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 16); ++k)
      ids += (k ? "," : "") + std::to_string(missing[k]);
    if (missing.size() > 16) ids += ",...";
    throw ParseError("'" + path + "': missing embeddings for " +
                     std::to_string(missing.size()) + " id(s): " + ids);
  }
  return out;
}

}  // namespace detail

// Loads user and item embedding files. Both must share one dimension, cover
// every dataset id, and contain no zero-norm vector.
inline RawSemanticEmbeddings ingest_llm_embeddings(
    const std::string& user_path, const std::string& item_path,
    std::uint32_t num_users, std::uint32_t num_items,
    const IdRemap* remap = nullptr) {
  RawSemanticEmbeddings raw;
  raw.users = detail::read_embedding_matrix(user_path, num_users, true, remap);
  raw.items = detail::read_embedding_matrix(item_path, num_items, false, remap);
  if (raw.users.cols() != raw.items.cols())
    throw ParseError("embedding dimension mismatch: users " +
                     std::to_string(raw.users.cols()) + ", items " +
                     std::to_string(raw.items.cols()));
  for (std::size_t u = 0; u < raw.users.rows(); ++u)
    if (norm2(raw.users.row(u), raw.dim()) == 0.0)
      throw ParseError("zero-norm embedding for user " + std::to_string(u));
  for (std::size_t i = 0; i < raw.items.rows(); ++i)
    if (norm2(raw.items.row(i), raw.dim()) == 0.0)
      throw ParseError("zero-norm embedding for item " + std::to_string(i));
  return raw;
}

inline void save_embeddings_text(const std::string& path,
                                 const Matrix<double>& m) {
  AtomicFile file(path);
  auto& out = file.out();
  out.precision(17);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << r;
    for (std::size_t c = 0; c < m.cols(); ++c) out << ' ' << m(r, c);
    out << '\n';
  }
  file.commit();
}

// Cosine similarity of the raw text embeddings.
inline double raw_similarity(const RawSemanticEmbeddings& raw, UserId u,
                             ItemId i) {
  return cosine(raw.users.row(u), raw.items.row(i), raw.dim());
}

// ---------------------------------------------------------------------------
// Alignment labels: items that are both train positives of the user and in
// the user's top-N list by raw cosine. Users with an empty intersection are
// excluded from alignment training.
// ---------------------------------------------------------------------------
struct AlignmentLabels {
  std::vector<std::vector<ItemId>> items_by_user;  // sorted; empty = excluded
  std::uint32_t top_n = 0;

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& v : items_by_user) n += v.size();
    return n;
  }
};

inline AlignmentLabels build_alignment_labels(const RawSemanticEmbeddings& raw,
                                              const InteractionDataset& ds,
                                              std::uint32_t top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  AlignmentLabels labels;
  labels.top_n = top_n;
  labels.items_by_user.resize(ds.num_users);
  auto positives = ds.positives_by_user(SplitTag::train);

  std::vector<std::pair<double, ItemId>> sims(ds.num_items);
  for (UserId u = 0; u < ds.num_users; ++u) {
    if (positives[u].empty()) continue;
    for (ItemId i = 0; i < ds.num_items; ++i)
      sims[i] = {raw_similarity(raw, u, i), i};
    const std::size_t n = std::min<std::size_t>(top_n, ds.num_items);
    // Ties broken by ascending item id for determinism.
    std::partial_sort(sims.begin(), sims.begin() + n, sims.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    std::vector<ItemId> top(n);
    for (std::size_t k = 0; k < n; ++k) top[k] = sims[k].second;
    std::sort(top.begin(), top.end());
    std::set_intersection(positives[u].begin(), positives[u].end(),
                          top.begin(), top.end(),
                          std::back_inserter(labels.items_by_user[u]));
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Projector: one hidden layer, tanh, parameters stored flat so the optimizer
// and the finite-difference checks can treat them as a single vector.
// ---------------------------------------------------------------------------
template <typename T>
struct Projector {
  std::size_t in_dim = 0, hidden = 0, out_dim = 0;
  std::vector<T> params;

  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return hidden * in_dim; }
  std::size_t w2_off() const { return b1_off() + hidden; }
  std::size_t b2_off() const { return w2_off() + out_dim * hidden; }
  std::size_t param_count() const { return b2_off() + out_dim; }

  static Projector init(std::size_t in_dim, std::size_t hidden,
                        std::size_t out_dim, std::uint64_t seed) {
    Projector p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.out_dim = out_dim;
    p.params.assign(p.param_count(), T(0));
    Rng rng(derive_seed({seed, 0x9c07ull}));
    const double lim1 = std::sqrt(6.0 / double(in_dim + hidden));
    const double lim2 = std::sqrt(6.0 / double(hidden + out_dim));
    for (std::size_t k = 0; k < hidden * in_dim; ++k)
      p.params[p.w1_off() + k] =
          static_cast<T>((2.0 * rng.next_double() - 1.0) * lim1);
    for (std::size_t k = 0; k < out_dim * hidden; ++k)
      p.params[p.w2_off() + k] =
          static_cast<T>((2.0 * rng.next_double() - 1.0) * lim2);
    return p;
  }

  // y = W2 tanh(W1 e + b1) + b2. hidden_out must hold `hidden` values,
  // y `out_dim`.
  void forward(const double* e, T* hidden_out, T* y) const {
    const T* w1 = params.data() + w1_off();
    const T* b1 = params.data() + b1_off();
    const T* w2 = params.data() + w2_off();
    const T* b2 = params.data() + b2_off();
    for (std::size_t h = 0; h < hidden; ++h) {
      T acc = b1[h];
      const T* row = w1 + h * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k)
        acc += row[k] * static_cast<T>(e[k]);
      hidden_out[h] = std::tanh(acc);
    }
    for (std::size_t o = 0; o < out_dim; ++o) {
      T acc = b2[o];
      const T* row = w2 + o * hidden;
      for (std::size_t h = 0; h < hidden; ++h) acc += row[h] * hidden_out[h];
      y[o] = acc;
    }
  }

  // Accumulates parameter gradients for one entity given dL/dy.
  void backward(const double* e, const T* hidden_out, const T* grad_y,
                std::vector<T>& grad_params) const {
    const T* w2 = params.data() + w2_off();
    T* gw1 = grad_params.data() + w1_off();
    T* gb1 = grad_params.data() + b1_off();
    T* gw2 = grad_params.data() + w2_off();
    T* gb2 = grad_params.data() + b2_off();
    std::vector<T> grad_h(hidden, T(0));
    for (std::size_t o = 0; o < out_dim; ++o) {
      gb2[o] += grad_y[o];
      T* row = gw2 + o * hidden;
      const T* w2row = w2 + o * hidden;
      for (std::size_t h = 0; h < hidden; ++h) {
        row[h] += grad_y[o] * hidden_out[h];
        grad_h[h] += grad_y[o] * w2row[h];
      }
    }
    for (std::size_t h = 0; h < hidden; ++h) {
      const T g_pre = grad_h[h] * (T(1) - hidden_out[h] * hidden_out[h]);
      gb1[h] += g_pre;
      T* row = gw1 + h * in_dim;
      for (std::size_t k = 0; k < in_dim; ++k)
        row[k] += g_pre * static_cast<T>(e[k]);
    }
  }
};

// Unit-normalized projected embeddings for every user and item.
template <typename T>
struct ProjectedEmbeddings {
  Matrix<T> users;
  Matrix<T> items;
  std::size_t dim() const { return users.cols(); }
};

namespace detail {

template <typename T>
void normalize_rows(Matrix<T>& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    T n = norm2(m.row(r), m.cols());
    if (n == T(0))
      throw std::domain_error("projected embedding has zero norm");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) /= n;
  }
}

// dL/dy from dL/dy_hat through y_hat = y / |y|.
template <typename T>
void normalize_backward(const T* y, T inv_norm, const T* grad_unit,
                        T* grad_raw, std::size_t n) {
  T proj = T(0);
  for (std::size_t k = 0; k < n; ++k)
    proj += grad_unit[k] * y[k] * inv_norm;
  for (std::size_t k = 0; k < n; ++k)
    grad_raw[k] = (grad_unit[k] - proj * y[k] * inv_norm) * inv_norm;
}

}  // namespace detail

template <typename T>
ProjectedEmbeddings<T> project(const Projector<T>& proj,
                               const RawSemanticEmbeddings& raw) {
  ProjectedEmbeddings<T> out;
  out.users = Matrix<T>(raw.users.rows(), proj.out_dim);
  out.items = Matrix<T>(raw.items.rows(), proj.out_dim);
  std::vector<T> hidden(proj.hidden);
  for (std::size_t u = 0; u < raw.users.rows(); ++u)
    proj.forward(raw.users.row(u), hidden.data(), out.users.row(u));
  for (std::size_t i = 0; i < raw.items.rows(); ++i)
    proj.forward(raw.items.row(i), hidden.data(), out.items.row(i));
  detail::normalize_rows(out.users);
  detail::normalize_rows(out.items);
  return out;
}

// One alignment training example: a labeled positive and sampled negatives.
struct AlignExample {
  UserId user = 0;
  ItemId pos = 0;
  std::vector<ItemId> negs;
};

// Mean softmax cross-entropy over examples with similarities
// dot(unit(z_u), unit(z_k)) / tau. When grad_params is non-null it must be
// sized like projector.params and receives the accumulated gradient.
template <typename T>
T align_loss(const Projector<T>& proj, const RawSemanticEmbeddings& raw,
             const std::vector<AlignExample>& batch, T tau,
             std::vector<T>* grad_params = nullptr) {
  if (batch.empty()) throw std::invalid_argument("empty alignment batch");
  const std::size_t d = proj.out_dim;
  T total = T(0);

  std::vector<T> hid_u(proj.hidden), y_u(d), zu(d);
  std::vector<std::vector<T>> hid_k, y_k, zk;
  std::vector<T> logits, p;
  std::vector<T> grad_zu(d), grad_zk(d), grad_raw(d);

  for (const auto& ex : batch) {
    const std::size_t m = 1 + ex.negs.size();
    hid_k.assign(m, std::vector<T>(proj.hidden));
    y_k.assign(m, std::vector<T>(d));
    zk.assign(m, std::vector<T>(d));
    logits.assign(m, T(0));

    proj.forward(raw.users.row(ex.user), hid_u.data(), y_u.data());
    const T nu = norm2(y_u.data(), d);
    if (nu == T(0)) throw std::domain_error("zero-norm projection");
    for (std::size_t c = 0; c < d; ++c) zu[c] = y_u[c] / nu;

    for (std::size_t k = 0; k < m; ++k) {
      const ItemId item = k == 0 ? ex.pos : ex.negs[k - 1];
      proj.forward(raw.items.row(item), hid_k[k].data(), y_k[k].data());
      const T ni = norm2(y_k[k].data(), d);
      if (ni == T(0)) throw std::domain_error("zero-norm projection");
      for (std::size_t c = 0; c < d; ++c) zk[k][c] = y_k[k][c] / ni;
      logits[k] = dot(zu.data(), zk[k].data(), d) / tau;
    }

    const T mx = *std::max_element(logits.begin(), logits.end());
    T denom = T(0);
    for (T l : logits) denom += std::exp(l - mx);
    total += -(logits[0] - mx) + std::log(denom);

    if (grad_params) {
      p.assign(m, T(0));
      for (std::size_t k = 0; k < m; ++k) p[k] = std::exp(logits[k] - mx) / denom;
      const T scale = T(1) / (tau * T(batch.size()));
      std::fill(grad_zu.begin(), grad_zu.end(), T(0));
      for (std::size_t k = 0; k < m; ++k) {
        const T g = (p[k] - (k == 0 ? T(1) : T(0))) * scale;
        for (std::size_t c = 0; c < d; ++c) {
          grad_zu[c] += g * zk[k][c];
          grad_zk[c] = g * zu[c];
        }
        const ItemId item = k == 0 ? ex.pos : ex.negs[k - 1];
        const T ni = norm2(y_k[k].data(), d);
        detail::normalize_backward(y_k[k].data(), T(1) / ni, grad_zk.data(),
                                   grad_raw.data(), d);
        proj.backward(raw.items.row(item), hid_k[k].data(), grad_raw.data(),
                      *grad_params);
      }
      detail::normalize_backward(y_u.data(), T(1) / nu, grad_zu.data(),
                                 grad_raw.data(), d);
      proj.backward(raw.users.row(ex.user), hid_u.data(), grad_raw.data(),
                    *grad_params);
    }
  }
  return total / T(batch.size());
}

// Projector file: magic "RDPJ" | version u32 | in u32 | hidden u32 | out u32
// followed by the flat float32 parameter vector.
inline constexpr char kProjectorMagic[4] = {'R', 'D', 'P', 'J'};

inline void save_projector(const Projector<float>& proj,
                           const std::string& path) {
  AtomicFile file(path, /*binary=*/true);
  auto& out = file.out();
  const std::uint32_t version = 1, in = std::uint32_t(proj.in_dim),
                      hidden = std::uint32_t(proj.hidden),
                      od = std::uint32_t(proj.out_dim);
  out.write(kProjectorMagic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&in), 4);
  out.write(reinterpret_cast<const char*>(&hidden), 4);
  out.write(reinterpret_cast<const char*>(&od), 4);
  out.write(reinterpret_cast<const char*>(proj.params.data()),
            static_cast<std::streamsize>(proj.params.size() * sizeof(float)));
  file.commit();
}

inline Projector<float> load_projector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4];
  std::uint32_t version = 0, ind = 0, hidden = 0, outd = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&ind), 4);
  in.read(reinterpret_cast<char*>(&hidden), 4);
  in.read(reinterpret_cast<char*>(&outd), 4);
  if (!in || std::memcmp(magic, kProjectorMagic, 4) != 0 || version != 1)
    throw ParseError("'" + path + "' is not a projector file");
  Projector<float> proj;
  proj.in_dim = ind;
  proj.hidden = hidden;
  proj.out_dim = outd;
  proj.params.assign(proj.param_count(), 0.0f);
  in.read(reinterpret_cast<char*>(proj.params.data()),
          static_cast<std::streamsize>(proj.params.size() * sizeof(float)));
  if (!in) throw ParseError("'" + path + "' is truncated");
  return proj;
}

struct AlignTrainConfig {
  double tau = 0.5;
  std::uint32_t negatives = 50;  // sampled per labeled pair, each epoch
  std::uint32_t epochs = 50;
  double lr = 1e-3;
  std::uint32_t hidden = 256;
  std::uint32_t batch_size = 256;
  std::size_t out_dim = 64;
  std::uint64_t seed = 0;
};

struct AlignTrainResult {
  std::vector<double> epoch_loss;
};

// Trains the projector on the labeled pairs. Negatives are resampled each
// epoch, uniformly from the items outside the user's label set.
template <typename T>
Projector<T> train_projector(const RawSemanticEmbeddings& raw,
                             const AlignmentLabels& labels,
                             const AlignTrainConfig& cfg,
                             AlignTrainResult* result = nullptr) {
  std::vector<std::pair<UserId, ItemId>> pairs;
  for (UserId u = 0; u < labels.items_by_user.size(); ++u)
    for (ItemId i : labels.items_by_user[u]) pairs.push_back({u, i});
  if (pairs.empty())
    throw std::invalid_argument("alignment label set is empty");

  const std::uint32_t num_items = static_cast<std::uint32_t>(raw.items.rows());
  auto projector =
      Projector<T>::init(raw.dim(), cfg.hidden, cfg.out_dim, cfg.seed);
  AdamState<T> opt(projector.param_count());
  AdamConfig<T> opt_cfg;
  opt_cfg.lr = static_cast<T>(cfg.lr);
  std::vector<T> grads(projector.param_count());

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed({cfg.seed, 0xa119ull, epoch}));
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[shuffle_rng.next_below(k)]);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      std::vector<AlignExample> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto [u, pos] = pairs[order[k]];
        AlignExample ex;
        ex.user = u;
        ex.pos = pos;
        const auto& excluded = labels.items_by_user[u];
        Rng neg_rng(derive_seed({cfg.seed, 0xa21eull, epoch, order[k]}));
        const std::size_t universe = num_items - excluded.size();
        const std::uint32_t want = static_cast<std::uint32_t>(
            std::min<std::size_t>(cfg.negatives, universe));
        while (ex.negs.size() < want) {  // without replacement
          ItemId j = static_cast<ItemId>(neg_rng.next_below(num_items));
          if (std::binary_search(excluded.begin(), excluded.end(), j))
            continue;
          if (std::find(ex.negs.begin(), ex.negs.end(), j) != ex.negs.end())
            continue;
          ex.negs.push_back(j);
        }
        batch.push_back(std::move(ex));
      }
      std::fill(grads.begin(), grads.end(), T(0));
      const T loss = align_loss(projector, raw, batch,
                                static_cast<T>(cfg.tau), &grads);
      adam_step(projector.params, grads, opt, opt_cfg);
      epoch_loss += static_cast<double>(loss) * double(batch.size());
      seen += batch.size();
    }
    if (result) result->epoch_loss.push_back(epoch_loss / double(seen));
  }
  return projector;
}

}  // namespace relden
