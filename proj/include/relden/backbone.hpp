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
// Embedding tables, mean-of-layers graph propagation, and inner-product
// scoring.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "relden/core.hpp"
#include "relden/graph.hpp"

namespace relden {

template <typename T>
struct EmbeddingTable {
  Matrix<T> users;  // num_users x d_rec
  Matrix<T> items;  // num_items x d_rec
  std::size_t dim() const { return users.cols(); }
};

enum class GraphTag : std::uint8_t {
  original,      // G
  edited,        // G'
  original_aug,  // G_aug
  edited_aug,    // G'_aug
};

template <typename T>
struct Representations {
  Matrix<T> users;
  Matrix<T> items;
  GraphTag source = GraphTag::original;
  std::size_t dim() const { return users.cols(); }
};

// Entries i.i.d. normal(0, init_std), deterministic per seed.
template <typename T>
EmbeddingTable<T> init_embeddings(std::uint32_t num_users,
                                  std::uint32_t num_items, std::size_t d_rec,
                                  std::uint64_t seed, double init_std = 0.01) {
  if (d_rec < 1) throw std::invalid_argument("embedding dim must be >= 1");
  EmbeddingTable<T> t;
  t.users = Matrix<T>(num_users, d_rec);
  t.items = Matrix<T>(num_items, d_rec);
  Rng rng(derive_seed({seed, 0xe3b1ull}));
  for (std::size_t k = 0; k < t.users.size(); ++k)
    t.users.data()[k] = static_cast<T>(rng.next_normal(0.0, init_std));
  for (std::size_t k = 0; k < t.items.size(); ++k)
    t.items.data()[k] = static_cast<T>(rng.next_normal(0.0, init_std));
  return t;
}

namespace detail {

// One hop: out_users = A_ui * in_items, out_items = A_ui^T * in_users.
template <typename T>
void adjacency_multiply(const NormalizedAdjacency& adj,
                        const Matrix<T>& in_users, const Matrix<T>& in_items,
                        Matrix<T>& out_users, Matrix<T>& out_items) {
  const std::size_t d = in_users.cols();
  out_users.fill(T(0));
  out_items.fill(T(0));
  for (std::uint32_t u = 0; u < adj.num_users; ++u) {
    T* dst = out_users.row(u);
    for (std::size_t k = adj.user_ptr[u]; k < adj.user_ptr[u + 1]; ++k) {
      const T c = static_cast<T>(adj.user_vals[k]);
      const T* src = in_items.row(adj.user_cols[k]);
      for (std::size_t j = 0; j < d; ++j) dst[j] += c * src[j];
    }
  }
  for (std::uint32_t i = 0; i < adj.num_items; ++i) {
    T* dst = out_items.row(i);
    for (std::size_t k = adj.item_ptr[i]; k < adj.item_ptr[i + 1]; ++k) {
      const T c = static_cast<T>(adj.item_vals[k]);
      const T* src = in_users.row(adj.item_cols[k]);
      for (std::size_t j = 0; j < d; ++j) dst[j] += c * src[j];
    }
  }
}

}  // namespace detail

// Layer 0 is the table itself, layer k+1 = A * layer k; the output is the
// uniform mean over layers 0..L.
template <typename T>
Representations<T> propagate(const EmbeddingTable<T>& table,
                             const NormalizedAdjacency& adj,
                             std::uint32_t num_layers,
                             GraphTag tag = GraphTag::original) {
  Representations<T> out;
  out.source = tag;
  out.users = table.users;
  out.items = table.items;
  if (num_layers == 0) return out;

  Matrix<T> cur_u = table.users, cur_i = table.items;
  Matrix<T> next_u(cur_u.rows(), cur_u.cols()), next_i(cur_i.rows(),
                                                       cur_i.cols());
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    detail::adjacency_multiply(adj, cur_u, cur_i, next_u, next_i);
    for (std::size_t k = 0; k < out.users.size(); ++k)
      out.users.data()[k] += next_u.data()[k];
    for (std::size_t k = 0; k < out.items.size(); ++k)
      out.items.data()[k] += next_i.data()[k];
    std::swap(cur_u, next_u);
    std::swap(cur_i, next_i);
  }
  const T inv = T(1) / T(num_layers + 1);
  for (std::size_t k = 0; k < out.users.size(); ++k) out.users.data()[k] *= inv;
  for (std::size_t k = 0; k < out.items.size(); ++k) out.items.data()[k] *= inv;
  return out;
}

// The propagation operator is symmetric, so the gradient w.r.t. the table is
// the same operator applied to the representation gradient.
template <typename T>
EmbeddingTable<T> backpropagate(const Matrix<T>& grad_users,
                                const Matrix<T>& grad_items,
                                const NormalizedAdjacency& adj,
                                std::uint32_t num_layers) {
  EmbeddingTable<T> fake;
  fake.users = grad_users;
  fake.items = grad_items;
  auto rep = propagate(fake, adj, num_layers);
  EmbeddingTable<T> grad;
  grad.users = std::move(rep.users);
  grad.items = std::move(rep.items);
  return grad;
}

template <typename T>
T score(const Representations<T>& rep, UserId u, ItemId i) {
  if (u >= rep.users.rows() || i >= rep.items.rows())
    throw std::out_of_range("score: id out of range");
  return dot(rep.users.row(u), rep.items.row(i), rep.dim());
}

template <typename T>
std::vector<T> score_all(const Representations<T>& rep, UserId u) {
  if (u >= rep.users.rows()) throw std::out_of_range("score_all: user id");
  std::vector<T> out(rep.items.rows());
  const T* zu = rep.users.row(u);
  for (std::size_t i = 0; i < rep.items.rows(); ++i)
    out[i] = dot(zu, rep.items.row(i), rep.dim());
  return out;
}

// ---------------------------------------------------------------------------
// Embedding checkpoint container. Binary, little-endian:
//   magic "RDEC" | version u32 | num_users u64 | num_items u64 | d_rec u32
// followed by row-major float32 rows, users then items. The same container
// holds optimizer moment estimates and projected semantic embeddings.
// ---------------------------------------------------------------------------
inline constexpr char kEmbeddingMagic[4] = {'R', 'D', 'E', 'C'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline void save_embedding_file(const std::string& path,
                                const Matrix<float>& users,
                                const Matrix<float>& items) {
  AtomicFile file(path, /*binary=*/true);
  auto& out = file.out();
  const std::uint32_t version = kEmbeddingVersion;
  const std::uint64_t nu = users.rows(), ni = items.rows();
  const std::uint32_t d = static_cast<std::uint32_t>(
      users.rows() ? users.cols() : items.cols());
  if (users.rows() && items.rows() && users.cols() != items.cols())
    throw std::invalid_argument("user/item dims differ");
  out.write(kEmbeddingMagic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&nu), 8);
  out.write(reinterpret_cast<const char*>(&ni), 8);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(users.data()),
            static_cast<std::streamsize>(users.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(items.data()),
            static_cast<std::streamsize>(items.size() * sizeof(float)));
  file.commit();
}

inline void save_embedding_file(const std::string& path,
                                const EmbeddingTable<float>& table) {
  save_embedding_file(path, table.users, table.items);
}

inline EmbeddingTable<float> load_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4];
  std::uint32_t version = 0, d = 0;
  std::uint64_t nu = 0, ni = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&nu), 8);
  in.read(reinterpret_cast<char*>(&ni), 8);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || std::memcmp(magic, kEmbeddingMagic, 4) != 0)
    throw ParseError("'" + path + "' is not an embedding checkpoint");
  if (version != kEmbeddingVersion)
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  EmbeddingTable<float> t;
  t.users = Matrix<float>(nu, d);
  t.items = Matrix<float>(ni, d);
  in.read(reinterpret_cast<char*>(t.users.data()),
          static_cast<std::streamsize>(t.users.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(t.items.data()),
          static_cast<std::streamsize>(t.items.size() * sizeof(float)));
  if (!in) throw ParseError("'" + path + "' is truncated");
  return t;
}

}  // namespace relden
