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
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace relden {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

// Thrown on malformed input files. Messages carry the offending line number.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage was invoked before its upstream artifacts exist.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& msg)
      : std::runtime_error(msg), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Oracle provider failures (network, unparseable payloads).
class ProviderError : public std::runtime_error {
 public:
  explicit ProviderError(const std::string& msg) : std::runtime_error(msg) {}
};

using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

// ---------------------------------------------------------------------------
// Dense row-major matrix. The training path instantiates float, verification
// oracles instantiate double.
// ---------------------------------------------------------------------------
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k)
      out.data()[k] = static_cast<U>(data_[k]);
    return out;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All stochastic operations take explicit seeds and derive
// independent streams via hashing, so no result depends on call ordering or
// on platform library details.
// ---------------------------------------------------------------------------
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Mixes an arbitrary tuple of integers into one stream seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x8f1bbcdcbfa53e0bull;
  for (std::uint64_t p : parts) {
    state ^= p + 0x9e3779b97f4a7c15ull + (state << 6) + (state >> 2);
    splitmix64(state);
  }
  std::uint64_t copy = state;
  return splitmix64(copy);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; two uniforms per draw keeps the stream layout obvious.
  double next_normal(double mean, double stddev) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Small numeric helpers shared by the loss implementations.
// ---------------------------------------------------------------------------
template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

// log(1 + exp(x)) without overflow.
template <typename T>
inline T log1p_exp(T x) {
  if (x > T(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

template <typename T>
inline T norm2(const T* a, std::size_t n) {
  return std::sqrt(dot(a, a, n));
}

// Cosine similarity; zero-norm operands throw (callers that can legitimately
// see zero vectors use cosine_or_zero).
template <typename T>
inline T cosine(const T* a, const T* b, std::size_t n) {
  T na = norm2(a, n), nb = norm2(b, n);
  if (na == T(0) || nb == T(0))
    throw std::domain_error("cosine of zero-norm vector");
  return dot(a, b, n) / (na * nb);
}

template <typename T>
inline T cosine_or_zero(const T* a, const T* b, std::size_t n) {
  T na = norm2(a, n), nb = norm2(b, n);
  if (na == T(0) || nb == T(0)) return T(0);
  return dot(a, b, n) / (na * nb);
}

// Writes through a sibling temp file and renames on commit, so re-running a
// stage replaces its artifacts atomically.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path, bool binary = false)
      : path_(std::move(path)), tmp_(path_ + ".tmp") {
    out_.open(tmp_, binary ? std::ios::binary | std::ios::trunc
                           : std::ios::trunc);
    if (!out_) throw IoError("cannot write '" + tmp_ + "'");
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ofstream& out() { return out_; }

  void commit() {
    out_.close();
    if (out_.fail()) {
      std::remove(tmp_.c_str());
      throw IoError("failed writing '" + path_ + "'");
    }
    if (std::rename(tmp_.c_str(), path_.c_str()) != 0) {
      std::remove(tmp_.c_str());
      throw IoError("cannot replace '" + path_ + "'");
    }
    committed_ = true;
  }

  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::remove(tmp_.c_str());
    }
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

// FNV-1a, used for config hashes and run directory names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace relden
