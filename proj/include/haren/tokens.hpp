// Copyright 2026 The haren Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Pseudo-label generation for the CTC branch: a K-means codebook over frame
// features, nearest-centroid tokenization, class-dependent re-indexing into
// disjoint vocabularies, and run-length collapse.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "haren/binio.hpp"
#include "haren/ctc.hpp"
#include "haren/errors.hpp"
#include "haren/tensor.hpp"

namespace haren {

enum class Label : int { kNonDepressed = 0, kDepressed = 1 };

inline Label label_from_int(int v) {
  if (v != 0 && v != 1) throw DataError("class label must be 0 or 1, got " + std::to_string(v));
  return static_cast<Label>(v);
}

// Blank + k tokens per class.
inline std::size_t ctc_vocab_size(std::size_t k) { return 2 * k + 1; }

// Collapsed CTC target. Only constructible through make(), which enforces the
// no-adjacent-repeat and length feasibility invariants.
class TokenSequence {
 public:
  static TokenSequence make(std::vector<int> tokens, std::size_t input_length) {
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (tokens[i] == tokens[i - 1]) {
        throw DataError("token sequence has adjacent repeat at position " + std::to_string(i));
      }
    }
    if (tokens.size() > input_length) {
      throw InfeasibleError("target of " + std::to_string(tokens.size()) +
                            " tokens exceeds input length " + std::to_string(input_length));
    }
    return TokenSequence(std::move(tokens), input_length);
  }

  std::span<const int> tokens() const { return tokens_; }
  std::size_t input_length() const { return input_length_; }
  std::size_t target_length() const { return tokens_.size(); }

 private:
  TokenSequence(std::vector<int> tokens, std::size_t input_length)
      : tokens_(std::move(tokens)), input_length_(input_length) {}

  std::vector<int> tokens_;
  std::size_t input_length_;
};

struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  Tensor<double> centroids;  // k x dim
  std::uint64_t fit_seed = 0;
  std::size_t iterations_run = 0;
  double inertia = 0;
  std::vector<double> inertia_history;  // after each assignment pass
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Index of the closest centroid; ties resolve to the lowest index.
inline std::size_t nearest(std::span<const double> x, const Tensor<double>& centroids,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding. Stops when no assignment changes
// or after max_iter passes. A cluster that empties is re-seeded at the point
// farthest from its current centroid.
inline Codebook kmeans_fit(const Tensor<double>& features, std::size_t k, std::uint64_t seed,
                           std::size_t max_iter = 100) {
  if (features.rank() != 2) throw DimensionError("kmeans_fit expects an N x d matrix");
  const std::size_t n = features.rows();
  const std::size_t dim = features.cols();
  if (k < 2) throw ParameterError("kmeans_fit needs k >= 2, got " + std::to_string(k));
  if (n < k) {
    throw ParameterError("kmeans_fit: " + std::to_string(n) + " points for k=" +
                         std::to_string(k) + " centroids");
  }
  if (max_iter == 0) throw ParameterError("kmeans_fit: max_iter must be positive");

  std::mt19937_64 rng(seed);
  Tensor<double> centroids({k, dim});
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto set_centroid = [&](std::size_t c, std::size_t point) {
    auto src = features.row(point);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  };

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  set_centroid(0, pick(rng));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::squared_distance(features.row(i), centroids.row(c - 1)));
      total += d2[i];
    }
    if (!(total > 0)) {
      throw ParameterError("kmeans_fit: fewer than k=" + std::to_string(k) + " distinct points");
    }
    std::uniform_real_distribution<double> u(0.0, total);
    const double r = u(rng);
    double acc = 0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > r && d2[i] > 0) {
        chosen = i;
        break;
      }
    }
    while (d2[chosen] == 0) --chosen;  // r landed on the tail of rounding error
    set_centroid(c, chosen);
  }

  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.fit_seed = seed;

  std::vector<std::size_t> assign(n, k);
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = detail::nearest(features.row(i), centroids, &dist[i]);
      changed = changed || a != assign[i];
      assign[i] = a;
      inertia += dist[i];
    }
    cb.inertia_history.push_back(inertia);
    cb.inertia = inertia;
    cb.iterations_run = iter + 1;
    if (!changed) break;

    Tensor<double> sums({k, dim});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = features.row(i);
      auto s = sums.row(assign[i]);
      for (std::size_t j = 0; j < dim; ++j) s[j] += x[j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto s = sums.row(c);
      auto out = centroids.row(c);
      for (std::size_t j = 0; j < dim; ++j) out[j] = s[j] / double(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      set_centroid(c, far);
      dist[far] = 0;
    }
  }
  cb.centroids = std::move(centroids);
  return cb;
}

// Nearest-centroid index per frame.
inline std::vector<int> tokenize(const Tensor<double>& frames, const Codebook& codebook) {
  if (frames.rank() != 2 || frames.cols() != codebook.dim) {
    throw DimensionError("tokenize: frames " + to_string(frames.shape()) +
                         " vs codebook dim " + std::to_string(codebook.dim));
  }
  std::vector<int> out(frames.rows());
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    out[t] = static_cast<int>(detail::nearest(frames.row(t), codebook.centroids));
  }
  return out;
}

// Raw centroid indices [0, k) -> ND tokens [1, k] or D tokens [k+1, 2k].
// Index 0 stays reserved for the blank.
inline std::vector<int> reindex_tokens(std::span<const int> raw, Label label, std::size_t k) {
  const int shift = label == Label::kDepressed ? static_cast<int>(k) + 1 : 1;
  std::vector<int> out;
  out.reserve(raw.size());
  for (int r : raw) {
    if (r < 0 || static_cast<std::size_t>(r) >= k) {
      throw DataError("raw token " + std::to_string(r) + " outside [0, " + std::to_string(k) +
                      ")");
    }
    out.push_back(r + shift);
  }
  return out;
}

inline std::vector<int> collapse(std::span<const int> tokens) {
  std::vector<int> out;
  for (int t : tokens)
    if (out.empty() || out.back() != t) out.push_back(t);
  return out;
}

// tokenize -> reindex -> collapse for one segment. Returns nullopt when the
// collapsed target cannot be aligned to `input_length` frames.
inline std::optional<TokenSequence> build_targets(const Tensor<double>& frames,
                                                  const Codebook& codebook, Label label,
                                                  std::size_t input_length) {
  std::vector<int> tokens = collapse(reindex_tokens(tokenize(frames, codebook), label,
                                                    codebook.k));
  if (tokens.size() > input_length) return std::nullopt;
  return TokenSequence::make(std::move(tokens), input_length);
}

// Binary codebook: "HRNC", u32 version, u32 k, u32 dim, k*dim f64, all LE.
inline constexpr std::uint32_t kCodebookVersion = 1;

inline binio::Writer encode_codebook(const Codebook& cb) {
  binio::Writer w;
  w.bytes("HRNC");
  w.u32(kCodebookVersion);
  w.u32(static_cast<std::uint32_t>(cb.k));
  w.u32(static_cast<std::uint32_t>(cb.dim));
  for (double v : cb.centroids.values()) w.f64(v);
  return w;
}

inline void write_codebook(const std::filesystem::path& path, const Codebook& cb) {
  encode_codebook(cb).save(path);
}

inline Codebook read_codebook(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("HRNC");
  const std::uint32_t version = r.u32("version");
  if (version != kCodebookVersion) r.fail("unsupported codebook version " + std::to_string(version));
  Codebook cb;
  cb.k = r.u32("k");
  cb.dim = r.u32("dim");
  if (cb.k < 2 || cb.dim == 0) r.fail("invalid codebook extents");
  r.require_payload(cb.k * cb.dim, 8, "centroid payload");
  std::vector<double> values(cb.k * cb.dim);
  for (double& v : values) v = r.f64("centroid");
  r.expect_end();
  cb.centroids = Tensor<double>({cb.k, cb.dim}, std::move(values));
  return cb;
}

}  // namespace haren
