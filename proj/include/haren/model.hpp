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

// The fusion network. Encoder layers are softly assigned to a shallow and a
// deep subspace by a row-softmaxed m x 2 logit matrix; the deep subspace then
// queries the shallow one through multi-head cross-attention, followed by a
// pre-norm bottleneck feed-forward block with a residual connection. Two heads
// read the fused sequence: a mean-pooled sigmoid classifier and a per-frame
// CTC projection.
//
// Matrices act on row vectors: a T x d sequence times a d x d' weight.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "haren/autodiff.hpp"
#include "haren/binio.hpp"
#include "haren/errors.hpp"
#include "haren/tensor.hpp"
#include "haren/tokens.hpp"

namespace haren {

enum class Variant {
  kFull,         // assignment + cross-attention fusion
  kSingleLayer,  // one designated encoder layer straight into the FFN block
};

inline constexpr std::size_t kShallow = 0;
inline constexpr std::size_t kDeep = 1;

struct ModelConfig {
  std::size_t layers = 4;     // m
  std::size_t dim = 32;       // d
  std::size_t heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t centroids = 5;  // k; CTC vocabulary is 2k+1
  double decay_alpha = 0.95;
  double dropout = 0.3;
  std::size_t ctc_pool_stride = 1;
  Variant variant = Variant::kFull;
  std::size_t baseline_layer = 0;  // 0-based, used by kSingleLayer

  std::size_t vocab() const { return ctc_vocab_size(centroids); }
  std::size_t head_dim() const { return dim / heads; }

  void validate() const {
    if (layers < 2) throw ConfigError("model needs at least 2 encoder layers");
    if (dim < 2) throw ConfigError("model dim must be at least 2");
    if (heads == 0 || dim % heads != 0) {
      throw ConfigError("dim " + std::to_string(dim) + " not divisible by " +
                        std::to_string(heads) + " heads");
    }
    if (ffn_dim == 0) throw ConfigError("ffn_dim must be positive");
    if (centroids < 1) throw ConfigError("CTC vocabulary needs at least one token per class");
    if (!(decay_alpha > 0 && decay_alpha < 1)) throw ParameterError("decay_alpha must lie in (0, 1)");
    if (!(dropout >= 0 && dropout < 1)) throw ParameterError("dropout must lie in [0, 1)");
    if (ctc_pool_stride == 0) throw ConfigError("ctc_pool_stride must be positive");
    if (variant == Variant::kSingleLayer && baseline_layer >= layers) {
      throw ConfigError("baseline_layer " + std::to_string(baseline_layer) + " >= layers " +
                        std::to_string(layers));
    }
  }
};

// One segment: m encoder layers of T x d plus the tokenization features
// (T x d_tok) used to derive CTC targets.
template <std::floating_point T>
struct LayerStack {
  std::vector<Tensor<T>> layers;
  Tensor<T> token_features;
  double frame_rate = 50.0;
  std::string segment_id;
  std::string subject_id;

  std::size_t frames() const { return layers.empty() ? 0 : layers[0].rows(); }
  std::size_t dim() const { return layers.empty() ? 0 : layers[0].cols(); }

  void validate() const {
    if (layers.size() < 2) throw DimensionError("layer stack needs at least 2 layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].rank() != 2 || layers[l].shape() != layers[0].shape()) {
        throw DimensionError("layer " + std::to_string(l) + " has shape " +
                             to_string(layers[l].shape()) + ", expected " +
                             to_string(layers[0].shape()));
      }
    }
    if (!token_features.empty() &&
        (token_features.rank() != 2 || token_features.rows() != frames())) {
      throw DimensionError("token features " + to_string(token_features.shape()) + " for " +
                           std::to_string(frames()) + " frames");
    }
  }

  template <std::floating_point U>
  LayerStack<U> cast() const {
    LayerStack<U> out;
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    if (!token_features.empty()) out.token_features = token_features.template cast<U>();
    out.frame_rate = frame_rate;
    out.segment_id = segment_id;
    out.subject_id = subject_id;
    return out;
  }
};

// Column 0 (shallow) holds log(p/(1-p)) with p = alpha^l, l = 1..m; column 1
// (deep) its negation.
template <std::floating_point T>
Tensor<T> init_assignment_logits(std::size_t m, double alpha) {
  if (!(alpha > 0 && alpha < 1)) {
    throw ParameterError("decay alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  if (m < 2) throw ParameterError("assignment needs at least 2 layers");
  Tensor<T> g({m, 2});
  for (std::size_t l = 1; l <= m; ++l) {
    const double p = std::pow(alpha, double(l));
    const double logit = std::log(p / (1.0 - p));
    g(l - 1, kShallow) = T(logit);
    g(l - 1, kDeep) = T(-logit);
  }
  return g;
}

template <std::floating_point T>
Tensor<T> assignment_probs(const Tensor<T>& logits) {
  return row_softmax_values(logits);
}

// U(k) = Σ_l P(l, k) · layer_l, returned as {shallow, deep}.
template <std::floating_point T>
std::pair<Tensor<T>, Tensor<T>> cluster_subspaces(const LayerStack<T>& stack,
                                                  const Tensor<T>& probs) {
  Graph<T> g;
  std::vector<Var> layers;
  for (const auto& l : stack.layers) layers.push_back(g.constant(l));
  const Var p = g.constant(probs);
  const Var shallow = weighted_layer_sum(g, p, kShallow, std::span<const Var>(layers));
  const Var deep = weighted_layer_sum(g, p, kDeep, std::span<const Var>(layers));
  return {g.value(shallow), g.value(deep)};
}

template <std::floating_point T>
struct ModelParams {
  Tensor<T> assignment;  // m x 2 logits
  Tensor<T> w_q, w_k, w_v, w_o;
  Tensor<T> ln_gain, ln_bias;
  Tensor<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor<T> cls_w, cls_b;
  Tensor<T> ctc_w, ctc_b;

  template <class Ptr>
  struct BasicEntry {
    std::string_view name;
    std::string_view group;
    Ptr tensor;
  };
  using Entry = BasicEntry<Tensor<T>*>;
  using ConstEntry = BasicEntry<const Tensor<T>*>;

  std::vector<Entry> entries() { return collect<Entry>(*this); }
  std::vector<ConstEntry> entries() const { return collect<ConstEntry>(*this); }

  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& e : entries()) out.push_back(e.tensor);
    return out;
  }

  template <std::floating_point U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    const auto src = entries();
    auto dst = out.entries();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
    return out;
  }

 private:
  template <class E, class Self>
  static std::vector<E> collect(Self& s) {
    return {{"assignment", "assignment", &s.assignment},
            {"w_q", "attention", &s.w_q},
            {"w_k", "attention", &s.w_k},
            {"w_v", "attention", &s.w_v},
            {"w_o", "attention", &s.w_o},
            {"ln_gain", "ffn", &s.ln_gain},
            {"ln_bias", "ffn", &s.ln_bias},
            {"ffn_w1", "ffn", &s.ffn_w1},
            {"ffn_b1", "ffn", &s.ffn_b1},
            {"ffn_w2", "ffn", &s.ffn_w2},
            {"ffn_b2", "ffn", &s.ffn_b2},
            {"cls_w", "cls_head", &s.cls_w},
            {"cls_b", "cls_head", &s.cls_b},
            {"ctc_w", "ctc_head", &s.ctc_w},
            {"ctc_b", "ctc_head", &s.ctc_b}};
  }
};

namespace detail {

template <std::floating_point T>
Tensor<T> xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor<T> w({fan_in, fan_out});
  for (T& v : w.values()) v = T(u(rng));
  return w;
}

}  // namespace detail

template <std::floating_point T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.dim;
  ModelParams<T> p;
  p.assignment = init_assignment_logits<T>(cfg.layers, cfg.decay_alpha);
  p.w_q = detail::xavier<T>(d, d, rng);
  p.w_k = detail::xavier<T>(d, d, rng);
  p.w_v = detail::xavier<T>(d, d, rng);
  p.w_o = detail::xavier<T>(d, d, rng);
  p.ln_gain = Tensor<T>({d}, T(1));
  p.ln_bias = Tensor<T>({d});
  p.ffn_w1 = detail::xavier<T>(d, cfg.ffn_dim, rng);
  p.ffn_b1 = Tensor<T>({cfg.ffn_dim});
  p.ffn_w2 = detail::xavier<T>(cfg.ffn_dim, d, rng);
  p.ffn_b2 = Tensor<T>({d});
  p.cls_w = detail::xavier<T>(d, 1, rng);
  p.cls_b = Tensor<T>({1});
  p.ctc_w = detail::xavier<T>(d, cfg.vocab(), rng);
  p.ctc_b = Tensor<T>({cfg.vocab()});
  return p;
}

// Graph handles for every parameter, in ModelParams::entries() order.
template <std::floating_point T>
struct BoundParams {
  Var assignment, w_q, w_k, w_v, w_o, ln_gain, ln_bias, ffn_w1, ffn_b1, ffn_w2, ffn_b2, cls_w,
      cls_b, ctc_w, ctc_b;

  // Inverse of all().
  static BoundParams from(std::span<const Var> v) {
    if (v.size() != 15) throw ContractError("BoundParams::from expects 15 handles");
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], v[13], v[14]};
  }

  std::vector<Var> all() const {
    return {assignment, w_q,    w_k,    w_v,    w_o,   ln_gain, ln_bias, ffn_w1,
            ffn_b1,     ffn_w2, ffn_b2, cls_w,  cls_b, ctc_w,   ctc_b};
  }
};

// Places the parameters on the tape, as trainable leaves or as constants.
template <std::floating_point T>
BoundParams<T> bind(Graph<T>& g, const ModelParams<T>& p, bool trainable) {
  auto leaf = [&](const Tensor<T>& t) { return trainable ? g.parameter(t) : g.constant(t); };
  BoundParams<T> b;
  b.assignment = leaf(p.assignment);
  b.w_q = leaf(p.w_q);
  b.w_k = leaf(p.w_k);
  b.w_v = leaf(p.w_v);
  b.w_o = leaf(p.w_o);
  b.ln_gain = leaf(p.ln_gain);
  b.ln_bias = leaf(p.ln_bias);
  b.ffn_w1 = leaf(p.ffn_w1);
  b.ffn_b1 = leaf(p.ffn_b1);
  b.ffn_w2 = leaf(p.ffn_w2);
  b.ffn_b2 = leaf(p.ffn_b2);
  b.cls_w = leaf(p.cls_w);
  b.cls_b = leaf(p.cls_b);
  b.ctc_w = leaf(p.ctc_w);
  b.ctc_b = leaf(p.ctc_b);
  return b;
}

// layer_norm -> linear(d, d_ff) -> silu -> dropout -> linear(d_ff, d).
template <std::floating_point T>
Var ffn_block(Graph<T>& g, Var x, const BoundParams<T>& b, const ModelConfig& cfg,
              bool training, std::uint64_t seed) {
  Var h = layer_norm(g, x, b.ln_gain, b.ln_bias);
  h = add_bias(g, matmul(g, h, b.ffn_w1), b.ffn_b1);
  h = silu(g, h);
  h = dropout(g, h, cfg.dropout, training, seed);
  return add_bias(g, matmul(g, h, b.ffn_w2), b.ffn_b2);
}

// Multi-head cross-attention: deep frames query shallow frames. Returns the
// output-projected attention (before the FFN block). Attention matrices are
// appended to `weights` when given.
template <std::floating_point T>
Var cross_attention(Graph<T>& g, Var u_deep, Var u_shallow, const BoundParams<T>& b,
                    const ModelConfig& cfg, std::vector<Tensor<T>>* weights = nullptr) {
  const Tensor<T>& deep = g.value(u_deep);
  const Tensor<T>& shallow = g.value(u_shallow);
  if (deep.shape() != shallow.shape() || deep.rank() != 2) {
    throw DimensionError("cross attention: deep " + to_string(deep.shape()) + " vs shallow " +
                         to_string(shallow.shape()));
  }
  if (cfg.heads == 0 || deep.cols() % cfg.heads != 0) {
    throw ConfigError("width " + std::to_string(deep.cols()) + " not divisible by " +
                      std::to_string(cfg.heads) + " heads");
  }
  const std::size_t dh = deep.cols() / cfg.heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  const Var q = matmul(g, u_deep, b.w_q);
  const Var k = matmul(g, u_shallow, b.w_k);
  const Var v = matmul(g, u_shallow, b.w_v);
  std::vector<Var> heads;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Var qh = slice_cols(g, q, h * dh, dh);
    const Var kh = slice_cols(g, k, h * dh, dh);
    const Var vh = slice_cols(g, v, h * dh, dh);
    const Var scores = scale(g, matmul(g, qh, transpose(g, kh)), inv_sqrt);
    const Var attn = row_softmax(g, scores);
    if (weights) weights->push_back(g.value(attn));
    heads.push_back(matmul(g, attn, vh));
  }
  return matmul(g, concat_cols(g, std::span<const Var>(heads)), b.w_o);
}

// Attention followed by the residual FFN block: F = A + FFN(A).
template <std::floating_point T>
Var cross_modal_fuse(Graph<T>& g, Var u_deep, Var u_shallow, const BoundParams<T>& b,
                     const ModelConfig& cfg, bool training, std::uint64_t seed,
                     std::vector<Tensor<T>>* weights = nullptr) {
  const Var attn = cross_attention(g, u_deep, u_shallow, b, cfg, weights);
  return add(g, attn, ffn_block(g, attn, b, cfg, training, seed));
}

// sigmoid(linear(mean over frames)) as a {1} tensor.
template <std::floating_point T>
Var classify_head(Graph<T>& g, Var fused, const BoundParams<T>& b) {
  const std::size_t d = g.value(fused).cols();
  const Var pooled = reshape(g, mean_pool_time(g, fused), {1, d});
  const Var logit = add_bias(g, matmul(g, pooled, b.cls_w), b.cls_b);
  return reshape(g, sigmoid(g, logit), {1});
}

// Per-frame vocabulary scores, after optional non-overlapping time pooling.
template <std::floating_point T>
Var ctc_head(Graph<T>& g, Var fused, const BoundParams<T>& b, std::size_t pool_stride = 1) {
  const Var pooled = pool_frames(g, fused, pool_stride);
  return add_bias(g, matmul(g, pooled, b.ctc_w), b.ctc_b);
}

struct ForwardVars {
  Var probability;   // {1}
  Var frame_logits;  // frames' x vocab
  Var fused;         // T x d
  Var assignment;    // m x 2 probabilities (invalid for kSingleLayer)
};

template <std::floating_point T>
ForwardVars forward(Graph<T>& g, const LayerStack<T>& stack, const BoundParams<T>& b,
                    const ModelConfig& cfg, bool training, std::uint64_t seed,
                    std::vector<Tensor<T>>* attention = nullptr) {
  stack.validate();
  if (stack.layers.size() != cfg.layers) {
    throw DimensionError("stack has " + std::to_string(stack.layers.size()) +
                         " layers, model expects " + std::to_string(cfg.layers));
  }
  if (stack.dim() != cfg.dim) {
    throw DimensionError("stack dim " + std::to_string(stack.dim()) + ", model expects " +
                         std::to_string(cfg.dim));
  }
  ForwardVars out;
  if (cfg.variant == Variant::kSingleLayer) {
    const Var x = g.constant(stack.layers.at(cfg.baseline_layer));
    out.fused = add(g, x, ffn_block(g, x, b, cfg, training, seed));
  } else {
    std::vector<Var> layers;
    layers.reserve(stack.layers.size());
    for (const auto& l : stack.layers) layers.push_back(g.constant(l));
    out.assignment = row_softmax(g, b.assignment);
    const Var shallow = weighted_layer_sum(g, out.assignment, kShallow, std::span<const Var>(layers));
    const Var deep = weighted_layer_sum(g, out.assignment, kDeep, std::span<const Var>(layers));
    out.fused = cross_modal_fuse(g, deep, shallow, b, cfg, training, seed, attention);
  }
  out.probability = classify_head(g, out.fused, b);
  out.frame_logits = ctc_head(g, out.fused, b, cfg.ctc_pool_stride);
  return out;
}

template <std::floating_point T>
struct ModelOutput {
  T depression_probability = 0;
  Tensor<T> frame_logits;
  Tensor<T> fused_sequence;
};

// Inference-mode forward pass without a gradient tape.
template <std::floating_point T>
ModelOutput<T> predict(const LayerStack<T>& stack, const ModelParams<T>& params,
                       const ModelConfig& cfg) {
  Graph<T> g;
  const BoundParams<T> b = bind(g, params, false);
  const ForwardVars f = forward(g, stack, b, cfg, false, 0);
  return {g.value(f.probability)[0], g.value(f.frame_logits), g.value(f.fused)};
}

// Binary parameter file: "HRNP", u32 version, u32 count, then per tensor a
// u32 name length, the name, u32 rank, u32 extents, f64 values (all LE).
inline constexpr std::uint32_t kParamsVersion = 1;

template <std::floating_point T>
void write_params(const std::filesystem::path& path, const ModelParams<T>& params) {
  binio::Writer w;
  w.bytes("HRNP");
  w.u32(kParamsVersion);
  const auto entries = params.entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name);
    w.u32(static_cast<std::uint32_t>(e.tensor->rank()));
    for (std::size_t x : e.tensor->shape()) w.u32(static_cast<std::uint32_t>(x));
    for (T v : e.tensor->values()) w.f64(double(v));
  }
  w.save(path);
}

template <std::floating_point T>
ModelParams<T> read_params(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("HRNP");
  if (const auto v = r.u32("version"); v != kParamsVersion) {
    r.fail("unsupported parameter file version " + std::to_string(v));
  }
  ModelParams<T> p;
  auto entries = p.entries();
  const std::uint32_t count = r.u32("count");
  if (count != entries.size()) r.fail("expected " + std::to_string(entries.size()) + " tensors");
  for (auto& e : entries) {
    const std::string name = r.str(r.u32("name length"), "name");
    if (name != e.name) r.fail("expected tensor \"" + std::string(e.name) + "\", found \"" + name + "\"");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 4) r.fail("bad rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& x : shape) x = r.u32("extent");
    const std::size_t n = element_count(shape);
    r.require_payload(n, 8, "tensor payload");
    std::vector<T> values(n);
    for (T& v : values) v = T(r.f64("value"));
    *e.tensor = Tensor<T>(std::move(shape), std::move(values));
  }
  r.expect_end();
  return p;
}

}  // namespace haren
