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

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Graph owns every tensor produced during one forward pass. Operations are
// free functions that take the graph and Var handles, compute the output
// eagerly, and push an adjoint closure onto the tape. backward() replays the
// tape in reverse order. Nodes whose inputs carry no gradient record nothing,
// so inference through a graph with only constants costs a plain forward.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "haren/errors.hpp"
#include "haren/tensor.hpp"

namespace haren {

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

template <std::floating_point T>
class Graph {
 public:
  // Adjoint: given d(loss)/d(output), push contributions into input slots.
  using Adjoint = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false, {}); }

  // Leaf whose gradient is collected by backward().
  Var parameter(Tensor<T> value) { return push(std::move(value), true, {}); }

  // Records an operation. `adjoint` is dropped when no input needs a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Adjoint adjoint) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(adjoint));
  }

  Var record(Tensor<T> value, std::span<const Var> inputs, Adjoint adjoint) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_.at(v.id).needs_grad;
    return push(std::move(value), needs, needs ? std::move(adjoint) : Adjoint{});
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  // Gradient accumulator for `v`, allocated (zeroed) on first use. Returns
  // nullptr when `v` does not participate in differentiation.
  Tensor<T>* grad_slot(Var v) {
    Node& n = nodes_.at(v.id);
    if (!n.needs_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return &n.grad;
  }

  // Gradient after backward(); zeros for nodes the loss never touched.
  Tensor<T> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  void backward(Var loss) {
    const Tensor<T>& lv = value(loss);
    if (lv.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " +
                          to_string(lv.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor<T>();
    if (!nodes_[loss.id].needs_grad) return;
    *grad_slot(loss) = Tensor<T>::scalar(T(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.adjoint || n.grad.empty()) continue;
      // Adjoints only write into input slots, never into their own node.
      Tensor<T> g = std::move(n.grad);
      n.adjoint(*this, g);
      nodes_[i].grad = std::move(g);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Adjoint adjoint;
  };

  Var push(Tensor<T> value, bool needs, Adjoint adjoint) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), needs, std::move(adjoint)});
    return Var{nodes_.size() - 1};
  }

  // deque: references returned by value() survive later pushes.
  std::deque<Node> nodes_;
};

namespace detail {

template <std::floating_point T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got shape " +
                         to_string(t.shape()));
  }
}

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

// C = A·B for A: M×K, B: K×N.
template <std::floating_point T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  const Tensor<T>& B = g.value(b);
  detail::require_matrix(A, "matmul");
  detail::require_matrix(B, "matmul");
  const std::size_t M = A.rows(), K = A.cols(), N = B.cols();
  if (B.rows() != K) {
    throw DimensionError("matmul: shape " + to_string(A.shape()) + " times " +
                         to_string(B.shape()));
  }
  Tensor<T> C({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const T aik = A(i, k);
      if (aik == T(0)) continue;
      for (std::size_t j = 0; j < N; ++j) C(i, j) += aik * B(k, j);
    }
  }
  return g.record(std::move(C), {a, b}, [a, b, M, K, N](Graph<T>& g, const Tensor<T>& dC) {
    if (auto* dA = g.grad_slot(a)) {
      const Tensor<T>& B = g.value(b);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          T s = 0;
          for (std::size_t j = 0; j < N; ++j) s += dC(i, j) * B(k, j);
          (*dA)(i, k) += s;
        }
    }
    if (auto* dB = g.grad_slot(b)) {
      const Tensor<T>& A = g.value(a);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const T aik = A(i, k);
          for (std::size_t j = 0; j < N; ++j) (*dB)(k, j) += aik * dC(i, j);
        }
    }
  });
}

template <std::floating_point T>
Var transpose(Graph<T>& g, Var a) {
  const Tensor<T>& A = g.value(a);
  detail::require_matrix(A, "transpose");
  const std::size_t R = A.rows(), C = A.cols();
  Tensor<T> out({C, R});
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out(j, i) = A(i, j);
  return g.record(std::move(out), {a}, [a, R, C](Graph<T>& g, const Tensor<T>& d) {
    if (auto* da = g.grad_slot(a))
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) (*da)(i, j) += d(j, i);
  });
}

template <std::floating_point T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  A.require_same_shape(g.value(b), "add");
  Tensor<T> out = A;
  out += g.value(b);
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& d) {
    if (auto* da = g.grad_slot(a)) *da += d;
    if (auto* db = g.grad_slot(b)) *db += d;
  });
}

// x: R×C plus bias of C entries broadcast over rows.
template <std::floating_point T>
Var add_bias(Graph<T>& g, Var x, Var bias) {
  const Tensor<T>& X = g.value(x);
  const Tensor<T>& B = g.value(bias);
  detail::require_matrix(X, "add_bias");
  if (B.size() != X.cols()) {
    throw DimensionError("add_bias: bias " + to_string(B.shape()) + " for input " +
                         to_string(X.shape()));
  }
  Tensor<T> out = X;
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c) out(r, c) += B[c];
  return g.record(std::move(out), {x, bias}, [x, bias](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x)) *dx += d;
    if (auto* db = g.grad_slot(bias))
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t c = 0; c < d.cols(); ++c) (*db)[c] += d(r, c);
  });
}

template <std::floating_point T>
Var scale(Graph<T>& g, Var x, T factor) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v *= factor;
  return g.record(std::move(out), {x}, [x, factor](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (std::size_t i = 0; i < d.size(); ++i) (*dx)[i] += factor * d[i];
  });
}

// Elementwise product.
template <std::floating_point T>
Var mul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  const Tensor<T>& B = g.value(b);
  A.require_same_shape(B, "mul");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& d) {
    if (auto* da = g.grad_slot(a)) {
      const Tensor<T>& B = g.value(b);
      for (std::size_t i = 0; i < d.size(); ++i) (*da)[i] += d[i] * B[i];
    }
    if (auto* db = g.grad_slot(b)) {
      const Tensor<T>& A = g.value(a);
      for (std::size_t i = 0; i < d.size(); ++i) (*db)[i] += d[i] * A[i];
    }
  });
}

template <std::floating_point T>
Var sum(Graph<T>& g, Var x) {
  T s = 0;
  for (T v : g.value(x).values()) s += v;
  return g.record(Tensor<T>::scalar(s), {x}, [x](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (T& v : dx->values()) v += d[0];
  });
}

// Sum of a list of scalars, in list order.
template <std::floating_point T>
Var add_n(Graph<T>& g, std::span<const Var> terms) {
  if (terms.empty()) throw ContractError("add_n: no terms");
  T s = 0;
  for (Var v : terms) {
    if (g.value(v).size() != 1) throw DimensionError("add_n expects scalars");
    s += g.value(v)[0];
  }
  std::vector<Var> ids(terms.begin(), terms.end());
  return g.record(Tensor<T>::scalar(s), terms, [ids](Graph<T>& g, const Tensor<T>& d) {
    for (Var v : ids)
      if (auto* dv = g.grad_slot(v)) (*dv)[0] += d[0];
  });
}

// Packs scalars into a vector, in list order.
template <std::floating_point T>
Var stack_scalars(Graph<T>& g, std::span<const Var> scalars) {
  if (scalars.empty()) throw ContractError("stack_scalars: no inputs");
  Tensor<T> out({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (g.value(scalars[i]).size() != 1) throw DimensionError("stack_scalars expects scalars");
    out[i] = g.value(scalars[i])[0];
  }
  std::vector<Var> ids(scalars.begin(), scalars.end());
  return g.record(std::move(out), scalars, [ids](Graph<T>& g, const Tensor<T>& d) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (auto* dv = g.grad_slot(ids[i])) (*dv)[0] += d[i];
  });
}

// Softmax along the last axis of a matrix; each row is shifted by its max.
template <std::floating_point T>
Tensor<T> row_softmax_values(const Tensor<T>& X) {
  Tensor<T> out(X.shape());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto in = X.row(r);
    auto o = out.row(r);
    T mx = in[0];
    for (T v : in) mx = std::max(mx, v);
    T z = 0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (o[c] = std::exp(in[c] - mx));
    for (T& v : o) v /= z;
  }
  return out;
}

template <std::floating_point T>
Var row_softmax(Graph<T>& g, Var x) {
  detail::require_matrix(g.value(x), "row_softmax");
  Tensor<T> out = row_softmax_values(g.value(x));
  const Var y{g.size()};
  return g.record(std::move(out), {x}, [x, y](Graph<T>& g, const Tensor<T>& d) {
    auto* dx = g.grad_slot(x);
    if (!dx) return;
    const Tensor<T>& Y = g.value(y);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < Y.cols(); ++c) dot += d(r, c) * Y(r, c);
      for (std::size_t c = 0; c < Y.cols(); ++c) (*dx)(r, c) += Y(r, c) * (d(r, c) - dot);
    }
  });
}

// Per-row normalization to zero mean / unit variance, then gain and bias.
template <std::floating_point T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, T eps = T(1e-5)) {
  const Tensor<T>& X = g.value(x);
  detail::require_matrix(X, "layer_norm");
  const std::size_t R = X.rows(), C = X.cols();
  if (C < 2) throw DimensionError("layer_norm needs at least 2 features");
  if (g.value(gain).size() != C || g.value(bias).size() != C) {
    throw DimensionError("layer_norm: gain/bias size differs from width " +
                         std::to_string(C));
  }
  Tensor<T> xhat({R, C});
  std::vector<T> inv_std(R);
  for (std::size_t r = 0; r < R; ++r) {
    T mean = 0;
    for (T v : X.row(r)) mean += v;
    mean /= T(C);
    T var = 0;
    for (T v : X.row(r)) var += (v - mean) * (v - mean);
    var /= T(C);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) xhat(r, c) = (X(r, c) - mean) * inv_std[r];
  }
  const Tensor<T>& G = g.value(gain);
  const Tensor<T>& B = g.value(bias);
  Tensor<T> out({R, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out(r, c) = xhat(r, c) * G[c] + B[c];
  return g.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), R, C](
          Graph<T>& g, const Tensor<T>& d) {
        if (auto* dg = g.grad_slot(gain))
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) (*dg)[c] += d(r, c) * xhat(r, c);
        if (auto* db = g.grad_slot(bias))
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) (*db)[c] += d(r, c);
        if (auto* dx = g.grad_slot(x)) {
          const Tensor<T>& G = g.value(gain);
          for (std::size_t r = 0; r < R; ++r) {
            T mean_dy = 0, mean_dy_xhat = 0;
            for (std::size_t c = 0; c < C; ++c) {
              const T dy = d(r, c) * G[c];
              mean_dy += dy;
              mean_dy_xhat += dy * xhat(r, c);
            }
            mean_dy /= T(C);
            mean_dy_xhat /= T(C);
            for (std::size_t c = 0; c < C; ++c) {
              const T dy = d(r, c) * G[c];
              (*dx)(r, c) += inv_std[r] * (dy - mean_dy - xhat(r, c) * mean_dy_xhat);
            }
          }
        }
      });
}

template <std::floating_point T>
Var sigmoid(Graph<T>& g, Var x) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v = detail::sigmoid(v);
  const Var y{g.size()};
  return g.record(std::move(out), {x}, [x, y](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x)) {
      const Tensor<T>& Y = g.value(y);
      for (std::size_t i = 0; i < d.size(); ++i) (*dx)[i] += d[i] * Y[i] * (T(1) - Y[i]);
    }
  });
}

// x·sigmoid(x).
template <std::floating_point T>
Var silu(Graph<T>& g, Var x) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v = v * detail::sigmoid(v);
  return g.record(std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x)) {
      const Tensor<T>& X = g.value(x);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const T s = detail::sigmoid(X[i]);
        (*dx)[i] += d[i] * (s + X[i] * s * (T(1) - s));
      }
    }
  });
}

// Inverted dropout. The mask is drawn from `seed` alone so a replayed forward
// pass (finite differences, reproducible runs) sees the same mask.
template <std::floating_point T>
Var dropout(Graph<T>& g, Var x, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const Tensor<T>& X = g.value(x);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale_kept = T(1.0 / (1.0 - rate));
  std::vector<T> mask(X.size());
  for (T& m : mask) m = keep(rng) ? scale_kept : T(0);
  Tensor<T> out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return g.record(std::move(out), {x},
                  [x, mask = std::move(mask)](Graph<T>& g, const Tensor<T>& d) {
                    if (auto* dx = g.grad_slot(x))
                      for (std::size_t i = 0; i < d.size(); ++i) (*dx)[i] += d[i] * mask[i];
                  });
}

// Mean over frames: T×d -> {d}.
template <std::floating_point T>
Var mean_pool_time(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  detail::require_matrix(X, "mean_pool_time");
  const std::size_t R = X.rows(), C = X.cols();
  Tensor<T> out({C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c] += X(r, c);
  for (T& v : out.values()) v /= T(R);
  return g.record(std::move(out), {x}, [x, R, C](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) (*dx)(r, c) += d[c] / T(R);
  });
}

// Non-overlapping average pooling over frames with window `stride`; the last
// window may be shorter. stride 1 returns `x` unchanged.
template <std::floating_point T>
Var pool_frames(Graph<T>& g, Var x, std::size_t stride) {
  if (stride == 0) throw ParameterError("pool_frames stride must be positive");
  if (stride == 1) return x;
  const Tensor<T>& X = g.value(x);
  detail::require_matrix(X, "pool_frames");
  const std::size_t R = X.rows(), C = X.cols();
  const std::size_t out_rows = (R + stride - 1) / stride;
  Tensor<T> out({out_rows, C});
  for (std::size_t o = 0; o < out_rows; ++o) {
    const std::size_t lo = o * stride, hi = std::min(R, lo + stride);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t c = 0; c < C; ++c) out(o, c) += X(r, c);
    for (std::size_t c = 0; c < C; ++c) out(o, c) /= T(hi - lo);
  }
  return g.record(std::move(out), {x}, [x, R, C, stride](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t o = r / stride;
        const std::size_t lo = o * stride, hi = std::min(R, lo + stride);
        for (std::size_t c = 0; c < C; ++c) (*dx)(r, c) += d(o, c) / T(hi - lo);
      }
  });
}

// Reinterpret extents without moving data.
template <std::floating_point T>
Var reshape(Graph<T>& g, Var x, Shape shape) {
  Tensor<T> out = g.value(x).reshaped(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (std::size_t i = 0; i < d.size(); ++i) (*dx)[i] += d[i];
  });
}

// Columns [begin, begin+count) of a matrix.
template <std::floating_point T>
Var slice_cols(Graph<T>& g, Var x, std::size_t begin, std::size_t count) {
  const Tensor<T>& X = g.value(x);
  detail::require_matrix(X, "slice_cols");
  if (begin + count > X.cols() || count == 0) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " +
                         to_string(X.shape()));
  }
  const std::size_t R = X.rows();
  Tensor<T> out({R, count});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = X(r, begin + c);
  return g.record(std::move(out), {x}, [x, begin, count, R](Graph<T>& g, const Tensor<T>& d) {
    if (auto* dx = g.grad_slot(x))
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < count; ++c) (*dx)(r, begin + c) += d(r, c);
  });
}

template <std::floating_point T>
Var concat_cols(Graph<T>& g, std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t R = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor<T>& P = g.value(p);
    detail::require_matrix(P, "concat_cols");
    if (P.rows() != R) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(P.cols());
    total += P.cols();
  }
  Tensor<T> out({R, total});
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<T>& P = g.value(parts[i]);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < widths[i]; ++c) out(r, off + c) = P(r, c);
    off += widths[i];
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [ids, widths, R](Graph<T>& g, const Tensor<T>& d) {
                    std::size_t off = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (auto* dp = g.grad_slot(ids[i]))
                        for (std::size_t r = 0; r < R; ++r)
                          for (std::size_t c = 0; c < widths[i]; ++c)
                            (*dp)(r, c) += d(r, off + c);
                      off += widths[i];
                    }
                  });
}

// Σ_l weights(l, column) · layers[l], all layers of equal shape.
template <std::floating_point T>
Var weighted_layer_sum(Graph<T>& g, Var weights, std::size_t column,
                       std::span<const Var> layers) {
  const Tensor<T>& W = g.value(weights);
  detail::require_matrix(W, "weighted_layer_sum");
  if (W.rows() != layers.size()) {
    throw DimensionError("weighted_layer_sum: " + std::to_string(W.rows()) +
                         " weight rows for " + std::to_string(layers.size()) + " layers");
  }
  if (column >= W.cols()) throw DimensionError("weighted_layer_sum: column out of range");
  const Shape shape = g.value(layers[0]).shape();
  Tensor<T> out(shape);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor<T>& L = g.value(layers[l]);
    if (L.shape() != shape) {
      throw DimensionError("weighted_layer_sum: layer " + std::to_string(l) + " has shape " +
                           to_string(L.shape()) + ", expected " + to_string(shape));
    }
    const T w = W(l, column);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * L[i];
  }
  std::vector<Var> all(layers.begin(), layers.end());
  all.push_back(weights);
  std::vector<Var> ids(layers.begin(), layers.end());
  return g.record(std::move(out), std::span<const Var>(all),
                  [weights, column, ids](Graph<T>& g, const Tensor<T>& d) {
                    if (auto* dw = g.grad_slot(weights))
                      for (std::size_t l = 0; l < ids.size(); ++l) {
                        const Tensor<T>& L = g.value(ids[l]);
                        T s = 0;
                        for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * L[i];
                        (*dw)(l, column) += s;
                      }
                    for (std::size_t l = 0; l < ids.size(); ++l)
                      if (auto* dl = g.grad_slot(ids[l])) {
                        const T w = g.value(weights)(l, column);
                        for (std::size_t i = 0; i < d.size(); ++i) (*dl)[i] += w * d[i];
                      }
                  });
}

}  // namespace haren
