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

// Connectionist temporal classification loss over unnormalized frame scores.
//
// The target is extended with blanks (b l1 b l2 ... lL b, length 2L+1). The
// forward variable alpha(t, s) is the log probability of all prefixes of
// length t+1 ending in extended state s; beta(t, s) is the log probability of
// completing the sequence from (t, s), excluding the emission at t. Both are
// kept in log space so very small per-frame probabilities stay finite.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "haren/autodiff.hpp"
#include "haren/errors.hpp"
#include "haren/tensor.hpp"

namespace haren {

inline constexpr int kBlank = 0;

// Frames a target needs: one per token plus one blank between each repeat.
inline std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t need = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) need += target[i] == target[i - 1];
  return need;
}

namespace detail {

template <std::floating_point T>
T log_add(T a, T b) {
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace detail

template <std::floating_point T>
struct CtcResult {
  T loss = 0;          // -log P(target | frames)
  Tensor<T> gradient;  // d loss / d logits, same shape as the logits
};

// Loss and exact logit gradient for one sequence. Repeated adjacent target
// tokens are allowed and require a separating blank.
template <std::floating_point T>
CtcResult<T> ctc_forward_backward(const Tensor<T>& logits, std::span<const int> target) {
  if (logits.rank() != 2) {
    throw DimensionError("ctc: logits must be frames x vocab, got " + to_string(logits.shape()));
  }
  const std::size_t frames = logits.rows();
  const std::size_t vocab = logits.cols();
  if (vocab < 2) throw DimensionError("ctc: vocabulary needs a blank and a token");
  for (int tok : target) {
    if (tok <= kBlank || static_cast<std::size_t>(tok) >= vocab) {
      throw DataError("ctc: target token " + std::to_string(tok) + " outside [1, " +
                      std::to_string(vocab - 1) + "]");
    }
  }
  const std::size_t need = ctc_min_frames(target);
  if (frames < need) {
    throw InfeasibleError("ctc: " + std::to_string(frames) + " frames cannot align a target of " +
                          std::to_string(target.size()) + " tokens (needs " +
                          std::to_string(need) + ")");
  }

  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  const std::size_t states = 2 * target.size() + 1;
  auto label = [&](std::size_t s) { return s % 2 == 0 ? kBlank : target[s / 2]; };
  auto can_skip = [&](std::size_t s) {  // transition s-2 -> s
    return s >= 2 && label(s) != kBlank && label(s) != label(s - 2);
  };

  Tensor<T> log_probs(logits.shape());
  for (std::size_t t = 0; t < frames; ++t) {
    auto row = logits.row(t);
    T mx = row[0];
    for (T v : row) mx = std::max(mx, v);
    T z = 0;
    for (T v : row) z += std::exp(v - mx);
    const T lz = mx + std::log(z);
    for (std::size_t v = 0; v < vocab; ++v) log_probs(t, v) = row[v] - lz;
  }

  std::vector<T> alpha(frames * states, kNegInf);
  std::vector<T> beta(frames * states, kNegInf);
  auto A = [&](std::size_t t, std::size_t s) -> T& { return alpha[t * states + s]; };
  auto B = [&](std::size_t t, std::size_t s) -> T& { return beta[t * states + s]; };

  A(0, 0) = log_probs(0, label(0));
  if (states > 1) A(0, 1) = log_probs(0, label(1));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      T acc = A(t - 1, s);
      if (s >= 1) acc = detail::log_add(acc, A(t - 1, s - 1));
      if (can_skip(s)) acc = detail::log_add(acc, A(t - 1, s - 2));
      if (acc != kNegInf) A(t, s) = acc + log_probs(t, label(s));
    }
  }

  B(frames - 1, states - 1) = 0;
  if (states > 1) B(frames - 1, states - 2) = 0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      T acc = B(t + 1, s) + log_probs(t + 1, label(s));
      if (s + 1 < states)
        acc = detail::log_add(acc, B(t + 1, s + 1) + log_probs(t + 1, label(s + 1)));
      if (s + 2 < states && can_skip(s + 2))
        acc = detail::log_add(acc, B(t + 1, s + 2) + log_probs(t + 1, label(s + 2)));
      B(t, s) = acc;
    }
  }

  T log_total = A(frames - 1, states - 1);
  if (states > 1) log_total = detail::log_add(log_total, A(frames - 1, states - 2));
  if (!std::isfinite(log_total)) {
    throw NumericError("ctc: total path probability underflowed to zero");
  }

  CtcResult<T> out{-log_total, Tensor<T>(logits.shape())};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < vocab; ++v) out.gradient(t, v) = std::exp(log_probs(t, v));
    for (std::size_t s = 0; s < states; ++s) {
      const T a = A(t, s), b = B(t, s);
      if (a == kNegInf || b == kNegInf) continue;
      out.gradient(t, static_cast<std::size_t>(label(s))) -= std::exp(a + b - log_total);
    }
  }
  return out;
}

// Graph op: scalar CTC loss of `logits` (frames x vocab) against `target`.
template <std::floating_point T>
Var ctc_loss(Graph<T>& g, Var logits, std::span<const int> target) {
  CtcResult<T> r = ctc_forward_backward(g.value(logits), target);
  return g.record(Tensor<T>::scalar(r.loss), {logits},
                  [logits, grad = std::move(r.gradient)](Graph<T>& g, const Tensor<T>& d) {
                    if (auto* dl = g.grad_slot(logits))
                      for (std::size_t i = 0; i < grad.size(); ++i) (*dl)[i] += d[0] * grad[i];
                  });
}

}  // namespace haren
