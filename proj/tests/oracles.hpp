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

// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library's numerical code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace haren::oracle {

// Row-major frames x vocab scores -> per-frame probabilities.
inline std::vector<double> softmax_rows(std::span<const double> logits, std::size_t vocab) {
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r * vocab < logits.size(); ++r) {
    double z = 0;
    for (std::size_t v = 0; v < vocab; ++v) z += std::exp(logits[r * vocab + v]);
    for (std::size_t v = 0; v < vocab; ++v) p[r * vocab + v] = std::exp(logits[r * vocab + v]) / z;
  }
  return p;
}

// Merge repeats, then drop blanks (0).
inline std::vector<int> ctc_path_label(std::span<const int> path) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != 0) out.push_back(s);
    prev = s;
  }
  return out;
}

// Sum over all vocab^frames paths whose reduction equals `target`.
inline double ctc_probability(std::span<const double> logits, std::size_t frames,
                              std::size_t vocab, std::span<const int> target) {
  const auto p = softmax_rows(logits, vocab);
  std::vector<int> path(frames, 0);
  const std::vector<int> want(target.begin(), target.end());
  double total = 0;
  for (;;) {
    if (ctc_path_label(path) == want) {
      double prod = 1;
      for (std::size_t t = 0; t < frames; ++t) prod *= p[t * vocab + static_cast<std::size_t>(path[t])];
      total += prod;
    }
    std::size_t t = 0;
    while (t < frames && ++path[t] == static_cast<int>(vocab)) path[t++] = 0;
    if (t == frames) break;
  }
  return total;
}

// Central difference of f at x along every coordinate.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double eps = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f(x);
    x[i] = saved - eps;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

// L2-regularized logistic regression by plain gradient descent. Returns
// weights with the bias last.
inline std::vector<double> fit_logistic(const std::vector<std::vector<double>>& xs,
                                        const std::vector<int>& ys, double l2 = 1e-3,
                                        int iters = 2000, double lr = 0.1) {
  const std::size_t d = xs.front().size();
  std::vector<double> w(d + 1, 0.0);
  for (int it = 0; it < iters; ++it) {
    std::vector<double> grad(d + 1, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * xs[i][j];
      const double err = 1.0 / (1.0 + std::exp(-z)) - ys[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * xs[i][j];
      grad[d] += err;
    }
    for (std::size_t j = 0; j <= d; ++j) {
      const double reg = j < d ? l2 * w[j] : 0.0;
      w[j] -= lr * (grad[j] / double(xs.size()) + reg);
    }
  }
  return w;
}

inline int logistic_predict(const std::vector<double>& w, const std::vector<double>& x) {
  double z = w.back();
  for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
  return z >= 0 ? 1 : 0;
}

}  // namespace haren::oracle
