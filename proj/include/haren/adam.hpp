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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "haren/errors.hpp"
#include "haren/tensor.hpp"

namespace haren {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with bias correction followed by decoupled weight decay
// (param -= lr * wd * param).
template <std::floating_point T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {
    if (!(options_.learning_rate > 0)) throw ParameterError("Adam learning rate must be > 0");
    if (!(options_.beta1 >= 0 && options_.beta1 < 1 && options_.beta2 >= 0 &&
          options_.beta2 < 1)) {
      throw ParameterError("Adam decay rates must lie in [0, 1)");
    }
  }

  // `params` and `grads` are matched by position and must keep the same
  // shapes across calls. A non-finite gradient aborts the step before any
  // parameter or moment is touched.
  void step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads) {
    if (params.size() != grads.size()) {
      throw DimensionError("Adam: " + std::to_string(params.size()) + " params, " +
                           std::to_string(grads.size()) + " grads");
    }
    if (first_.empty()) {
      for (const Tensor<T>* p : params) {
        first_.emplace_back(p->shape());
        second_.emplace_back(p->shape());
      }
    }
    if (first_.size() != params.size()) throw DimensionError("Adam: parameter count changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->require_same_shape(grads[i], "Adam param/grad");
      first_[i].require_same_shape(grads[i], "Adam moment/grad");
      for (std::size_t j = 0; j < grads[i].size(); ++j) {
        if (!std::isfinite(grads[i][j])) {
          throw NumericError("Adam: non-finite gradient in parameter #" + std::to_string(i) +
                             " at element " + std::to_string(j));
        }
      }
    }

    ++steps_;
    const double c1 = 1.0 - std::pow(options_.beta1, double(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, double(steps_));
    const T b1 = T(options_.beta1), b2 = T(options_.beta2);
    const T lr = T(options_.learning_rate);
    const T decay = T(options_.learning_rate * options_.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      Tensor<T>& m = first_[i];
      Tensor<T>& v = second_[i];
      const Tensor<T>& g = grads[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const T m_hat = m[j] / T(c1);
        const T v_hat = v[j] / T(c2);
        p[j] -= lr * m_hat / (std::sqrt(v_hat) + T(options_.epsilon));
        p[j] -= decay * p[j];
      }
    }
  }

  std::uint64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Tensor<T>>& first_moments() const { return first_; }
  const std::vector<Tensor<T>>& second_moments() const { return second_; }

 private:
  AdamOptions options_;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace haren
