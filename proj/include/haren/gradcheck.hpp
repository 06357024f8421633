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

// Central finite-difference checks of the tape's gradients, in double
// precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "haren/autodiff.hpp"
#include "haren/ctc.hpp"
#include "haren/model.hpp"
#include "haren/objective.hpp"
#include "haren/tensor.hpp"

namespace haren {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // near-zero components from dividing rounding noise by itself.
  double floor = 1e-6;
};

struct GradCheckInput {
  std::string name;
  std::string group;
  Tensor<double> value;
};

struct GradCheckRow {
  std::string group;
  std::size_t checked = 0;
  double max_rel_err = 0;
  std::string worst;  // "<tensor>[<flat index>]"
  bool pass = true;
};

using LossBuilder = std::function<Var(Graph<double>&, std::span<const Var>)>;

namespace detail {

inline double evaluate_loss(const LossBuilder& build, std::span<const GradCheckInput> inputs) {
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& in : inputs) vars.push_back(g.constant(in.value));
  const Var loss = build(g, vars);
  return g.value(loss)[0];
}

}  // namespace detail

// Compares reverse-mode gradients against central differences for every
// element of every input. Rows are grouped by GradCheckInput::group in
// first-appearance order.
inline std::vector<GradCheckRow> check_gradients(std::vector<GradCheckInput> inputs,
                                                 const LossBuilder& build,
                                                 const GradCheckOptions& opt = {}) {
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var> vars;
    for (const auto& in : inputs) vars.push_back(g.parameter(in.value));
    g.backward(build(g, vars));
    for (Var v : vars) analytic.push_back(g.grad(v));
  }

  std::vector<GradCheckRow> rows;
  auto row_for = [&](const std::string& group) -> GradCheckRow& {
    for (auto& r : rows)
      if (r.group == group) return r;
    GradCheckRow fresh;
    fresh.group = group;
    rows.push_back(std::move(fresh));
    return rows.back();
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    GradCheckRow& row = row_for(inputs[i].group);
    auto values = inputs[i].value.values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + opt.epsilon;
      const double up = detail::evaluate_loss(build, inputs);
      values[j] = saved - opt.epsilon;
      const double down = detail::evaluate_loss(build, inputs);
      values[j] = saved;
      const double numeric = (up - down) / (2 * opt.epsilon);
      const double a = analytic[i][j];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
      if (std::isnan(rel)) rel = INFINITY;
      ++row.checked;
      if (row.worst.empty() || rel > row.max_rel_err) {
        row.max_rel_err = rel;
        row.worst = inputs[i].name + "[" + std::to_string(j) + "]";
      }
    }
  }
  for (auto& r : rows) r.pass = r.max_rel_err <= opt.tolerance;
  return rows;
}

// Toy configuration used by the CLI and the acceptance suite.
inline ModelConfig gradcheck_model_config() {
  ModelConfig cfg;
  cfg.layers = 3;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 12;
  cfg.centroids = 2;
  cfg.dropout = 0.3;
  return cfg;
}

// Every trainable group of the full model under focal + CTC loss, plus the
// CTC loss taken directly against its logits.
inline std::vector<GradCheckRow> gradcheck_model(std::uint64_t seed = 11, std::size_t frames = 6,
                                                 const GradCheckOptions& opt = {}) {
  const ModelConfig cfg = gradcheck_model_config();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  LayerStack<double> stack;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor<double> x({frames, cfg.dim});
    for (double& v : x.values()) v = normal(rng);
    stack.layers.push_back(std::move(x));
  }
  ModelParams<double> params = init_params<double>(cfg, seed + 1);
  // Move every tensor off its initial value so zero biases and unit gains
  // do not hide errors.
  for (auto& e : params.entries())
    for (double& v : e.tensor->values()) v += 0.1 * normal(rng);

  const std::vector<int> target = {1, 3, 2};
  const int label = 1;
  LossConfig loss_cfg;

  std::vector<GradCheckInput> inputs;
  for (const auto& e : params.entries()) {
    inputs.push_back({std::string(e.name), std::string(e.group), *e.tensor});
  }
  auto build = [&](Graph<double>& g, std::span<const Var> v) {
    const auto b = BoundParams<double>::from(v);
    const ForwardVars f = forward(g, stack, b, cfg, true, seed + 2);
    const int labels[] = {label};
    const Var focal = focal_loss(g, f.probability, labels, loss_cfg);
    return add(g, focal, ctc_loss(g, f.frame_logits, target));
  };
  auto rows = check_gradients(std::move(inputs), build, opt);

  Tensor<double> logits({frames, cfg.vocab()});
  for (double& v : logits.values()) v = normal(rng);
  auto ctc_rows = check_gradients(
      {{"logits", "ctc_logits", logits}},
      [&](Graph<double>& g, std::span<const Var> v) { return ctc_loss(g, v[0], target); }, opt);
  rows.insert(rows.end(), ctc_rows.begin(), ctc_rows.end());
  return rows;
}

}  // namespace haren
