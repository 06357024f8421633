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

#include "haren/ctc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "oracles.hpp"

namespace haren {
namespace {

Tensor<double> logits_from_probs(std::initializer_list<std::initializer_list<double>> rows) {
  auto t = Tensor<double>::matrix(rows);
  for (double& v : t.values()) v = std::log(v);
  return t;
}

TEST(Ctc, SingleFrameSingleToken) {
  const auto logits = logits_from_probs({{0.2, 0.7, 0.1}});
  const int target[] = {1};
  EXPECT_NEAR(ctc_forward_backward(logits, target).loss, -std::log(0.7), 1e-12);
  EXPECT_NEAR(ctc_forward_backward(logits, target).loss, 0.356675, 1e-6);
}

TEST(Ctc, TwoUniformFramesOneToken) {
  Tensor<double> logits({2, 3}, 0.0);
  const int target[] = {1};
  EXPECT_NEAR(ctc_forward_backward(logits, target).loss, std::log(3.0), 1e-12);
  EXPECT_NEAR(oracle::ctc_probability(logits.values(), 2, 3, target), 1.0 / 3.0, 1e-15);
}

TEST(Ctc, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t frames = 1 + rng() % 5;
    const std::size_t vocab = 2 + rng() % 3;
    const std::size_t len = 1 + rng() % 3;
    std::vector<int> target(len);
    for (int& t : target) t = 1 + int(rng() % (vocab - 1));
    if (ctc_min_frames(target) > frames) continue;
    Tensor<double> logits({frames, vocab});
    for (double& v : logits.values()) v = n(rng);
    const double expect = -std::log(oracle::ctc_probability(logits.values(), frames, vocab, target));
    const double got = ctc_forward_backward(logits, target).loss;
    EXPECT_LE(std::abs(got - expect) / std::abs(expect), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST(Ctc, BruteForceTotalsToOneAndInfeasibleIsZero) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  const std::size_t frames = 3, vocab = 3;
  Tensor<double> logits({frames, vocab});
  for (double& v : logits.values()) v = n(rng);
  // Every path reduces to exactly one label sequence of length <= frames.
  std::map<std::vector<int>, double> by_label;
  std::vector<int> path(frames, 0);
  const auto p = oracle::softmax_rows(logits.values(), vocab);
  for (int code = 0; code < 27; ++code) {
    int c = code;
    double prob = 1;
    for (std::size_t t = 0; t < frames; ++t) {
      path[t] = c % 3;
      c /= 3;
      prob *= p[t * vocab + std::size_t(path[t])];
    }
    by_label[oracle::ctc_path_label(path)] += prob;
  }
  double total = 0;
  for (const auto& [label, prob] : by_label) {
    total += prob;
    EXPECT_NEAR(oracle::ctc_probability(logits.values(), frames, vocab, label), prob, 1e-15);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const int too_long[] = {1, 2, 1, 2};
  EXPECT_EQ(oracle::ctc_probability(logits.values(), frames, vocab, too_long), 0.0);
  EXPECT_THROW(ctc_forward_backward(logits, too_long), InfeasibleError);
}

TEST(Ctc, RepeatsNeedSeparatingBlank) {
  const int rep[] = {1, 1};
  EXPECT_EQ(ctc_min_frames(rep), 3u);
  Tensor<double> two({2, 3}, 0.0), three({3, 3}, 0.0);
  EXPECT_THROW(ctc_forward_backward(two, rep), InfeasibleError);
  // Only path for T=3: (1, blank, 1).
  EXPECT_NEAR(ctc_forward_backward(three, rep).loss, 3 * std::log(3.0), 1e-12);
}

TEST(Ctc, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t frames = 6, vocab = 5;
    const std::vector<int> target = {1, 3, 3, 2};
    Tensor<double> logits({frames, vocab});
    for (double& v : logits.values()) v = n(rng);
    const auto analytic = ctc_forward_backward(logits, target).gradient;
    auto f = [&](std::span<const double> x) {
      return ctc_forward_backward(Tensor<double>(logits.shape(), {x.begin(), x.end()}), target).loss;
    };
    const auto numeric = oracle::numeric_gradient(
        f, {logits.values().begin(), logits.values().end()}, 1e-5);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double den = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LE(std::abs(analytic[i] - numeric[i]) / den, 1e-4);
    }
  }
}

TEST(Ctc, StableForTinyProbabilities) {
  // Per-frame target probability around 1e-300 would underflow a linear-space
  // recursion; log space keeps the loss finite.
  const std::size_t frames = 4, vocab = 3;
  Tensor<double> logits({frames, vocab}, 0.0);
  for (std::size_t t = 0; t < frames; ++t) logits(t, 0) = 690.0;
  const int target[] = {1, 2};
  const double loss = ctc_forward_backward(logits, target).loss;
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 1000);
}

TEST(Ctc, RejectsBadTargets) {
  Tensor<double> logits({3, 3});
  const int blank[] = {0};
  const int big[] = {3};
  EXPECT_THROW(ctc_forward_backward(logits, blank), DataError);
  EXPECT_THROW(ctc_forward_backward(logits, big), DataError);
  EXPECT_THROW(ctc_forward_backward(Tensor<double>({3}), std::span<const int>(big)), DimensionError);
}

TEST(Ctc, GraphOpScalesUpstreamGradient) {
  Graph<double> g;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Tensor<double> l0({4, 3});
  for (double& v : l0.values()) v = n(rng);
  const int target[] = {2, 1};
  const Var x = g.parameter(l0);
  g.backward(scale(g, ctc_loss(g, x, target), 2.5));
  const auto direct = ctc_forward_backward(l0, target).gradient;
  const auto got = g.grad(x);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], 2.5 * direct[i], 1e-12);
}

}  // namespace
}  // namespace haren
