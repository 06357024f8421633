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

#include "haren/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace haren {
namespace {

TEST(Aggregate, Examples) {
  const double a[] = {0.9, 0.2, 0.7};
  EXPECT_NEAR(aggregate_subject(a).probability, 0.6, 1e-15);
  EXPECT_EQ(aggregate_subject(a).predicted, 1);
  const double tie[] = {0.5, 0.5};
  EXPECT_EQ(aggregate_subject(tie).predicted, 1);
  const double one[] = {0.3};
  EXPECT_EQ(aggregate_subject(one).probability, 0.3);
  EXPECT_EQ(aggregate_subject(one).predicted, 0);
  EXPECT_THROW(aggregate_subject({}), ContractError);
}

TEST(Aggregate, PermutationInvariant) {
  std::vector<double> p = {0.125, 0.5, 0.875, 0.25, 0.75};
  const auto base = aggregate_subject(p);
  std::sort(p.begin(), p.end());
  do {
    EXPECT_EQ(aggregate_subject(p).probability, base.probability);
  } while (std::next_permutation(p.begin(), p.end()));
}

TEST(Metrics, HandDerivedCase) {
  const int labels[] = {1, 1, 0, 0};
  const int preds[] = {1, 0, 0, 0};
  const Metrics m = compute_metrics(preds, labels);
  EXPECT_NEAR(m.f1[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.f1[0], 0.8, 1e-12);
  EXPECT_NEAR(m.macro_f1, 0.7333333333333333, 1e-9);
  EXPECT_NEAR(m.precision[1], 1.0, 1e-12);
  EXPECT_NEAR(m.recall[1], 0.5, 1e-12);
  EXPECT_EQ(m.confusion.tp, 1u);
  EXPECT_EQ(m.confusion.fn, 1u);
  EXPECT_EQ(m.confusion.tn, 2u);
}

TEST(Metrics, PerfectAndDegenerate) {
  const int labels[] = {1, 0, 1, 0};
  const Metrics perfect = compute_metrics(labels, labels);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.macro_precision, 1.0);
  EXPECT_EQ(perfect.macro_recall, 1.0);
  const int ones[] = {1, 1, 1, 1};
  const Metrics m = compute_metrics(ones, labels);
  EXPECT_EQ(m.macro_f1, 1.0 / 3.0);
  EXPECT_EQ(m.precision[0], 0.0);
}

TEST(Metrics, SymmetricUnderClassSwap) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> y(12), p(12), ys(12), ps(12);
    for (int i = 0; i < 12; ++i) {
      y[i] = int(rng() % 2);
      p[i] = int(rng() % 2);
      ys[i] = 1 - y[i];
      ps[i] = 1 - p[i];
    }
    EXPECT_NEAR(compute_metrics(p, y).macro_f1, compute_metrics(ps, ys).macro_f1, 1e-15);
  }
}

TEST(Metrics, Errors) {
  const int two[] = {1, 0};
  const int one[] = {1};
  const int bad[] = {1, 3};
  EXPECT_THROW(compute_metrics(two, one), ContractError);
  EXPECT_THROW(compute_metrics(bad, two), DataError);
}

TEST(MeanSd, MatchesTwoPassOracle) {
  const double xs[] = {0.8, 0.6, 0.9, 0.7, 1.0};
  double mean = 0;
  for (double x : xs) mean += x / 5;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const MeanSd r = mean_sd(xs);
  EXPECT_NEAR(r.mean, 0.8, 1e-15);
  EXPECT_NEAR(r.sd, std::sqrt(ss / 4), 1e-15);
  const double single[] = {0.4};
  EXPECT_EQ(mean_sd(single).sd, 0.0);
}

std::vector<SubjectInfo> subjects(std::size_t nd, std::size_t d) {
  std::vector<SubjectInfo> out;
  for (std::size_t i = 0; i < nd; ++i) out.push_back({"n" + std::to_string(i), Label::kNonDepressed});
  for (std::size_t i = 0; i < d; ++i) out.push_back({"d" + std::to_string(i), Label::kDepressed});
  return out;
}

TEST(KFold, ExactStratification) {
  const auto s = subjects(5, 5);
  const auto fold = stratified_kfold(s, 5, 3);
  std::vector<int> nd(5, 0), d(5, 0);
  for (std::size_t i = 0; i < s.size(); ++i) (s[i].label == Label::kDepressed ? d : nd)[fold[i]]++;
  for (int f = 0; f < 5; ++f) {
    EXPECT_EQ(nd[f], 1);
    EXPECT_EQ(d[f], 1);
  }
}

TEST(KFold, UnevenCountsStayWithinOne) {
  const auto s = subjects(29, 23);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto fold = stratified_kfold(s, 5, seed);
    std::vector<int> nd(5, 0), d(5, 0);
    for (std::size_t i = 0; i < s.size(); ++i) (s[i].label == Label::kDepressed ? d : nd)[fold[i]]++;
    for (int f = 0; f < 5; ++f) {
      EXPECT_TRUE(d[f] == 4 || d[f] == 5) << d[f];
      EXPECT_TRUE(nd[f] == 5 || nd[f] == 6) << nd[f];
      EXPECT_TRUE(nd[f] + d[f] == 10 || nd[f] + d[f] == 11);
    }
  }
}

TEST(KFold, PartitionAndDeterminism) {
  const auto s = subjects(13, 9);
  const auto a = stratified_kfold(s, 4, 11);
  EXPECT_EQ(a, stratified_kfold(s, 4, 11));
  EXPECT_NE(a, stratified_kfold(s, 4, 12));
  std::set<std::size_t> used(a.begin(), a.end());
  EXPECT_EQ(used, (std::set<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(a.size(), s.size());
  EXPECT_THROW(stratified_kfold(s, 1, 0), ConfigError);
  EXPECT_THROW(stratified_kfold(subjects(3, 9), 4, 0), ConfigError);
}

TEST(Roc, CurveAndArea) {
  const double scores[] = {0.9, 0.8, 0.7, 0.6};
  const int labels[] = {1, 0, 1, 0};
  const auto roc = roc_curve(scores, labels);
  ASSERT_EQ(roc.size(), 5u);
  EXPECT_TRUE(std::isinf(roc[0].threshold));
  EXPECT_EQ(roc.back().fpr, 1.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
  EXPECT_NEAR(roc_auc(roc), 0.75, 1e-15);
  const double tied[] = {0.5, 0.5};
  const int mixed[] = {1, 0};
  const auto t = roc_curve(tied, mixed);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_NEAR(roc_auc(t), 0.5, 1e-15);
}

}  // namespace
}  // namespace haren
