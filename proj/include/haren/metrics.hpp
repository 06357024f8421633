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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "haren/errors.hpp"
#include "haren/tokens.hpp"

namespace haren {

struct SubjectVote {
  double probability = 0;
  int predicted = 0;
};

// Mean segment probability; class 1 iff the mean reaches 0.5.
inline SubjectVote aggregate_subject(std::span<const double> segment_probs) {
  if (segment_probs.empty()) throw ContractError("aggregate_subject: no segments");
  double s = 0;
  for (double p : segment_probs) s += p;
  const double mean = s / double(segment_probs.size());
  return {mean, mean >= 0.5 ? 1 : 0};
}

// Positive class is 1 (depressed).
struct Confusion {
  std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
  std::size_t total() const { return tn + fp + fn + tp; }
};

struct Metrics {
  double precision[2] = {0, 0};
  double recall[2] = {0, 0};
  double f1[2] = {0, 0};
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  Confusion confusion;
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0 ? 0.0 : num / den; }

}  // namespace detail

// Per-class precision/recall/F1 with 0/0 taken as 0; macro = mean of the two.
inline Metrics compute_metrics(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw ContractError("compute_metrics: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  Metrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if ((labels[i] != 0 && labels[i] != 1) || (preds[i] != 0 && preds[i] != 1)) {
      throw DataError("compute_metrics: labels and predictions must be 0 or 1");
    }
    auto& c = m.confusion;
    if (labels[i] == 1) (preds[i] == 1 ? c.tp : c.fn)++;
    else (preds[i] == 1 ? c.fp : c.tn)++;
  }
  const auto& c = m.confusion;
  const double tp[2] = {double(c.tn), double(c.tp)};
  const double fp[2] = {double(c.fn), double(c.fp)};
  const double fn[2] = {double(c.fp), double(c.fn)};
  for (int k = 0; k < 2; ++k) {
    m.precision[k] = detail::safe_div(tp[k], tp[k] + fp[k]);
    m.recall[k] = detail::safe_div(tp[k], tp[k] + fn[k]);
    m.f1[k] = detail::safe_div(2 * m.precision[k] * m.recall[k], m.precision[k] + m.recall[k]);
  }
  m.macro_precision = (m.precision[0] + m.precision[1]) / 2;
  m.macro_recall = (m.recall[0] + m.recall[1]) / 2;
  m.macro_f1 = (m.f1[0] + m.f1[1]) / 2;
  return m;
}

struct MeanSd {
  double mean = 0;
  double sd = 0;  // sample standard deviation (n - 1); 0 for a single value
};

inline MeanSd mean_sd(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("mean_sd: no values");
  double s = 0;
  for (double x : xs) s += x;
  const double mean = s / double(xs.size());
  if (xs.size() == 1) return {mean, 0};
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size() - 1))};
}

struct SubjectInfo {
  std::string id;
  Label label = Label::kNonDepressed;
};

// Subject-level stratified split. Subjects of each class are shuffled and
// dealt round-robin; the second class continues where the first stopped so
// fold sizes stay within one of each other. Returns fold index per subject,
// in input order.
inline std::vector<std::size_t> stratified_kfold(std::span<const SubjectInfo> subjects,
                                                 std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("stratified_kfold needs at least 2 folds");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    by_class[static_cast<int>(subjects[i].label)].push_back(i);
  }
  for (int k = 0; k < 2; ++k) {
    if (by_class[k].size() < folds) {
      throw ConfigError("stratified_kfold: class " + std::to_string(k) + " has " +
                        std::to_string(by_class[k].size()) + " subjects for " +
                        std::to_string(folds) + " folds");
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(subjects.size());
  std::size_t next = 0;
  for (int k = 0; k < 2; ++k) {
    std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    for (std::size_t idx : by_class[k]) {
      fold[idx] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// Thresholds at each distinct score (descending), preceded by +inf.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("roc_curve: length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg)++;
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0, 0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (labels[order[i]] == 1 ? tp : fp)++;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]]) {
      out.push_back({scores[order[i]], detail::safe_div(double(fp), double(neg)),
                     detail::safe_div(double(tp), double(pos))});
    }
  }
  return out;
}

inline double roc_auc(std::span<const RocPoint> roc) {
  double auc = 0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    auc += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2;
  }
  return auc;
}

}  // namespace haren
