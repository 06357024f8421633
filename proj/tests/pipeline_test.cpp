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

#include "haren/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "haren/report.hpp"
#include "haren/synthetic.hpp"

namespace haren {
namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.layers = 4;
  m.dim = 8;
  m.heads = 2;
  m.ffn_dim = 8;
  m.centroids = 3;
  m.dropout = 0.1;
  return m;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 4;
  t.learning_rate = 5e-3;
  t.crop_frames = 0;
  t.loss.ctc_every_n_batches = 1;
  return t;
}

SyntheticSpec tiny_spec(std::size_t per_class = 5) {
  SyntheticSpec s;
  s.subjects_nd = per_class;
  s.subjects_d = per_class;
  s.segments_per_subject = 2;
  s.frames = 24;
  s.layers = 4;
  s.dim = 8;
  s.token_dim = 4;
  s.marker_strength = 3.0;
  s.marker_density = 0.15;
  return s;
}

std::vector<Sample<double>> corpus(const SyntheticSpec& spec) {
  return samples_from_synthetic<double>(generate_synthetic(spec));
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

TEST(Train, OneEpochMovesParametersAndStaysFinite) {
  const auto samples = corpus(tiny_spec());
  const auto mc = tiny_model();
  auto tc = tiny_train();
  tc.epochs = 1;
  const auto idx = all_indices(samples.size());
  const Codebook cb = fit_codebook(std::span<const Sample<double>>(samples),
                                   std::span<const std::size_t>(idx), mc.centroids, 3);
  const auto init = init_params<double>(mc, 5);
  const auto r = train(std::span<const Sample<double>>(samples), std::span<const std::size_t>(idx),
                       init, mc, tc, &cb);
  ASSERT_EQ(r.history.epochs.size(), 1u);
  EXPECT_EQ(r.history.batches.size(), (samples.size() + 3) / 4);
  for (const auto& b : r.history.batches) {
    EXPECT_TRUE(std::isfinite(b.total));
    ASSERT_TRUE(b.ctc.has_value());
    EXPECT_GT(*b.ctc, 0.0);
  }
  std::size_t changed = 0;
  const auto before = init.entries();
  const auto after = r.params.entries();
  for (std::size_t i = 0; i < before.size(); ++i) changed += !(*before[i].tensor == *after[i].tensor);
  EXPECT_EQ(changed, before.size());
}

TEST(Train, CtcCadenceAndCodebookContract) {
  const auto samples = corpus(tiny_spec());
  const auto mc = tiny_model();
  auto tc = tiny_train();
  tc.epochs = 1;
  tc.batch_size = 2;
  tc.loss.ctc_every_n_batches = 5;
  const auto idx = all_indices(samples.size());
  EXPECT_THROW(train(std::span<const Sample<double>>(samples), std::span<const std::size_t>(idx),
                     init_params<double>(mc, 1), mc, tc, nullptr),
               ContractError);
  const Codebook cb = fit_codebook(std::span<const Sample<double>>(samples),
                                   std::span<const std::size_t>(idx), mc.centroids, 3);
  const auto r = train(std::span<const Sample<double>>(samples), std::span<const std::size_t>(idx),
                       init_params<double>(mc, 1), mc, tc, &cb);
  for (const auto& b : r.history.batches) EXPECT_EQ(b.ctc.has_value(), b.batch % 5 == 0) << b.batch;
}

TEST(Train, ZeroWeightMatchesFocalOnlyAblation) {
  const auto samples = corpus(tiny_spec());
  const auto mc = tiny_model();
  auto zero = tiny_train();
  zero.loss.ctc_weight = 0.0;
  const auto a = run_scenario(std::span<const Sample<double>>(samples), mc, zero, Ablation::kNone);
  const auto b =
      run_scenario(std::span<const Sample<double>>(samples), mc, tiny_train(), Ablation::kNoCtc);
  ASSERT_EQ(a.folds.size(), b.folds.size());
  for (std::size_t f = 0; f < a.folds.size(); ++f) {
    const auto& ha = a.folds[f].history.batches;
    const auto& hb = b.folds[f].history.batches;
    ASSERT_EQ(ha.size(), hb.size());
    for (std::size_t i = 0; i < ha.size(); ++i) {
      EXPECT_EQ(ha[i].total, hb[i].total);
      EXPECT_FALSE(ha[i].ctc.has_value());
    }
  }
  EXPECT_EQ(summary_json(a)["subjects"], summary_json(b)["subjects"]);
}

TEST(Train, FocalLossDecreasesOnSeparableData) {
  auto spec = tiny_spec(6);
  spec.marker_strength = 5.0;
  const auto samples = corpus(spec);
  const auto mc = tiny_model();
  auto tc = tiny_train();
  tc.epochs = 12;
  tc.loss.ctc_weight = 0.0;
  const auto idx = all_indices(samples.size());
  const auto r = train(std::span<const Sample<double>>(samples), std::span<const std::size_t>(idx),
                       init_params<double>(mc, 2), mc, tc, nullptr);
  const auto& e = r.history.epochs;
  EXPECT_LT(e.back().focal_mean, 0.7 * e.front().focal_mean);
}

TEST(Scenario, UpperBoundKeepsEarliestBestEpoch) {
  const auto samples = corpus(tiny_spec(6));
  auto tc = tiny_train();
  tc.scenario = Scenario::kUpperBound;
  tc.epochs = 5;
  ModelParams<double> best;
  const auto r = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc,
                              Ablation::kNone, &best);
  ASSERT_EQ(r.folds.size(), 1u);
  const auto& epochs = r.folds[0].history.epochs;
  ASSERT_EQ(epochs.size(), 5u);
  std::size_t want = 0;
  double top = -1;
  for (const auto& e : epochs) {
    ASSERT_TRUE(e.dev_macro_f1.has_value());
    if (*e.dev_macro_f1 > top) {
      top = *e.dev_macro_f1;
      want = e.epoch;
    }
  }
  EXPECT_EQ(r.folds[0].best_epoch, want);
  EXPECT_EQ(r.folds[0].metrics.macro_f1, top);
  EXPECT_FALSE(best.entries().empty());

  std::vector<std::size_t> dev;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == "dev") dev.push_back(i);
  const auto again = evaluate(std::span<const Sample<double>>(samples),
                              std::span<const std::size_t>(dev), best, tiny_model());
  EXPECT_EQ(score(again).macro_f1, top);
}

TEST(Scenario, UpperBoundNeedsSplitTags) {
  auto samples = corpus(tiny_spec());
  for (auto& s : samples) s.split.clear();
  auto tc = tiny_train();
  tc.scenario = Scenario::kUpperBound;
  EXPECT_THROW(run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc), ConfigError);
}

TEST(Scenario, GeneralizationScoresEverySubjectOnce) {
  const auto samples = corpus(tiny_spec());
  auto tc = tiny_train();
  tc.epochs = 1;
  const auto r = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc);
  ASSERT_EQ(r.folds.size(), 5u);
  std::set<std::string> seen;
  for (const auto& f : r.folds) {
    EXPECT_EQ(f.eval_subjects, 2u);
    EXPECT_EQ(f.train_segments, 16u);
    for (const auto& p : f.predictions) {
      EXPECT_TRUE(seen.insert(p.subject_id).second);
      EXPECT_EQ(p.segments, 2u);
    }
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(r.predictions.size(), 10u);
}

TEST(Scenario, Deterministic) {
  const auto samples = corpus(tiny_spec());
  auto tc = tiny_train();
  tc.epochs = 2;
  const auto a = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc);
  const auto b = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc);
  EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
  tc.seed = 2;
  const auto c = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc);
  EXPECT_NE(summary_json(a).dump(), summary_json(c).dump());
}

TEST(Scenario, NullCorpusScoresNearChance) {
  auto spec = tiny_spec(40);
  spec.marker_strength = 0.0;
  spec.segments_per_subject = 1;
  spec.frames = 16;
  const auto samples = corpus(spec);
  auto tc = tiny_train();
  tc.epochs = 2;
  tc.loss.ctc_weight = 0.0;
  const auto r = run_scenario(std::span<const Sample<double>>(samples), tiny_model(), tc);
  EXPECT_NEAR(r.pooled.macro_f1, 0.5, 0.1);
}

TEST(Sweep, ShallowMarkersFavorShallowLayers) {
  auto spec = tiny_spec(6);
  spec.layout = MarkerLayout::kShallowOnly;
  const auto samples = corpus(spec);
  auto tc = tiny_train();
  tc.epochs = 6;
  tc.loss.ctc_weight = 0.0;
  const auto rows = layer_sweep(std::span<const Sample<double>>(samples), tiny_model(), tc, {0, 3});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].layer, 0u);
  EXPECT_GT(rows[0].macro_f1.mean, rows[1].macro_f1.mean + 0.1);
  EXPECT_EQ(layer_sweep(std::span<const Sample<double>>(corpus(tiny_spec(3))), tiny_model(),
                        [] { auto t = tiny_train(); t.epochs = 1; t.folds = 3; return t; }())
                .size(),
            4u);
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t purpose = 0; purpose < 8; ++purpose)
    for (std::uint64_t i = 0; i < 8; ++i) seen.insert(detail::derive_seed(1, purpose, i));
  EXPECT_EQ(seen.size(), 64u);
  EXPECT_EQ(detail::derive_seed(1, 2, 3), detail::derive_seed(1, 2, 3));
}

}  // namespace
}  // namespace haren
