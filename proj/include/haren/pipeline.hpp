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
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "haren/adam.hpp"
#include "haren/autodiff.hpp"
#include "haren/ctc.hpp"
#include "haren/dataio.hpp"
#include "haren/errors.hpp"
#include "haren/metrics.hpp"
#include "haren/model.hpp"
#include "haren/objective.hpp"
#include "haren/synthetic.hpp"
#include "haren/tokens.hpp"

namespace haren {

template <std::floating_point T>
struct Sample {
  std::string subject_id;
  Label label = Label::kNonDepressed;
  std::string split;
  LayerStack<T> stack;
};

template <std::floating_point T>
std::vector<Sample<T>> load_samples(const Manifest& manifest) {
  if (manifest.entries.empty()) throw DataError("manifest has no entries");
  std::vector<Sample<T>> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    LayerStack<float> stack = read_feature_file(manifest.resolve(e));
    stack.subject_id = e.subject_id;
    out.push_back({e.subject_id, e.label, e.split, stack.template cast<T>()});
  }
  return out;
}

template <std::floating_point T>
std::vector<Sample<T>> samples_from_synthetic(const SyntheticCorpus& corpus) {
  std::vector<Sample<T>> out;
  out.reserve(corpus.segments.size());
  for (const auto& s : corpus.segments) {
    out.push_back({s.subject_id, s.label, s.split, s.stack.template cast<T>()});
  }
  return out;
}

enum class Scenario { kUpperBound, kGeneralization };
enum class Ablation { kNone, kNoHaren, kNoCtc };

inline std::string_view to_string(Scenario s) {
  return s == Scenario::kUpperBound ? "upper-bound" : "generalization";
}

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kNoHaren: return "no-haren";
    case Ablation::kNoCtc: return "no-ctc";
    default: return "none";
  }
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "upper-bound") return Scenario::kUpperBound;
  if (s == "generalization") return Scenario::kGeneralization;
  throw ConfigError("unknown scenario \"" + std::string(s) + "\"");
}

inline Ablation parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no-haren") return Ablation::kNoHaren;
  if (s == "no-ctc") return Ablation::kNoCtc;
  throw ConfigError("unknown ablation \"" + std::string(s) + "\"");
}

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  LossConfig loss;
  std::size_t crop_frames = 48;  // 0 keeps whole segments
  std::size_t eval_every = 1;    // upper-bound dev evaluation cadence, in epochs
  Scenario scenario = Scenario::kGeneralization;
  std::size_t folds = 5;
  std::size_t kmeans_max_iter = 100;
  std::size_t kmeans_max_frames = 20000;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (eval_every == 0) throw ConfigError("eval_every must be >= 1");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (kmeans_max_frames == 0) throw ConfigError("kmeans_max_frames must be >= 1");
    loss.validate();
  }
};

inline ModelConfig apply_ablation(ModelConfig model, Ablation a) {
  if (a == Ablation::kNoHaren) model.variant = Variant::kSingleLayer;
  return model;
}

inline TrainConfig apply_ablation(TrainConfig train, Ablation a) {
  if (a == Ablation::kNoCtc) train.loss.ctc_weight = 0;
  return train;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (base, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ purpose) ^ index);
}

enum SeedPurpose : std::uint64_t {
  kSeedSampler = 1,
  kSeedCrop,
  kSeedDropout,
  kSeedInit,
  kSeedKmeans,
  kSeedFolds,
  kSeedKmeansSubsample,
};

template <std::floating_point T>
Tensor<double> token_frames(const LayerStack<T>& stack) {
  if (stack.token_features.empty()) {
    throw DataError("segment " + stack.segment_id + " has no tokenization features");
  }
  return stack.token_features.template cast<double>();
}

}  // namespace detail

// Fits the tokenization codebook on the pooled frames of the given samples,
// subsampled without replacement to at most `max_frames`.
template <std::floating_point T>
Codebook fit_codebook(std::span<const Sample<T>> samples, std::span<const std::size_t> indices,
                      std::size_t k, std::uint64_t seed, std::size_t max_iter = 100,
                      std::size_t max_frames = 20000) {
  if (indices.empty()) throw DataError("fit_codebook: no training samples");
  std::vector<Tensor<double>> blocks;
  std::size_t total = 0;
  for (std::size_t i : indices) {
    blocks.push_back(detail::token_frames(samples[i].stack));
    total += blocks.back().rows();
  }
  const std::size_t dim = blocks.front().cols();
  std::vector<std::pair<std::size_t, std::size_t>> rows;  // (block, row)
  rows.reserve(total);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].cols() != dim) throw DimensionError("fit_codebook: token dims differ across segments");
    for (std::size_t r = 0; r < blocks[b].rows(); ++r) rows.emplace_back(b, r);
  }
  if (rows.size() > max_frames) {
    std::mt19937_64 rng(detail::derive_seed(seed, detail::kSeedKmeansSubsample));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(max_frames);
    std::sort(rows.begin(), rows.end());
  }
  Tensor<double> pooled({rows.size(), dim});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = blocks[rows[i].first].row(rows[i].second);
    std::copy(src.begin(), src.end(), pooled.row(i).begin());
  }
  return kmeans_fit(pooled, k, seed, max_iter);
}

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;  // global, 1-based
  double focal = 0;
  std::optional<double> ctc;
  double total = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double focal_mean = 0;
  std::optional<double> ctc_mean;
  std::size_t ctc_batches = 0;
  std::size_t ctc_skipped_segments = 0;  // targets longer than the frames allow
  std::optional<double> dev_macro_f1;
};

struct TrainHistory {
  std::vector<BatchRecord> batches;
  std::vector<EpochRecord> epochs;
};

template <std::floating_point T>
struct TrainResult {
  ModelParams<T> params;
  TrainHistory history;
};

// Called after every epoch with the current parameters.
template <std::floating_point T>
using EpochHook = std::function<void(EpochRecord&, const ModelParams<T>&)>;

// Trains in place on samples[train_idx]. The codebook is required whenever
// the CTC weight is nonzero.
template <std::floating_point T>
TrainResult<T> train(std::span<const Sample<T>> samples, std::span<const std::size_t> train_idx,
                     ModelParams<T> params, const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const Codebook* codebook, const EpochHook<T>& hook = {}) {
  model_cfg.validate();
  cfg.validate();
  if (train_idx.empty()) throw DataError("train: no training samples");
  const bool use_ctc = cfg.loss.ctc_weight != 0.0;
  if (use_ctc) {
    if (!codebook) throw ContractError("train: CTC weight is nonzero but no codebook was given");
    if (codebook->k != model_cfg.centroids) {
      throw ConfigError("codebook has k=" + std::to_string(codebook->k) + ", model expects " +
                        std::to_string(model_cfg.centroids));
    }
  }

  std::vector<Label> labels;
  for (std::size_t i : train_idx) labels.push_back(samples[i].label);
  WeightedSampler sampler(labels, detail::derive_seed(cfg.seed, detail::kSeedSampler));

  // Per-frame codebook indices of each training segment, computed once and
  // sliced to the crop window on CTC batches.
  std::map<std::size_t, std::vector<int>> raw_tokens;
  if (use_ctc) {
    for (std::size_t i : train_idx) {
      raw_tokens[i] = tokenize(detail::token_frames(samples[i].stack), *codebook);
    }
  }

  Adam<T> adam({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  TrainResult<T> result{std::move(params), {}};
  std::vector<Tensor<T>*> tensors = result.params.tensors();
  std::size_t batch_index = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double focal_sum = 0, ctc_sum = 0;
    std::size_t n_batches = 0;
    std::size_t drawn = 0;
    while (drawn < train_idx.size()) {
      const std::size_t bsz = std::min(cfg.batch_size, train_idx.size() - drawn);
      drawn += bsz;
      ++batch_index;
      const bool ctc_now = ctc_due(batch_index, cfg.loss);

      Graph<T> g;
      const BoundParams<T> b = bind(g, result.params, true);
      std::vector<Var> probs, ctc_terms;
      std::vector<int> ys;
      std::vector<std::string> ids;
      for (std::size_t j = 0; j < bsz; ++j) {
        const std::size_t idx = train_idx[sampler.next()];
        const Sample<T>& s = samples[idx];
        const std::uint64_t draw = (batch_index << 16) | j;
        std::size_t offset = 0;
        const LayerStack<T> crop =
            cfg.crop_frames ? crop_segment(s.stack, cfg.crop_frames,
                                           detail::derive_seed(cfg.seed, detail::kSeedCrop, draw),
                                           &offset)
                            : s.stack;
        const ForwardVars f = forward(g, crop, b, model_cfg, true,
                                      detail::derive_seed(cfg.seed, detail::kSeedDropout, draw));
        probs.push_back(f.probability);
        ys.push_back(static_cast<int>(s.label));
        ids.push_back(s.stack.segment_id);
        if (!ctc_now) continue;
        const auto& raw = raw_tokens.at(idx);
        const std::span<const int> window(raw.data() + offset, crop.frames());
        std::vector<int> target = collapse(reindex_tokens(window, s.label, codebook->k));
        const std::size_t input_len = g.value(f.frame_logits).rows();
        if (ctc_min_frames(target) > input_len) {
          ++rec.ctc_skipped_segments;
          continue;
        }
        Var term = ctc_loss(g, f.frame_logits, std::span<const int>(target));
        if (cfg.loss.ctc_reduction == Reduction::kMean) {
          term = scale(g, term, T(1) / T(target.size()));
        }
        ctc_terms.push_back(term);
      }

      const Var focal = focal_loss(g, stack_scalars(g, std::span<const Var>(probs)), ys, cfg.loss);
      Var loss = focal;
      BatchRecord br{epoch, batch_index, double(g.value(focal)[0]), std::nullopt, 0};
      if (!ctc_terms.empty()) {
        Var ctc = add_n(g, std::span<const Var>(ctc_terms));
        if (cfg.loss.ctc_reduction == Reduction::kMean) {
          ctc = scale(g, ctc, T(1) / T(ctc_terms.size()));
        }
        br.ctc = double(g.value(ctc)[0]);
        loss = add(g, loss, scale(g, ctc, T(cfg.loss.ctc_weight)));
      }
      br.total = double(g.value(loss)[0]);
      if (!std::isfinite(br.total)) {
        std::string seg_list;
        for (const auto& id : ids) seg_list += (seg_list.empty() ? "" : ",") + id;
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + " (focal=" + std::to_string(br.focal) +
                           ", ctc=" + (br.ctc ? std::to_string(*br.ctc) : "n/a") +
                           ", segments=" + seg_list + ")");
      }
      g.backward(loss);
      std::vector<Tensor<T>> grads;
      for (Var v : b.all()) grads.push_back(g.grad(v));
      adam.step(std::span<Tensor<T>* const>(tensors), std::span<const Tensor<T>>(grads));

      focal_sum += br.focal;
      if (br.ctc) {
        ctc_sum += *br.ctc;
        ++rec.ctc_batches;
      }
      ++n_batches;
      result.history.batches.push_back(br);
    }
    rec.focal_mean = focal_sum / double(n_batches);
    if (rec.ctc_batches) rec.ctc_mean = ctc_sum / double(rec.ctc_batches);
    if (hook) hook(rec, result.params);
    result.history.epochs.push_back(rec);
  }
  return result;
}

struct SubjectPrediction {
  std::string subject_id;
  int label = 0;
  double probability = 0;
  int predicted = 0;
  std::size_t segments = 0;
};

// Full-length segments in inference mode, averaged per subject. Output is
// ordered by subject id.
template <std::floating_point T>
std::vector<SubjectPrediction> evaluate(std::span<const Sample<T>> samples,
                                        std::span<const std::size_t> indices,
                                        const ModelParams<T>& params, const ModelConfig& cfg) {
  if (indices.empty()) throw DataError("evaluate: no samples");
  std::map<std::string, std::pair<int, std::vector<double>>> by_subject;
  for (std::size_t i : indices) {
    const auto& s = samples[i];
    auto [it, inserted] = by_subject.try_emplace(s.subject_id, static_cast<int>(s.label),
                                                 std::vector<double>{});
    if (it->second.first != static_cast<int>(s.label)) {
      throw DataError("subject " + s.subject_id + " carries both labels");
    }
    it->second.second.push_back(double(predict(s.stack, params, cfg).depression_probability));
  }
  std::vector<SubjectPrediction> out;
  for (const auto& [id, entry] : by_subject) {
    const SubjectVote v = aggregate_subject(entry.second);
    out.push_back({id, entry.first, v.probability, v.predicted, entry.second.size()});
  }
  return out;
}

inline Metrics score(std::span<const SubjectPrediction> preds) {
  std::vector<int> p, y;
  for (const auto& s : preds) {
    p.push_back(s.predicted);
    y.push_back(s.label);
  }
  return compute_metrics(p, y);
}

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_segments = 0;
  std::size_t eval_subjects = 0;
  std::size_t best_epoch = 0;  // upper-bound only; otherwise the last epoch
  Metrics metrics;
  std::vector<SubjectPrediction> predictions;
  TrainHistory history;
};

struct MetricsReport {
  Scenario scenario = Scenario::kGeneralization;
  Ablation ablation = Ablation::kNone;
  std::vector<FoldResult> folds;
  MeanSd macro_f1, macro_recall, macro_precision;
  Metrics pooled;  // over every scored subject across folds
  std::vector<SubjectPrediction> predictions;
};

struct SubjectTable {
  std::vector<SubjectInfo> subjects;
  std::map<std::string, std::size_t> index;
};

template <std::floating_point T>
SubjectTable subject_table(std::span<const Sample<T>> samples) {
  SubjectTable t;
  for (const auto& s : samples) {
    auto [it, inserted] = t.index.try_emplace(s.subject_id, t.subjects.size());
    if (inserted) {
      t.subjects.push_back({s.subject_id, s.label});
    } else if (t.subjects[it->second].label != s.label) {
      throw DataError("subject " + s.subject_id + " carries both labels");
    }
  }
  return t;
}

namespace detail {

inline void summarize(MetricsReport& r) {
  std::vector<double> f1, rec, prec;
  for (const auto& f : r.folds) {
    f1.push_back(f.metrics.macro_f1);
    rec.push_back(f.metrics.macro_recall);
    prec.push_back(f.metrics.macro_precision);
    r.predictions.insert(r.predictions.end(), f.predictions.begin(), f.predictions.end());
  }
  r.macro_f1 = mean_sd(f1);
  r.macro_recall = mean_sd(rec);
  r.macro_precision = mean_sd(prec);
  std::sort(r.predictions.begin(), r.predictions.end(),
            [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  r.pooled = score(r.predictions);
}

template <std::floating_point T>
std::optional<Codebook> maybe_codebook(std::span<const Sample<T>> samples,
                                       std::span<const std::size_t> idx, const ModelConfig& mc,
                                       const TrainConfig& tc, std::uint64_t salt) {
  if (tc.loss.ctc_weight == 0.0) return std::nullopt;
  return fit_codebook(samples, idx, mc.centroids, derive_seed(tc.seed, kSeedKmeans, salt),
                      tc.kmeans_max_iter, tc.kmeans_max_frames);
}

}  // namespace detail

// Upper-bound: train on split "train", score split "dev" every eval_every
// epochs and keep the epoch with the highest dev macro F1 (earliest on ties).
// Generalization: stratified k-fold by subject, fixed epochs, each fold
// scored on its held-out subjects.
// In upper-bound mode `best_params`, when given, receives the parameters of
// the selected epoch.
template <std::floating_point T>
MetricsReport run_scenario(std::span<const Sample<T>> samples, const ModelConfig& model_in,
                           const TrainConfig& train_in, Ablation ablation = Ablation::kNone,
                           ModelParams<T>* best_params = nullptr) {
  const ModelConfig mc = apply_ablation(model_in, ablation);
  const TrainConfig tc = apply_ablation(train_in, ablation);
  mc.validate();
  tc.validate();
  if (samples.empty()) throw DataError("run_scenario: no samples");

  MetricsReport report;
  report.scenario = tc.scenario;
  report.ablation = ablation;

  if (tc.scenario == Scenario::kUpperBound) {
    std::vector<std::size_t> tr, dev;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].split == "train") tr.push_back(i);
      else if (samples[i].split == "dev") dev.push_back(i);
    }
    if (tr.empty() || dev.empty()) {
      throw ConfigError("upper-bound scenario needs segments tagged split=train and split=dev (found " +
                        std::to_string(tr.size()) + " train, " + std::to_string(dev.size()) + " dev)");
    }
    const auto cb = detail::maybe_codebook(samples, std::span<const std::size_t>(tr), mc, tc, 0);
    FoldResult best;
    bool have_best = false;
    auto hook = [&](EpochRecord& rec, const ModelParams<T>& p) {
      if (rec.epoch % tc.eval_every != 0 && rec.epoch != tc.epochs) return;
      auto preds = evaluate(samples, std::span<const std::size_t>(dev), p, mc);
      const Metrics m = score(preds);
      rec.dev_macro_f1 = m.macro_f1;
      if (!have_best || m.macro_f1 > best.metrics.macro_f1) {
        have_best = true;
        best.best_epoch = rec.epoch;
        best.metrics = m;
        best.predictions = std::move(preds);
        if (best_params) *best_params = p;
      }
    };
    auto result = train(samples, std::span<const std::size_t>(tr),
                        init_params<T>(mc, detail::derive_seed(tc.seed, detail::kSeedInit)), mc, tc,
                        cb ? &*cb : nullptr, EpochHook<T>(hook));
    best.train_segments = tr.size();
    best.eval_subjects = best.predictions.size();
    best.history = std::move(result.history);
    report.folds.push_back(std::move(best));
  } else {
    const SubjectTable table = subject_table(samples);
    const auto fold_of =
        stratified_kfold(table.subjects, tc.folds, detail::derive_seed(tc.seed, detail::kSeedFolds));
    for (std::size_t f = 0; f < tc.folds; ++f) {
      std::vector<std::size_t> tr, held;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        (fold_of[table.index.at(samples[i].subject_id)] == f ? held : tr).push_back(i);
      }
      const auto cb = detail::maybe_codebook(samples, std::span<const std::size_t>(tr), mc, tc, f);
      TrainConfig fold_cfg = tc;
      fold_cfg.seed = detail::derive_seed(tc.seed, detail::kSeedFolds, f + 1);
      auto result = train(samples, std::span<const std::size_t>(tr),
                          init_params<T>(mc, detail::derive_seed(fold_cfg.seed, detail::kSeedInit)),
                          mc, fold_cfg, cb ? &*cb : nullptr);
      FoldResult fr;
      fr.fold = f;
      fr.train_segments = tr.size();
      fr.best_epoch = tc.epochs;
      fr.predictions = evaluate(samples, std::span<const std::size_t>(held), result.params, mc);
      fr.eval_subjects = fr.predictions.size();
      fr.metrics = score(fr.predictions);
      fr.history = std::move(result.history);
      report.folds.push_back(std::move(fr));
    }
  }
  detail::summarize(report);
  return report;
}

struct LayerSweepRow {
  std::size_t layer = 0;  // 0-based
  MeanSd macro_f1;
  MeanSd macro_recall;
  MeanSd macro_precision;
};

// The single-layer baseline trained once per designated layer (all layers
// when `layers` is empty).
template <std::floating_point T>
std::vector<LayerSweepRow> layer_sweep(std::span<const Sample<T>> samples, const ModelConfig& mc,
                                       const TrainConfig& tc,
                                       std::vector<std::size_t> layers = {}) {
  if (layers.empty()) {
    for (std::size_t l = 0; l < mc.layers; ++l) layers.push_back(l);
  }
  std::vector<LayerSweepRow> rows;
  for (std::size_t l : layers) {
    ModelConfig cfg = mc;
    cfg.baseline_layer = l;
    const MetricsReport r = run_scenario(samples, cfg, tc, Ablation::kNoHaren);
    rows.push_back({l, r.macro_f1, r.macro_recall, r.macro_precision});
  }
  return rows;
}

}  // namespace haren
