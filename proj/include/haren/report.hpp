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

// Writers for run outputs. Every file name under the output directory is
// fixed; machine-readable files print doubles with 17 significant digits so
// reruns compare byte for byte.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "haren/errors.hpp"
#include "haren/metrics.hpp"
#include "haren/pipeline.hpp"

namespace haren {

namespace report_files {
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kConfusion = "confusion.csv";
inline constexpr const char* kRoc = "roc.csv";
inline constexpr const char* kHistory = "history.csv";
inline constexpr const char* kEpochs = "epochs.csv";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kLayerSweep = "layer_sweep.csv";
inline constexpr const char* kCentroids = "centroids.csv";
inline constexpr const char* kConfig = "config.json";
}  // namespace report_files

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["macro_f1"] = m.macro_f1;
  j["macro_recall"] = m.macro_recall;
  j["macro_precision"] = m.macro_precision;
  j["f1"] = {m.f1[0], m.f1[1]};
  j["recall"] = {m.recall[0], m.recall[1]};
  j["precision"] = {m.precision[0], m.precision[1]};
  j["confusion"] = {{"tn", m.confusion.tn}, {"fp", m.confusion.fp},
                    {"fn", m.confusion.fn}, {"tp", m.confusion.tp}};
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json summary_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["scenario"] = std::string(to_string(r.scenario));
  j["ablation"] = std::string(to_string(r.ablation));
  j["macro_f1"] = {{"mean", r.macro_f1.mean}, {"sd", r.macro_f1.sd}};
  j["macro_recall"] = {{"mean", r.macro_recall.mean}, {"sd", r.macro_recall.sd}};
  j["macro_precision"] = {{"mean", r.macro_precision.mean}, {"sd", r.macro_precision.sd}};
  j["pooled"] = detail::metrics_json(r.pooled);
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["train_segments"] = f.train_segments;
    fj["eval_subjects"] = f.eval_subjects;
    fj["best_epoch"] = f.best_epoch;
    fj["metrics"] = detail::metrics_json(f.metrics);
    folds.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds);
  auto subjects = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    subjects.push_back({{"subject_id", p.subject_id},
                        {"label", p.label},
                        {"probability", p.probability},
                        {"predicted", p.predicted},
                        {"segments", p.segments}});
  }
  j["subjects"] = std::move(subjects);
  return j;
}

inline void write_report_text(std::ostream& out, const MetricsReport& r) {
  out << "scenario: " << to_string(r.scenario) << '\n';
  out << "ablation: " << to_string(r.ablation) << '\n';
  out << "folds: " << r.folds.size() << '\n';
  out << "subjects: " << r.predictions.size() << '\n';
  out << "macro_f1: " << detail::fixed4(r.macro_f1.mean) << " +/- " << detail::fixed4(r.macro_f1.sd) << '\n';
  out << "macro_recall: " << detail::fixed4(r.macro_recall.mean) << " +/- "
      << detail::fixed4(r.macro_recall.sd) << '\n';
  out << "macro_precision: " << detail::fixed4(r.macro_precision.mean) << " +/- "
      << detail::fixed4(r.macro_precision.sd) << '\n';
  const auto& c = r.pooled.confusion;
  out << "confusion: tn=" << c.tn << " fp=" << c.fp << " fn=" << c.fn << " tp=" << c.tp << "\n\n";
  out << "fold  best_epoch  subjects  macro_f1  macro_recall  macro_precision\n";
  for (const auto& f : r.folds) {
    char line[128];
    std::snprintf(line, sizeof line, "%4zu  %10zu  %8zu  %8s  %12s  %15s\n", f.fold, f.best_epoch,
                  f.eval_subjects, detail::fixed4(f.metrics.macro_f1).c_str(),
                  detail::fixed4(f.metrics.macro_recall).c_str(),
                  detail::fixed4(f.metrics.macro_precision).c_str());
    out << line;
  }
}

inline void write_confusion_csv(std::ostream& out, const Metrics& m) {
  out << "actual,predicted,count\n";
  out << "0,0," << m.confusion.tn << '\n';
  out << "0,1," << m.confusion.fp << '\n';
  out << "1,0," << m.confusion.fn << '\n';
  out << "1,1," << m.confusion.tp << '\n';
}

inline void write_roc_csv(std::ostream& out, std::span<const SubjectPrediction> preds) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& p : preds) {
    scores.push_back(p.probability);
    labels.push_back(p.label);
  }
  const auto roc = roc_curve(scores, labels);
  out << "threshold,fpr,tpr\n";
  for (const auto& pt : roc) {
    out << (std::isinf(pt.threshold) ? std::string("inf") : detail::num(pt.threshold)) << ','
        << detail::num(pt.fpr) << ',' << detail::num(pt.tpr) << '\n';
  }
}

inline void write_history_csv(std::ostream& out, const MetricsReport& r) {
  out << "fold,epoch,batch,focal,ctc,total\n";
  for (const auto& f : r.folds)
    for (const auto& b : f.history.batches)
      out << f.fold << ',' << b.epoch << ',' << b.batch << ',' << detail::num(b.focal) << ','
          << (b.ctc ? detail::num(*b.ctc) : "") << ',' << detail::num(b.total) << '\n';
}

inline void write_epochs_csv(std::ostream& out, const MetricsReport& r) {
  out << "fold,epoch,focal_mean,ctc_mean,ctc_batches,ctc_skipped_segments,dev_macro_f1\n";
  for (const auto& f : r.folds)
    for (const auto& e : f.history.epochs)
      out << f.fold << ',' << e.epoch << ',' << detail::num(e.focal_mean) << ','
          << (e.ctc_mean ? detail::num(*e.ctc_mean) : "") << ',' << e.ctc_batches << ','
          << e.ctc_skipped_segments << ','
          << (e.dev_macro_f1 ? detail::num(*e.dev_macro_f1) : "") << '\n';
}

inline void write_predictions_csv(std::ostream& out, const MetricsReport& r) {
  out << "fold,subject_id,label,probability,predicted,segments\n";
  for (const auto& f : r.folds)
    for (const auto& p : f.predictions)
      out << f.fold << ',' << p.subject_id << ',' << p.label << ',' << detail::num(p.probability)
          << ',' << p.predicted << ',' << p.segments << '\n';
}

// report.txt, summary.json, confusion.csv, roc.csv, history.csv, epochs.csv
// and predictions.csv under `dir`.
inline void write_metrics_report(const std::filesystem::path& dir, const MetricsReport& r) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_out(dir / report_files::kReport);
    write_report_text(out, r);
  }
  {
    auto out = detail::open_out(dir / report_files::kSummary);
    out << summary_json(r).dump(2) << '\n';
  }
  {
    auto out = detail::open_out(dir / report_files::kConfusion);
    write_confusion_csv(out, r.pooled);
  }
  {
    auto out = detail::open_out(dir / report_files::kRoc);
    write_roc_csv(out, r.predictions);
  }
  {
    auto out = detail::open_out(dir / report_files::kHistory);
    write_history_csv(out, r);
  }
  {
    auto out = detail::open_out(dir / report_files::kEpochs);
    write_epochs_csv(out, r);
  }
  {
    auto out = detail::open_out(dir / report_files::kPredictions);
    write_predictions_csv(out, r);
  }
}

inline void write_layer_sweep_csv(std::ostream& out, std::span<const LayerSweepRow> rows) {
  out << "layer,macro_f1_mean,macro_f1_sd,macro_recall_mean,macro_precision_mean\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << detail::num(r.macro_f1.mean) << ',' << detail::num(r.macro_f1.sd)
        << ',' << detail::num(r.macro_recall.mean) << ',' << detail::num(r.macro_precision.mean)
        << '\n';
  }
}

}  // namespace haren
