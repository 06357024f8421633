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

#include "haren/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace haren {
namespace {

MetricsReport sample_report() {
  MetricsReport r;
  for (std::size_t f = 0; f < 2; ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.train_segments = 6;
    fr.best_epoch = 3;
    fr.predictions = {{"s" + std::to_string(2 * f), 0, 0.25 + 0.1 * double(f), 0, 2},
                      {"s" + std::to_string(2 * f + 1), 1, 0.75, 1, 2}};
    fr.eval_subjects = 2;
    fr.metrics = score(fr.predictions);
    fr.history.batches = {{1, 1, 0.5, std::nullopt, 0.5}, {1, 2, 0.4, 2.0, 0.6}};
    EpochRecord e;
    e.epoch = 1;
    e.focal_mean = 0.45;
    e.ctc_mean = 2.0;
    e.ctc_batches = 1;
    fr.history.epochs = {e};
    r.folds.push_back(fr);
  }
  detail::summarize(r);
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Report, WritesEveryFileDeterministically) {
  const auto base = std::filesystem::temp_directory_path() / "haren_report_test";
  std::filesystem::remove_all(base);
  const auto r = sample_report();
  write_metrics_report(base / "a", r);
  write_metrics_report(base / "b", r);
  for (const char* name : {report_files::kReport, report_files::kSummary, report_files::kConfusion,
                           report_files::kRoc, report_files::kHistory, report_files::kEpochs,
                           report_files::kPredictions}) {
    ASSERT_TRUE(std::filesystem::exists(base / "a" / name)) << name;
    EXPECT_EQ(slurp(base / "a" / name), slurp(base / "b" / name)) << name;
  }
  const auto summary = nlohmann::json::parse(slurp(base / "a" / report_files::kSummary));
  EXPECT_EQ(summary["macro_f1"]["mean"], 1.0);
  EXPECT_EQ(summary["folds"].size(), 2u);
  EXPECT_EQ(summary["subjects"].size(), 4u);
  EXPECT_EQ(summary["subjects"][0]["subject_id"], "s0");
  std::filesystem::remove_all(base);
}

TEST(Report, CsvLayouts) {
  const auto r = sample_report();
  std::ostringstream confusion, history, epochs, preds;
  write_confusion_csv(confusion, r.pooled);
  EXPECT_EQ(confusion.str(), "actual,predicted,count\n0,0,2\n0,1,0\n1,0,0\n1,1,2\n");
  write_history_csv(history, r);
  EXPECT_EQ(history.str().substr(0, history.str().find('\n', 35)),
            "fold,epoch,batch,focal,ctc,total\n0,1,1,0.5,,0.5");
  write_epochs_csv(epochs, r);
  EXPECT_NE(epochs.str().find("\n0,1,0.45000000000000001,2,1,0,\n"), std::string::npos);
  write_predictions_csv(preds, r);
  EXPECT_NE(preds.str().find("\n1,s2,0,0.34999999999999998,0,2\n"), std::string::npos);

  std::ostringstream text;
  write_report_text(text, r);
  EXPECT_NE(text.str().find("macro_f1: 1.0000 +/- 0.0000"), std::string::npos);

  const LayerSweepRow rows[] = {{0, {0.5, 0.1}, {0.5, 0}, {0.5, 0}}};
  std::ostringstream sweep;
  write_layer_sweep_csv(sweep, rows);
  EXPECT_EQ(sweep.str(),
            "layer,macro_f1_mean,macro_f1_sd,macro_recall_mean,macro_precision_mean\n"
            "0,0.5,0.10000000000000001,0.5,0.5\n");
}

TEST(Report, RocStartsAtInfinity) {
  const auto r = sample_report();
  std::ostringstream roc;
  write_roc_csv(roc, r.predictions);
  EXPECT_EQ(roc.str().substr(0, 25), "threshold,fpr,tpr\ninf,0,0");
}

}  // namespace
}  // namespace haren
