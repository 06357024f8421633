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

// haren: command-line driver.
//
//   haren synth        write a synthetic corpus (features/ + manifest.tsv)
//   haren gen-labels   fit the tokenization codebook, cache CTC targets
//   haren train        run the configured scenario; upper-bound saves params
//   haren eval         score saved params on a manifest
//   haren crossval     stratified k-fold generalization run
//   haren layer-sweep  single-layer baseline per encoder layer
//   haren analyze      centroid usage + chi-square tests from the target cache
//   haren gradcheck    finite-difference checks at toy dims

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "haren/haren.hpp"

namespace fs = std::filesystem;
using haren::Json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int precision = 0;
  std::vector<std::string> sets;
  std::string manifest;
  std::string subjects;
  std::size_t frames = 0;
  std::size_t k = 0;
  std::string scenario;
  std::size_t folds = 0;
  std::string ablation;
  std::size_t epochs = 0;
  std::string params;
  std::string split;
  std::string targets;
};

haren::RunConfig resolve_config(const CLI::App& app, const Flags& f) {
  haren::RunConfig cfg;
  if (!f.config.empty()) haren::apply_config_file(cfg, f.config);
  haren::apply_environment(cfg);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--out")) cfg.out = f.out;
  if (given("--precision")) cfg.precision = f.precision;
  for (const auto& s : f.sets) haren::apply_assignment(cfg, s);
  cfg.train.seed = cfg.seed;
  cfg.synth.seed = cfg.seed;
  return cfg;
}

void apply_subcommand_flags(const CLI::App& sub, const Flags& f, haren::RunConfig& cfg) {
  auto given = [&](const char* name) {
    const CLI::Option* opt = sub.get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (given("--manifest")) cfg.manifest = f.manifest;
  if (given("--frames")) cfg.synth.frames = f.frames;
  if (given("--k")) cfg.model.centroids = f.k;
  if (given("--scenario")) cfg.train.scenario = haren::parse_scenario(f.scenario);
  if (given("--folds")) cfg.train.folds = f.folds;
  if (given("--ablation")) cfg.ablation = haren::parse_ablation(f.ablation);
  if (given("--epochs")) cfg.train.epochs = f.epochs;
  if (given("--targets")) cfg.targets = f.targets;
  if (given("--subjects")) {
    std::size_t nd = 0, d = 0;
    char tail = 0;
    if (std::sscanf(f.subjects.c_str(), "%zux%zu%c", &nd, &d, &tail) != 2) {
      throw haren::ConfigError("--subjects expects NDxD, e.g. 8x8; got \"" + f.subjects + "\"");
    }
    cfg.synth.subjects_nd = nd;
    cfg.synth.subjects_d = d;
  }
}

fs::path manifest_path(const haren::RunConfig& cfg) {
  return cfg.manifest.empty() ? fs::path(cfg.out) / "manifest.tsv" : fs::path(cfg.manifest);
}

fs::path targets_path(const haren::RunConfig& cfg) {
  return cfg.targets.empty() ? fs::path(cfg.out) / "targets.json" : fs::path(cfg.targets);
}

void prepare_out(const haren::RunConfig& cfg) {
  fs::create_directories(cfg.out);
  haren::write_config(fs::path(cfg.out) / haren::report_files::kConfig, cfg);
}

void print_report(const haren::MetricsReport& r) { haren::write_report_text(std::cout, r); }

// ---------------------------------------------------------------------------

int cmd_synth(haren::RunConfig cfg) {
  cfg.synth.layers = cfg.model.layers;
  cfg.synth.dim = cfg.model.dim;
  prepare_out(cfg);
  const auto corpus = haren::generate_synthetic(cfg.synth);
  const fs::path manifest = haren::write_corpus(corpus, cfg.out);
  std::cout << manifest.string() << '\n';
  return 0;
}

int cmd_gen_labels(const haren::RunConfig& cfg) {
  prepare_out(cfg);
  const auto manifest = haren::read_manifest(manifest_path(cfg));
  const auto samples = haren::load_samples<double>(manifest);
  std::vector<std::size_t> fit_idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == "train") fit_idx.push_back(i);
  if (fit_idx.empty()) {
    for (std::size_t i = 0; i < samples.size(); ++i) fit_idx.push_back(i);
  }
  const std::size_t k = cfg.model.centroids;
  const haren::Codebook cb = haren::fit_codebook<double>(
      samples, fit_idx, k, cfg.seed, cfg.train.kmeans_max_iter, cfg.train.kmeans_max_frames);
  haren::write_codebook(fs::path(cfg.out) / "codebook.hrnc", cb);

  Json cache;
  cache["k"] = k;
  cache["vocab"] = haren::ctc_vocab_size(k);
  cache["blank"] = haren::kBlank;
  cache["seed"] = cfg.seed;
  cache["fit_segments"] = fit_idx.size();
  cache["inertia"] = cb.inertia;
  auto segs = Json::array();
  std::size_t infeasible = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto raw = haren::tokenize(s.stack.token_features, cb);
    std::vector<std::uint64_t> counts(k, 0);
    for (int t : raw) ++counts[static_cast<std::size_t>(t)];
    const std::size_t input_len = (s.stack.frames() + cfg.model.ctc_pool_stride - 1) /
                                  cfg.model.ctc_pool_stride;
    const auto target = haren::build_targets(s.stack.token_features, cb, s.label, input_len);
    Json e;
    e["segment"] = s.stack.segment_id;
    e["subject_id"] = s.subject_id;
    e["label"] = static_cast<int>(s.label);
    e["split"] = s.split;
    e["frames"] = s.stack.frames();
    e["input_length"] = input_len;
    e["centroid_counts"] = counts;
    if (target) {
      e["tokens"] = target->tokens();
    } else {
      e["tokens"] = nullptr;
      ++infeasible;
    }
    segs.push_back(std::move(e));
  }
  cache["infeasible_segments"] = infeasible;
  cache["segments"] = std::move(segs);
  std::ofstream out(targets_path(cfg), std::ios::trunc | std::ios::binary);
  if (!out) throw haren::ConfigError("cannot write " + targets_path(cfg).string());
  out << cache.dump(1) << '\n';
  std::cout << "k=" << k << " vocab=" << haren::ctc_vocab_size(k) << " segments=" << samples.size()
            << " infeasible=" << infeasible << " iterations=" << cb.iterations_run << '\n';
  return 0;
}

template <std::floating_point T>
void check_param_shapes(const haren::ModelParams<T>& loaded, const haren::ModelConfig& mc) {
  const auto expected = haren::init_params<T>(mc, 0);
  const auto a = loaded.entries();
  const auto b = expected.entries();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tensor->shape() != b[i].tensor->shape()) {
      throw haren::ConfigError("parameter " + std::string(a[i].name) + " has shape " +
                               haren::to_string(a[i].tensor->shape()) + " but the config implies " +
                               haren::to_string(b[i].tensor->shape()));
    }
  }
}

template <std::floating_point T>
int cmd_train(const haren::RunConfig& cfg, bool force_generalization) {
  prepare_out(cfg);
  haren::TrainConfig tc = cfg.train;
  if (force_generalization) tc.scenario = haren::Scenario::kGeneralization;
  const auto samples = haren::load_samples<T>(haren::read_manifest(manifest_path(cfg)));
  haren::ModelParams<T> best;
  const auto report = haren::run_scenario<T>(samples, cfg.model, tc, cfg.ablation, &best);
  haren::write_metrics_report(cfg.out, report);
  if (tc.scenario == haren::Scenario::kUpperBound) {
    haren::write_params(fs::path(cfg.out) / "params.hrnp", best);
  }
  print_report(report);
  return 0;
}

template <std::floating_point T>
int cmd_eval(const haren::RunConfig& cfg, const Flags& f) {
  prepare_out(cfg);
  const fs::path params_path = f.params.empty() ? fs::path(cfg.out) / "params.hrnp" : fs::path(f.params);
  const haren::ModelConfig mc = haren::apply_ablation(cfg.model, cfg.ablation);
  const auto params = haren::read_params<T>(params_path);
  check_param_shapes(params, mc);
  const auto samples = haren::load_samples<T>(haren::read_manifest(manifest_path(cfg)));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (f.split.empty() || samples[i].split == f.split) idx.push_back(i);
  if (idx.empty()) throw haren::DataError("no segments with split \"" + f.split + "\"");
  haren::MetricsReport report;
  report.scenario = cfg.train.scenario;
  report.ablation = cfg.ablation;
  haren::FoldResult fr;
  fr.predictions = haren::evaluate<T>(samples, idx, params, mc);
  fr.eval_subjects = fr.predictions.size();
  fr.metrics = haren::score(fr.predictions);
  report.folds.push_back(std::move(fr));
  haren::detail::summarize(report);
  haren::write_metrics_report(cfg.out, report);
  print_report(report);
  return 0;
}

template <std::floating_point T>
int cmd_layer_sweep(const haren::RunConfig& cfg) {
  prepare_out(cfg);
  const auto samples = haren::load_samples<T>(haren::read_manifest(manifest_path(cfg)));
  const auto rows = haren::layer_sweep<T>(samples, cfg.model, cfg.train, cfg.sweep_layers);
  std::ofstream out(fs::path(cfg.out) / haren::report_files::kLayerSweep,
                    std::ios::trunc | std::ios::binary);
  haren::write_layer_sweep_csv(out, rows);
  std::cout << "layer  macro_f1  sd\n";
  for (const auto& r : rows) {
    std::printf("%5zu  %8.4f  %.4f\n", r.layer, r.macro_f1.mean, r.macro_f1.sd);
  }
  return 0;
}

int cmd_analyze(const haren::RunConfig& cfg) {
  prepare_out(cfg);
  std::ifstream in(targets_path(cfg));
  if (!in) throw haren::ConfigError("cannot open target cache " + targets_path(cfg).string());
  Json cache;
  try {
    cache = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw haren::FormatError(targets_path(cfg).string() + ": " + e.what());
  }
  const std::size_t k = cache.at("k").get<std::size_t>();
  std::vector<const Json*> segs;
  for (const auto& s : cache.at("segments")) segs.push_back(&s);
  if (cfg.analysis.sample_segments && cfg.analysis.sample_segments < segs.size()) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(segs.begin(), segs.end(), rng);
    segs.resize(cfg.analysis.sample_segments);
  }
  std::vector<std::uint64_t> counts[2] = {std::vector<std::uint64_t>(k, 0),
                                          std::vector<std::uint64_t>(k, 0)};
  for (const Json* s : segs) {
    const int label = s->at("label").get<int>();
    const auto c = s->at("centroid_counts").get<std::vector<std::uint64_t>>();
    if (c.size() != k || (label != 0 && label != 1)) {
      throw haren::FormatError("malformed segment entry in target cache");
    }
    for (std::size_t i = 0; i < k; ++i) counts[label][i] += c[i];
  }
  const auto usage = haren::usage_stats(counts[0], counts[1]);
  const auto rep = haren::significance_report(usage, {cfg.analysis.alpha, cfg.analysis.bonferroni});
  std::ofstream out(fs::path(cfg.out) / haren::report_files::kCentroids,
                    std::ios::trunc | std::ios::binary);
  haren::write_significance_csv(out, rep);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "  id   freq_nd    freq_d      diff       chi2          p\n";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    std::printf("%4zu  %8.5f  %8.5f  %+8.5f  %9.4f  %9.3g %s\n", r.id, r.freq_nd, r.freq_d,
                r.difference, r.test.statistic, r.test.p_value, rep.flagged[i] ? "*" : "");
  }
  std::cout << rep.flag_count << " of " << rep.rows.size() << " centroids flagged at p < "
            << rep.threshold << '\n';
  return 0;
}

int cmd_gradcheck() {
  const auto rows = haren::gradcheck_model();
  bool ok = true;
  std::cout << "group        checked  max_rel_err  worst              status\n";
  for (const auto& r : rows) {
    std::printf("%-11s  %7zu  %11.3e  %-17s  %s\n", r.group.c_str(), r.checked, r.max_rel_err,
                r.worst.c_str(), r.pass ? "ok" : "FAIL");
    ok = ok && r.pass;
  }
  if (!ok) {
    for (const auto& r : rows)
      if (!r.pass) std::cerr << "gradient mismatch in " << r.group << " at " << r.worst << '\n';
  }
  return ok ? 0 : 1;
}

template <class Fn32, class Fn64>
int by_precision(const haren::RunConfig& cfg, Fn32&& f32, Fn64&& f64) {
  return cfg.precision == 32 ? f32() : f64();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"haren: hierarchical layer fusion with CTC-supervised depression detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Run seed");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--precision", f.precision, "Floating-point width")->check(CLI::IsMember({32, 64}));
  app.add_option("--set", f.sets, "Override one configuration key (key=value)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--subjects", f.subjects, "Subjects per class as NDxD");
  synth->add_option("--frames", f.frames, "Frames per segment");

  auto* gen = app.add_subcommand("gen-labels", "Fit the codebook and cache CTC targets");
  gen->add_option("--manifest", f.manifest, "Corpus manifest");
  gen->add_option("--k", f.k, "Centroids per class");
  gen->add_option("--targets", f.targets, "Target cache path");

  auto* train = app.add_subcommand("train", "Run the configured scenario");
  auto* eval = app.add_subcommand("eval", "Score saved parameters");
  auto* crossval = app.add_subcommand("crossval", "Stratified k-fold generalization run");
  auto* sweep = app.add_subcommand("layer-sweep", "Single-layer baseline per encoder layer");
  for (auto* sub : {train, eval, crossval, sweep}) {
    sub->add_option("--manifest", f.manifest, "Corpus manifest");
    sub->add_option("--ablation", f.ablation, "none, no-haren or no-ctc");
    sub->add_option("--epochs", f.epochs, "Training epochs");
    sub->add_option("--k", f.k, "Centroids per class");
  }
  train->add_option("--scenario", f.scenario, "upper-bound or generalization");
  for (auto* sub : {train, crossval, sweep}) sub->add_option("--folds", f.folds, "Folds");
  sweep->add_option("--scenario", f.scenario, "upper-bound or generalization");
  eval->add_option("--params", f.params, "Parameter file (default <out>/params.hrnp)");
  eval->add_option("--split", f.split, "Only score segments with this split tag");

  auto* analyze = app.add_subcommand("analyze", "Centroid usage and chi-square tests");
  analyze->add_option("--targets", f.targets, "Target cache (default <out>/targets.json)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");

  CLI11_PARSE(app, argc, argv);

  try {
    haren::RunConfig cfg = resolve_config(app, f);
    CLI::App* sub = app.get_subcommands().front();
    apply_subcommand_flags(*sub, f, cfg);
    cfg.validate();

    if (sub == synth) return cmd_synth(cfg);
    if (sub == gen) return cmd_gen_labels(cfg);
    if (sub == train) {
      return by_precision(cfg, [&] { return cmd_train<float>(cfg, false); },
                          [&] { return cmd_train<double>(cfg, false); });
    }
    if (sub == crossval) {
      return by_precision(cfg, [&] { return cmd_train<float>(cfg, true); },
                          [&] { return cmd_train<double>(cfg, true); });
    }
    if (sub == eval) {
      return by_precision(cfg, [&] { return cmd_eval<float>(cfg, f); },
                          [&] { return cmd_eval<double>(cfg, f); });
    }
    if (sub == sweep) {
      return by_precision(cfg, [&] { return cmd_layer_sweep<float>(cfg); },
                          [&] { return cmd_layer_sweep<double>(cfg); });
    }
    if (sub == analyze) return cmd_analyze(cfg);
    if (sub == gradcheck) return cmd_gradcheck();
  } catch (const haren::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
