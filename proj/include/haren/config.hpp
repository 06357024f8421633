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

// Run configuration: one flat JSON object with dotted keys. Layers apply in
// order defaults < config file < HAREN_OUT (output dir only) < command line.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "haren/analysis.hpp"
#include "haren/errors.hpp"
#include "haren/model.hpp"
#include "haren/objective.hpp"
#include "haren/pipeline.hpp"
#include "haren/synthetic.hpp"

namespace haren {

using Json = nlohmann::ordered_json;

struct AnalysisConfig {
  double alpha = 0.05;
  bool bonferroni = false;
  std::size_t sample_segments = 0;  // 0 analyzes every segment
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  int precision = 64;
  std::string manifest;
  std::string targets;  // token cache for analyze; default <out>/targets.json
  Ablation ablation = Ablation::kNone;
  ModelConfig model;
  TrainConfig train;
  SyntheticSpec synth;
  AnalysisConfig analysis;
  std::vector<std::size_t> sweep_layers;  // empty sweeps every layer

  void validate() const {
    if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
    if (out.empty()) throw ConfigError("output directory must not be empty");
    model.validate();
    train.validate();
    if (!(analysis.alpha > 0 && analysis.alpha < 1)) throw ConfigError("analysis.alpha must lie in (0, 1)");
  }
};

namespace detail {

inline std::string_view to_string(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

inline Reduction parse_reduction(std::string_view s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  throw ConfigError("unknown reduction \"" + std::string(s) + "\"");
}

inline std::string_view to_string(MarkerLayout l) {
  switch (l) {
    case MarkerLayout::kShallowOnly: return "shallow";
    case MarkerLayout::kDeepOnly: return "deep";
    case MarkerLayout::kSplit: return "split";
    default: return "both";
  }
}

inline MarkerLayout parse_layout(std::string_view s) {
  if (s == "both") return MarkerLayout::kBoth;
  if (s == "shallow") return MarkerLayout::kShallowOnly;
  if (s == "deep") return MarkerLayout::kDeepOnly;
  if (s == "split") return MarkerLayout::kSplit;
  throw ConfigError("unknown marker layout \"" + std::string(s) + "\"");
}

struct ConfigKey {
  const char* name;
  std::function<Json(const RunConfig&)> get;
  std::function<void(RunConfig&, const Json&)> set;
};

template <class V>
V as(const Json& j, const char* key) {
  try {
    if constexpr (std::is_same_v<V, std::size_t> || std::is_same_v<V, std::uint64_t>) {
      if (!j.is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_same_v<V, double>) {
      if (!j.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<V, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<V, int>) {
      if (!j.is_number_integer()) throw ConfigError("");
    } else {
      if (!j.is_string()) throw ConfigError("");
    }
    return j.get<V>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + j.dump());
  }
}

#define HAREN_KEY(NAME, TYPE, FIELD)                                            \
  ConfigKey {                                                                  \
    NAME, [](const RunConfig& c) { return Json(c.FIELD); },                    \
        [](RunConfig& c, const Json& j) { c.FIELD = as<TYPE>(j, NAME); }       \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      HAREN_KEY("seed", std::uint64_t, seed),
      HAREN_KEY("out", std::string, out),
      HAREN_KEY("precision", int, precision),
      HAREN_KEY("manifest", std::string, manifest),
      HAREN_KEY("targets", std::string, targets),
      {"ablation", [](const RunConfig& c) { return Json(std::string(to_string(c.ablation))); },
       [](RunConfig& c, const Json& j) { c.ablation = parse_ablation(as<std::string>(j, "ablation")); }},
      {"scenario", [](const RunConfig& c) { return Json(std::string(to_string(c.train.scenario))); },
       [](RunConfig& c, const Json& j) {
         c.train.scenario = parse_scenario(as<std::string>(j, "scenario"));
       }},
      HAREN_KEY("train.folds", std::size_t, train.folds),
      HAREN_KEY("train.epochs", std::size_t, train.epochs),
      HAREN_KEY("train.batch_size", std::size_t, train.batch_size),
      HAREN_KEY("train.learning_rate", double, train.learning_rate),
      HAREN_KEY("train.weight_decay", double, train.weight_decay),
      HAREN_KEY("train.crop_frames", std::size_t, train.crop_frames),
      HAREN_KEY("train.eval_every", std::size_t, train.eval_every),
      HAREN_KEY("train.kmeans_max_iter", std::size_t, train.kmeans_max_iter),
      HAREN_KEY("train.kmeans_max_frames", std::size_t, train.kmeans_max_frames),
      HAREN_KEY("loss.focal_alpha", double, train.loss.focal_alpha),
      HAREN_KEY("loss.focal_gamma", double, train.loss.focal_gamma),
      HAREN_KEY("loss.ctc_weight", double, train.loss.ctc_weight),
      HAREN_KEY("loss.ctc_every_n_batches", std::size_t, train.loss.ctc_every_n_batches),
      {"loss.focal_reduction",
       [](const RunConfig& c) { return Json(std::string(to_string(c.train.loss.focal_reduction))); },
       [](RunConfig& c, const Json& j) {
         c.train.loss.focal_reduction = parse_reduction(as<std::string>(j, "loss.focal_reduction"));
       }},
      {"loss.ctc_reduction",
       [](const RunConfig& c) { return Json(std::string(to_string(c.train.loss.ctc_reduction))); },
       [](RunConfig& c, const Json& j) {
         c.train.loss.ctc_reduction = parse_reduction(as<std::string>(j, "loss.ctc_reduction"));
       }},
      HAREN_KEY("model.layers", std::size_t, model.layers),
      HAREN_KEY("model.dim", std::size_t, model.dim),
      HAREN_KEY("model.heads", std::size_t, model.heads),
      HAREN_KEY("model.ffn_dim", std::size_t, model.ffn_dim),
      HAREN_KEY("model.centroids", std::size_t, model.centroids),
      HAREN_KEY("model.decay_alpha", double, model.decay_alpha),
      HAREN_KEY("model.dropout", double, model.dropout),
      HAREN_KEY("model.ctc_pool_stride", std::size_t, model.ctc_pool_stride),
      HAREN_KEY("model.baseline_layer", std::size_t, model.baseline_layer),
      HAREN_KEY("synth.subjects_nd", std::size_t, synth.subjects_nd),
      HAREN_KEY("synth.subjects_d", std::size_t, synth.subjects_d),
      HAREN_KEY("synth.segments", std::size_t, synth.segments_per_subject),
      HAREN_KEY("synth.frames", std::size_t, synth.frames),
      HAREN_KEY("synth.token_dim", std::size_t, synth.token_dim),
      HAREN_KEY("synth.marker_density", double, synth.marker_density),
      HAREN_KEY("synth.marker_strength", double, synth.marker_strength),
      HAREN_KEY("synth.marker_dims", std::size_t, synth.marker_dims),
      {"synth.layout", [](const RunConfig& c) { return Json(std::string(to_string(c.synth.layout))); },
       [](RunConfig& c, const Json& j) { c.synth.layout = parse_layout(as<std::string>(j, "synth.layout")); }},
      HAREN_KEY("synth.frame_rate", double, synth.frame_rate),
      HAREN_KEY("synth.dev_fraction", double, synth.dev_fraction),
      HAREN_KEY("analysis.alpha", double, analysis.alpha),
      HAREN_KEY("analysis.bonferroni", bool, analysis.bonferroni),
      HAREN_KEY("analysis.sample_segments", std::size_t, analysis.sample_segments),
      {"sweep.layers", [](const RunConfig& c) { return Json(c.sweep_layers); },
       [](RunConfig& c, const Json& j) {
         if (!j.is_array()) throw ConfigError("sweep.layers must be an array of layer indices");
         c.sweep_layers.clear();
         for (const auto& x : j) c.sweep_layers.push_back(as<std::size_t>(x, "sweep.layers"));
       }},
  };
  return keys;
}

#undef HAREN_KEY

inline const ConfigKey& find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (name == k.name) return k;
  throw ConfigError("unknown configuration key \"" + std::string(name) + "\"");
}

}  // namespace detail

inline Json to_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const auto& k : detail::config_keys()) j[k.name] = k.get(cfg);
  return j;
}

// Applies every key of a flat object; unknown keys are rejected.
inline void apply_json(RunConfig& cfg, const Json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) detail::find_key(key).set(cfg, value);
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  apply_json(cfg, j);
}

// "key=value"; the value is read as JSON when it parses, else as a string.
inline void apply_assignment(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("expected key=value, got \"" + std::string(assignment) + "\"");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  detail::find_key(key).set(cfg, value);
}

inline void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv("HAREN_OUT"); dir && *dir) cfg.out = dir;
}

inline void write_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace haren
