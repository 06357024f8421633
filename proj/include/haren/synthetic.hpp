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

// Seeded stand-in for a corpus of encoder features. Every layer of every
// frame is i.i.d. standard normal. Depressed subjects additionally carry a
// mean shift of `marker_strength` on a random `marker_density` fraction of
// frames, over a fixed block of dimensions, in the shallow layers (first
// third) and/or the deep layers (last third) depending on the layout. The
// tokenization channel gets its own shift on the same frames.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "haren/dataio.hpp"
#include "haren/errors.hpp"
#include "haren/model.hpp"
#include "haren/tensor.hpp"

namespace haren {

enum class MarkerLayout {
  kBoth,         // every marker frame shifts shallow and deep layers
  kShallowOnly,
  kDeepOnly,
  kSplit,        // alternate depressed subjects carry shallow-only / deep-only markers
};

struct SyntheticSpec {
  std::size_t subjects_nd = 8;
  std::size_t subjects_d = 8;
  std::size_t segments_per_subject = 4;
  std::size_t frames = 64;
  std::size_t layers = 4;
  std::size_t dim = 32;
  std::size_t token_dim = 8;
  double marker_density = 0.1;
  double marker_strength = 3.0;  // 0 yields a null corpus
  std::size_t marker_dims = 0;   // 0 -> max(1, dim / 8)
  MarkerLayout layout = MarkerLayout::kBoth;
  double frame_rate = 50.0;
  double dev_fraction = 0.25;  // per class, tagged "dev"; the rest "train"
  std::uint64_t seed = 7;

  std::size_t effective_marker_dims() const {
    return marker_dims ? marker_dims : std::max<std::size_t>(1, dim / 8);
  }

  void validate() const {
    if (subjects_nd == 0 || subjects_d == 0) throw ParameterError("need subjects in both classes");
    if (segments_per_subject == 0 || frames == 0) throw ParameterError("empty segments");
    if (layers < 2) throw ParameterError("need at least 2 layers");
    if (dim == 0 || token_dim == 0) throw ParameterError("dims must be positive");
    if (!(marker_density > 0 && marker_density < 1)) {
      throw ParameterError("marker density must lie in (0, 1)");
    }
    if (!(marker_strength >= 0) || !std::isfinite(marker_strength)) {
      throw ParameterError("marker strength must be finite and >= 0");
    }
    if (2 * effective_marker_dims() > dim) throw ParameterError("marker dims exceed half the width");
    if (!(dev_fraction >= 0 && dev_fraction < 1)) throw ParameterError("dev fraction must lie in [0, 1)");
    if (!(frame_rate > 0)) throw ParameterError("frame rate must be > 0");
  }
};

// Layers in each marker group: the first and last third of the stack.
inline std::size_t marker_group_size(std::size_t layers) {
  return std::max<std::size_t>(1, layers / 3);
}

struct SyntheticSegment {
  std::string subject_id;
  Label label = Label::kNonDepressed;
  std::string split;
  LayerStack<float> stack;
  std::vector<std::size_t> marker_frames;  // empty for controls
};

struct SyntheticCorpus {
  SyntheticSpec spec;
  std::vector<SyntheticSegment> segments;
};

inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t group = marker_group_size(spec.layers);
  const std::size_t mdims = spec.effective_marker_dims();
  const std::size_t tdims = std::max<std::size_t>(1, spec.token_dim / 4);
  const auto marked = static_cast<std::size_t>(
      std::llround(spec.marker_density * double(spec.frames)));

  SyntheticCorpus corpus;
  corpus.spec = spec;
  auto emit_class = [&](Label label, std::size_t count, const char* prefix) {
    const auto n_dev = static_cast<std::size_t>(std::llround(spec.dev_fraction * double(count)));
    for (std::size_t s = 0; s < count; ++s) {
      char sid[32];
      std::snprintf(sid, sizeof sid, "%s%03zu", prefix, s);
      const bool shallow = spec.layout == MarkerLayout::kBoth ||
                           spec.layout == MarkerLayout::kShallowOnly ||
                           (spec.layout == MarkerLayout::kSplit && s % 2 == 0);
      const bool deep = spec.layout == MarkerLayout::kBoth ||
                        spec.layout == MarkerLayout::kDeepOnly ||
                        (spec.layout == MarkerLayout::kSplit && s % 2 == 1);
      for (std::size_t seg = 0; seg < spec.segments_per_subject; ++seg) {
        SyntheticSegment out;
        out.subject_id = sid;
        out.label = label;
        out.split = s + n_dev >= count ? "dev" : "train";
        char segid[48];
        std::snprintf(segid, sizeof segid, "%s_seg%02zu", sid, seg);
        out.stack.segment_id = segid;
        out.stack.subject_id = sid;
        out.stack.frame_rate = spec.frame_rate;
        for (std::size_t l = 0; l < spec.layers; ++l) {
          Tensor<float> layer({spec.frames, spec.dim});
          for (float& v : layer.values()) v = static_cast<float>(normal(rng));
          out.stack.layers.push_back(std::move(layer));
        }
        // The token channel views the same frames as the encoder: a copy of
        // the middle layer, widened with fresh noise past `dim`.
        const auto& mid = out.stack.layers[spec.layers / 2];
        Tensor<float> tok({spec.frames, spec.token_dim});
        for (std::size_t t = 0; t < spec.frames; ++t)
          for (std::size_t j = 0; j < spec.token_dim; ++j)
            tok(t, j) = j < spec.dim ? mid(t, j) : static_cast<float>(normal(rng));

        if (label == Label::kDepressed) {
          std::vector<std::size_t> order(spec.frames);
          std::iota(order.begin(), order.end(), std::size_t{0});
          std::shuffle(order.begin(), order.end(), rng);
          out.marker_frames.assign(order.begin(), order.begin() + marked);
          std::sort(out.marker_frames.begin(), out.marker_frames.end());
          const auto shift = static_cast<float>(spec.marker_strength);
          for (std::size_t t : out.marker_frames) {
            if (shallow)
              for (std::size_t l = 0; l < group; ++l)
                for (std::size_t j = 0; j < mdims; ++j) out.stack.layers[l](t, j) += shift;
            if (deep)
              for (std::size_t l = spec.layers - group; l < spec.layers; ++l)
                for (std::size_t j = mdims; j < 2 * mdims; ++j) out.stack.layers[l](t, j) += shift;
            for (std::size_t j = 0; j < tdims; ++j) tok(t, j) += shift;
          }
        }
        out.stack.token_features = std::move(tok);
        corpus.segments.push_back(std::move(out));
      }
    }
  };
  emit_class(Label::kNonDepressed, spec.subjects_nd, "nd");
  emit_class(Label::kDepressed, spec.subjects_d, "d");
  return corpus;
}

// Writes one feature file per segment under `dir` plus manifest.tsv; returns
// the manifest path.
inline std::filesystem::path write_corpus(const SyntheticCorpus& corpus,
                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  Manifest m;
  m.base_dir = dir;
  for (const auto& seg : corpus.segments) {
    const std::filesystem::path rel = std::filesystem::path("features") /
                                      (seg.stack.segment_id + ".hrnf");
    write_feature_file(dir / rel, seg.stack);
    m.entries.push_back({seg.subject_id, seg.label, rel, seg.split,
                         double(seg.stack.frames()) / seg.stack.frame_rate});
  }
  const auto path = dir / "manifest.tsv";
  write_manifest(path, m);
  return path;
}

}  // namespace haren
