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

#include "haren/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include <filesystem>
#include <fstream>
#include <map>

#include "oracles.hpp"

namespace haren {
namespace {

namespace fs = std::filesystem;

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Synthetic, CountsSplitsAndIds) {
  const auto c = generate_synthetic(SyntheticSpec{});
  EXPECT_EQ(c.segments.size(), 16u * 4u);
  std::size_t dev = 0;
  for (const auto& s : c.segments) {
    EXPECT_EQ(s.stack.layers.size(), 4u);
    EXPECT_EQ(s.stack.frames(), 64u);
    EXPECT_EQ(s.stack.token_features.cols(), 8u);
    dev += s.split == "dev";
  }
  EXPECT_EQ(dev, 2u * 2u * 4u);  // round(0.25 * 8) subjects per class
  EXPECT_EQ(c.segments.front().subject_id, "nd000");
  EXPECT_EQ(c.segments.back().stack.segment_id, "d007_seg03");
}

TEST(Synthetic, MarkerFrameCount) {
  SyntheticSpec spec;
  spec.frames = 50;
  spec.marker_density = 0.13;
  const auto c = generate_synthetic(spec);
  std::map<std::string, std::size_t> per_subject;
  for (const auto& s : c.segments) {
    if (s.label == Label::kNonDepressed) {
      EXPECT_TRUE(s.marker_frames.empty());
    } else {
      EXPECT_EQ(s.marker_frames.size(), 7u);  // round(0.13 * 50)
      per_subject[s.subject_id] += s.marker_frames.size();
    }
  }
  EXPECT_EQ(per_subject.size(), 8u);
  for (const auto& [id, n] : per_subject) EXPECT_EQ(n, 7u * spec.segments_per_subject) << id;
}

// Strength only adds a shift, so the difference of two corpora that differ
// in strength alone exposes exactly where markers were injected.
std::vector<std::size_t> shifted_layers(const SyntheticSegment& strong, const SyntheticSegment& null,
                                        std::size_t* dims_lo, std::size_t* dims_hi) {
  std::vector<std::size_t> out;
  *dims_lo = 1000;
  *dims_hi = 0;
  for (std::size_t l = 0; l < strong.stack.layers.size(); ++l) {
    bool any = false;
    for (std::size_t t = 0; t < strong.stack.frames(); ++t)
      for (std::size_t j = 0; j < strong.stack.dim(); ++j)
        if (strong.stack.layers[l](t, j) != null.stack.layers[l](t, j)) {
          any = true;
          *dims_lo = std::min(*dims_lo, j);
          *dims_hi = std::max(*dims_hi, j);
        }
    if (any) out.push_back(l);
  }
  return out;
}

TEST(Synthetic, LayoutsPlaceMarkers) {
  SyntheticSpec spec;
  spec.layers = 6;
  spec.subjects_d = 2;
  spec.segments_per_subject = 1;
  auto run = [&](MarkerLayout layout, double strength) {
    SyntheticSpec s = spec;
    s.layout = layout;
    s.marker_strength = strength;
    return generate_synthetic(s);
  };
  struct Want {
    MarkerLayout layout;
    std::vector<std::size_t> even, odd;
  };
  const std::vector<Want> cases = {
      {MarkerLayout::kBoth, {0, 1, 4, 5}, {0, 1, 4, 5}},
      {MarkerLayout::kShallowOnly, {0, 1}, {0, 1}},
      {MarkerLayout::kDeepOnly, {4, 5}, {4, 5}},
      {MarkerLayout::kSplit, {0, 1}, {4, 5}},
  };
  for (const auto& w : cases) {
    const auto strong = run(w.layout, 5);
    const auto null = run(w.layout, 0);
    const std::size_t first_d = spec.subjects_nd;
    std::size_t lo, hi;
    EXPECT_EQ(shifted_layers(strong.segments[first_d], null.segments[first_d], &lo, &hi), w.even);
    EXPECT_EQ(shifted_layers(strong.segments[first_d + 1], null.segments[first_d + 1], &lo, &hi), w.odd);
    for (std::size_t i = 0; i < first_d; ++i) {
      EXPECT_TRUE(shifted_layers(strong.segments[i], null.segments[i], &lo, &hi).empty());
      EXPECT_EQ(strong.segments[i].stack.token_features, null.segments[i].stack.token_features);
    }
  }
  // Shallow markers use dims [0, 4), deep ones [4, 8) at d = 32.
  const auto strong = run(MarkerLayout::kSplit, 5);
  const auto null = run(MarkerLayout::kSplit, 0);
  std::size_t lo, hi;
  shifted_layers(strong.segments[8], null.segments[8], &lo, &hi);
  EXPECT_EQ(lo, 0u);
  EXPECT_EQ(hi, 3u);
  shifted_layers(strong.segments[9], null.segments[9], &lo, &hi);
  EXPECT_EQ(lo, 4u);
  EXPECT_EQ(hi, 7u);
}

// Mean-pooled marker dims of the first and last layer: features an oracle
// that knows the construction would pick.
std::vector<double> oracle_features(const SyntheticSegment& s) {
  std::vector<double> f;
  for (std::size_t l : {std::size_t{0}, s.stack.layers.size() - 1}) {
    for (std::size_t j = 0; j < 8; ++j) {
      double m = 0;
      for (std::size_t t = 0; t < s.stack.frames(); ++t) m += s.stack.layers[l](t, j);
      f.push_back(m / double(s.stack.frames()));
    }
  }
  return f;
}

TEST(Synthetic, LinearProbeSeparatesClasses) {
  SyntheticSpec spec;
  spec.subjects_nd = spec.subjects_d = 16;
  const auto train = generate_synthetic(spec);
  spec.seed = 8;
  const auto test = generate_synthetic(spec);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (const auto& s : train.segments) {
    xs.push_back(oracle_features(s));
    ys.push_back(int(s.label));
  }
  const auto w = oracle::fit_logistic(xs, ys);
  std::size_t correct = 0;
  for (const auto& s : test.segments) correct += oracle::logistic_predict(w, oracle_features(s)) == int(s.label);
  EXPECT_GE(double(correct) / double(test.segments.size()), 0.95);
}

TEST(Synthetic, TokenChannelViewsTheMiddleLayer) {
  SyntheticSpec spec;
  spec.subjects_nd = spec.subjects_d = 2;
  spec.layers = 5;
  spec.dim = 6;
  spec.token_dim = 8;
  const auto corpus = generate_synthetic(spec);
  const std::size_t tdims = 2;
  for (const auto& seg : corpus.segments) {
    const auto& tok = seg.stack.token_features;
    const auto& mid = seg.stack.layers[2];
    ASSERT_EQ(tok.cols(), 8u);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const bool marker = std::binary_search(seg.marker_frames.begin(), seg.marker_frames.end(), t);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        const float shift = marker && j < tdims ? float(spec.marker_strength) : 0.0f;
        EXPECT_EQ(tok(t, j), mid(t, j) + shift);
      }
    }
  }
}

TEST(Synthetic, SameSeedWritesIdenticalBytes) {
  const fs::path a = fs::temp_directory_path() / "haren_synth_a";
  const fs::path b = fs::temp_directory_path() / "haren_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  SyntheticSpec spec;
  spec.subjects_nd = spec.subjects_d = 2;
  write_corpus(generate_synthetic(spec), a);
  write_corpus(generate_synthetic(spec), b);
  EXPECT_EQ(slurp(a / "manifest.tsv"), slurp(b / "manifest.tsv"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a / "features")) {
    EXPECT_EQ(slurp(e.path()), slurp(b / "features" / e.path().filename()));
    ++files;
  }
  EXPECT_EQ(files, 16u);
  const auto m = read_manifest(a / "manifest.tsv");
  EXPECT_EQ(m.entries.size(), 16u);
  EXPECT_EQ(*m.entries[0].duration, 64.0 / 50.0);
  spec.seed = 99;
  const auto other = generate_synthetic(spec);
  EXPECT_NE(other.segments[0].stack.layers[0], generate_synthetic(SyntheticSpec{}).segments[0].stack.layers[0]);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synthetic, Validation) {
  SyntheticSpec spec;
  spec.marker_density = 0;
  EXPECT_THROW(generate_synthetic(spec), ParameterError);
  spec = {};
  spec.marker_strength = -1;
  EXPECT_THROW(generate_synthetic(spec), ParameterError);
  spec = {};
  spec.marker_dims = 17;
  EXPECT_THROW(generate_synthetic(spec), ParameterError);
  spec = {};
  spec.subjects_d = 0;
  EXPECT_THROW(generate_synthetic(spec), ParameterError);
}

}  // namespace
}  // namespace haren
