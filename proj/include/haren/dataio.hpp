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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "haren/binio.hpp"
#include "haren/errors.hpp"
#include "haren/model.hpp"
#include "haren/tensor.hpp"
#include "haren/tokens.hpp"

namespace haren {

// ---------------------------------------------------------------------------
// Feature files
//
//   "HRNF"  u32 version  u32 L  u32 T  u32 d  f64 frame_rate
//   L*T*d f32 layer payload, ordered [layer][frame][dim]
//   u32 d_tok  T*d_tok f32 tokenization payload, ordered [frame][dim]
//
// All fields little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureFileVersion = 1;

inline binio::Writer encode_feature_file(const LayerStack<float>& stack) {
  stack.validate();
  binio::Writer w;
  w.bytes("HRNF");
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(stack.layers.size()));
  w.u32(static_cast<std::uint32_t>(stack.frames()));
  w.u32(static_cast<std::uint32_t>(stack.dim()));
  w.f64(stack.frame_rate);
  for (const auto& layer : stack.layers)
    for (float v : layer.values()) w.f32(v);
  const std::size_t d_tok = stack.token_features.empty() ? 0 : stack.token_features.cols();
  w.u32(static_cast<std::uint32_t>(d_tok));
  for (float v : stack.token_features.values()) w.f32(v);
  return w;
}

inline void write_feature_file(const std::filesystem::path& path, const LayerStack<float>& stack) {
  encode_feature_file(stack).save(path);
}

inline LayerStack<float> decode_feature_file(binio::Reader& r) {
  r.expect_magic("HRNF");
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    r.fail("unsupported feature file version " + std::to_string(version));
  }
  const std::size_t L = r.u32("layer count");
  const std::size_t T = r.u32("frame count");
  const std::size_t d = r.u32("dim");
  if (L < 2 || T == 0 || d == 0) {
    r.fail("invalid extents L=" + std::to_string(L) + " T=" + std::to_string(T) +
           " d=" + std::to_string(d));
  }
  LayerStack<float> stack;
  stack.frame_rate = r.f64("frame rate");
  if (!(stack.frame_rate > 0) || !std::isfinite(stack.frame_rate)) r.fail("frame rate must be > 0");
  r.require_payload(L * T * d, 4, "layer payload");
  auto read_block = [&](std::size_t rows, std::size_t cols) {
    std::vector<float> values(rows * cols);
    for (float& v : values) {
      v = r.f32("payload");
      if (!std::isfinite(v)) r.fail("non-finite payload value");
    }
    return Tensor<float>({rows, cols}, std::move(values));
  };
  for (std::size_t l = 0; l < L; ++l) stack.layers.push_back(read_block(T, d));
  const std::size_t d_tok = r.u32("token dim");
  if (d_tok > 0) {
    r.require_payload(T * d_tok, 4, "token payload");
    stack.token_features = read_block(T, d_tok);
  }
  r.expect_end();
  return stack;
}

inline LayerStack<float> read_feature_file(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  LayerStack<float> stack = decode_feature_file(r);
  stack.segment_id = path.stem().string();
  return stack;
}

// ---------------------------------------------------------------------------
// Manifest: tab-separated, one segment per line, fixed header
//   subject_id  label  path  split  duration
// split and duration may be empty. Relative paths resolve against the
// manifest's directory.
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestHeader = "subject_id\tlabel\tpath\tsplit\tduration";

struct ManifestEntry {
  std::string subject_id;
  Label label = Label::kNonDepressed;
  std::filesystem::path path;
  std::string split;
  std::optional<double> duration;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const {
    return e.path.is_absolute() ? e.path : base_dir / e.path;
  }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

}  // namespace detail

inline Manifest parse_manifest(std::istream& in, std::filesystem::path base_dir,
                               const std::string& source = "manifest") {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw FormatError(source + ": missing header \"" + std::string(kManifestHeader) + "\"");
  }
  std::size_t line_no = 1;
  std::vector<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.subject_id = f[0];
    if (e.subject_id.empty()) throw FormatError(where + ": empty subject_id");
    if (f[1] != "0" && f[1] != "1") throw DataError(where + ": label must be 0 or 1");
    e.label = label_from_int(f[1] == "1");
    e.path = f[2];
    if (f[2].empty()) throw FormatError(where + ": empty path");
    e.split = f[3];
    if (!f[4].empty()) {
      try {
        e.duration = std::stod(f[4]);
      } catch (const std::exception&) {
        throw FormatError(where + ": bad duration \"" + f[4] + "\"");
      }
    }
    for (const auto& [sid, p] : seen) {
      if (sid == e.subject_id && p == f[2]) {
        throw DataError(where + ": duplicate (subject, file) pair");
      }
    }
    seen.emplace_back(e.subject_id, f[2]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& e : m.entries) {
    out << e.subject_id << '\t' << static_cast<int>(e.label) << '\t' << e.path.generic_string()
        << '\t' << e.split << '\t';
    if (e.duration) {
      std::ostringstream d;
      d.precision(17);
      d << *e.duration;
      out << d.str();
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cropping and sampling
// ---------------------------------------------------------------------------

inline std::size_t frames_for_seconds(double seconds, double frame_rate) {
  if (!(seconds > 0) || !(frame_rate > 0)) throw ParameterError("seconds and frame rate must be > 0");
  return static_cast<std::size_t>(std::llround(seconds * frame_rate));
}

// Uniform random contiguous window of `target_frames`, at one offset shared
// by every layer and the tokenization features. Short stacks pass through.
template <std::floating_point T>
LayerStack<T> crop_segment(const LayerStack<T>& stack, std::size_t target_frames,
                           std::uint64_t seed, std::size_t* offset_out = nullptr) {
  if (target_frames == 0) throw ParameterError("crop target must be at least one frame");
  const std::size_t total = stack.frames();
  if (total <= target_frames) {
    if (offset_out) *offset_out = 0;
    return stack;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - target_frames);
  const std::size_t offset = pick(rng);
  if (offset_out) *offset_out = offset;

  auto window = [&](const Tensor<T>& m) {
    Tensor<T> out({target_frames, m.cols()});
    std::copy(m.data() + offset * m.cols(), m.data() + (offset + target_frames) * m.cols(),
              out.data());
    return out;
  };
  LayerStack<T> out;
  out.frame_rate = stack.frame_rate;
  out.segment_id = stack.segment_id;
  out.subject_id = stack.subject_id;
  for (const auto& l : stack.layers) out.layers.push_back(window(l));
  if (!stack.token_features.empty()) out.token_features = window(stack.token_features);
  return out;
}

// Draws segment indices with replacement, weighting each by the inverse
// frequency of its class so both classes are drawn equally often.
class WeightedSampler {
 public:
  WeightedSampler(std::span<const Label> labels, std::uint64_t seed) : rng_(seed) {
    std::size_t counts[2] = {0, 0};
    for (Label l : labels) ++counts[static_cast<int>(l)];
    if (counts[0] == 0 || counts[1] == 0) {
      throw ConfigError("weighted sampler needs both classes present (ND=" +
                        std::to_string(counts[0]) + ", D=" + std::to_string(counts[1]) + ")");
    }
    weights_.reserve(labels.size());
    for (Label l : labels) weights_.push_back(1.0 / double(counts[static_cast<int>(l)]));
    dist_ = std::discrete_distribution<std::size_t>(weights_.begin(), weights_.end());
  }

  std::size_t next() { return dist_(rng_); }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::mt19937_64 rng_;
  std::vector<double> weights_;
  std::discrete_distribution<std::size_t> dist_;
};

}  // namespace haren
