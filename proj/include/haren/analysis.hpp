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

// Centroid usage between the depressed (D) and non-depressed (ND) groups,
// with one 2x2 chi-square test of independence per centroid. Frames are
// pooled across subjects within a group.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "haren/errors.hpp"

namespace haren {

struct ChiSquare {
  double statistic = 0;
  double p_value = 1;
  double min_expected = 0;
  bool expected_ok = true;  // every expected cell count >= 5
};

// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi_square_p_value(double statistic) {
  if (!(statistic >= 0)) throw ParameterError("chi-square statistic must be >= 0");
  return std::erfc(std::sqrt(statistic / 2.0));
}

// Table [[a, b], [c, d]]; no continuity correction.
inline ChiSquare chi_square_2x2(double a, double b, double c, double d) {
  for (double x : {a, b, c, d}) {
    if (!(x >= 0) || !std::isfinite(x)) throw ParameterError("contingency counts must be finite and >= 0");
  }
  const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    throw UndefinedTestError("chi-square test undefined: a row or column of the table sums to 0");
  }
  const double n = r1 + r2;
  const double det = a * d - b * c;
  ChiSquare out;
  out.statistic = n * det * det / (r1 * r2 * c1 * c2);
  out.p_value = chi_square_p_value(out.statistic);
  out.min_expected = std::min(std::min(r1 * c1, r1 * c2), std::min(r2 * c1, r2 * c2)) / n;
  out.expected_ok = out.min_expected >= 5.0;
  return out;
}

struct CentroidRow {
  std::size_t id = 0;
  std::uint64_t count_nd = 0;
  std::uint64_t count_d = 0;
  double freq_nd = 0;
  double freq_d = 0;
  double difference = 0;  // freq_d - freq_nd
  bool testable = false;  // false when no frame of either group used the centroid
  ChiSquare test;
};

struct CentroidUsage {
  std::uint64_t total_nd = 0;
  std::uint64_t total_d = 0;
  std::vector<CentroidRow> rows;
};

// Counts of raw (unshifted) centroid indices in [0, k).
inline std::vector<std::uint64_t> count_centroids(std::span<const std::vector<int>> token_lists,
                                                  std::size_t k) {
  std::vector<std::uint64_t> counts(k, 0);
  for (const auto& list : token_lists) {
    for (int t : list) {
      if (t < 0 || static_cast<std::size_t>(t) >= k) {
        throw DataError("centroid index " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
      }
      ++counts[static_cast<std::size_t>(t)];
    }
  }
  return counts;
}

inline CentroidUsage usage_stats(std::span<const std::uint64_t> counts_nd,
                                 std::span<const std::uint64_t> counts_d) {
  if (counts_nd.size() != counts_d.size()) {
    throw DimensionError("usage_stats: " + std::to_string(counts_nd.size()) + " ND centroids vs " +
                         std::to_string(counts_d.size()) + " D centroids");
  }
  CentroidUsage u;
  for (std::size_t c = 0; c < counts_nd.size(); ++c) {
    u.total_nd += counts_nd[c];
    u.total_d += counts_d[c];
  }
  if (u.total_nd == 0 || u.total_d == 0) {
    throw ContractError("usage_stats: both groups need at least one frame (ND=" +
                        std::to_string(u.total_nd) + ", D=" + std::to_string(u.total_d) + ")");
  }
  for (std::size_t c = 0; c < counts_nd.size(); ++c) {
    CentroidRow r;
    r.id = c;
    r.count_nd = counts_nd[c];
    r.count_d = counts_d[c];
    r.freq_nd = double(r.count_nd) / double(u.total_nd);
    r.freq_d = double(r.count_d) / double(u.total_d);
    r.difference = r.freq_d - r.freq_nd;
    const double a = double(r.count_d), b = double(u.total_d - r.count_d);
    const double cc = double(r.count_nd), d = double(u.total_nd - r.count_nd);
    r.testable = a + cc > 0 && b + d > 0;
    if (r.testable) r.test = chi_square_2x2(a, b, cc, d);
    u.rows.push_back(r);
  }
  return u;
}

struct SignificanceOptions {
  double alpha = 0.05;
  bool bonferroni = false;  // divide alpha by the number of testable centroids
};

struct SignificanceReport {
  double alpha = 0.05;
  double threshold = 0.05;  // per-test cut-off after any correction
  std::vector<CentroidRow> rows;
  std::vector<bool> flagged;
  std::size_t flag_count = 0;
  std::vector<std::string> warnings;
};

// Flags centroids with p strictly below the threshold.
inline SignificanceReport significance_report(const CentroidUsage& usage,
                                              const SignificanceOptions& opt = {}) {
  if (!(opt.alpha > 0 && opt.alpha < 1)) throw ParameterError("alpha must lie in (0, 1)");
  SignificanceReport rep;
  rep.alpha = opt.alpha;
  std::size_t testable = 0;
  for (const auto& r : usage.rows) testable += r.testable;
  rep.threshold = opt.bonferroni && testable > 0 ? opt.alpha / double(testable) : opt.alpha;
  rep.rows = usage.rows;
  for (const auto& r : usage.rows) {
    const bool flag = r.testable && r.test.p_value < rep.threshold;
    rep.flagged.push_back(flag);
    rep.flag_count += flag;
    if (!r.testable) {
      rep.warnings.push_back("centroid " + std::to_string(r.id) + " unused in both groups; not tested");
    } else if (!r.test.expected_ok) {
      rep.warnings.push_back("centroid " + std::to_string(r.id) + " has an expected count of " +
                             std::to_string(r.test.min_expected) + " (< 5)");
    }
  }
  return rep;
}

// Plot data: one row per centroid.
inline constexpr const char* kSignificanceCsvHeader =
    "id,count_nd,count_d,freq_nd,freq_d,diff,chi2,p,min_expected,flag";

inline void write_significance_csv(std::ostream& out, const SignificanceReport& rep) {
  out << kSignificanceCsvHeader << '\n';
  char buf[256];
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.id,
                  static_cast<unsigned long long>(r.count_nd),
                  static_cast<unsigned long long>(r.count_d), r.freq_nd, r.freq_d, r.difference,
                  r.test.statistic, r.test.p_value, r.test.min_expected, rep.flagged[i] ? 1 : 0);
    out << buf;
  }
}

}  // namespace haren
