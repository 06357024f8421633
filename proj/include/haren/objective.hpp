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
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "haren/autodiff.hpp"
#include "haren/errors.hpp"
#include "haren/tensor.hpp"

namespace haren {

enum class Reduction { kSum, kMean };

struct LossConfig {
  double focal_alpha = 0.5;
  double focal_gamma = 1.5;
  double ctc_weight = 1.0;
  std::size_t ctc_every_n_batches = 5;
  Reduction focal_reduction = Reduction::kSum;
  // Per-sequence CTC losses are divided by target length and averaged over
  // the batch under kMean; plain sum under kSum.
  Reduction ctc_reduction = Reduction::kMean;

  void validate() const {
    if (!(focal_alpha > 0 && focal_alpha < 1)) {
      throw ParameterError("focal_alpha must lie in (0, 1)");
    }
    if (!(focal_gamma >= 0) || !std::isfinite(focal_gamma)) {
      throw ParameterError("focal_gamma must be finite and >= 0");
    }
    if (!(ctc_weight >= 0) || !std::isfinite(ctc_weight)) {
      throw ParameterError("ctc_weight must be finite and >= 0");
    }
    if (ctc_every_n_batches == 0) throw ParameterError("ctc_every_n_batches must be positive");
  }
};

inline constexpr double kProbabilityClamp = 1e-7;

namespace detail {

struct FocalTerm {
  double value;
  double slope;  // d value / d p; zero where p was clamped
};

inline FocalTerm focal_term(double p, int y, double alpha, double gamma) {
  const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  if (y == 1) {
    const double q = 1.0 - p;
    const double mod = std::pow(q, gamma);
    const double value = -alpha * mod * std::log(p);
    const double dmod = gamma == 0 ? 0.0 : -gamma * std::pow(q, gamma - 1.0);
    const double slope = -alpha * (dmod * std::log(p) + mod / p);
    return {value, clamped ? 0.0 : slope};
  }
  const double mod = std::pow(p, gamma);
  const double value = -(1.0 - alpha) * mod * std::log1p(-p);
  const double dmod = gamma == 0 ? 0.0 : gamma * std::pow(p, gamma - 1.0);
  const double slope = -(1.0 - alpha) * (dmod * std::log1p(-p) - mod / (1.0 - p));
  return {value, clamped ? 0.0 : slope};
}

inline void check_focal_inputs(std::size_t n_probs, std::span<const int> labels) {
  if (n_probs != labels.size()) {
    throw ContractError("focal_loss: " + std::to_string(n_probs) + " probabilities vs " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int y : labels)
    if (y != 0 && y != 1) throw DataError("focal_loss: label must be 0 or 1");
}

}  // namespace detail

// Binary focal loss over a batch of predicted probabilities.
inline double focal_loss(std::span<const double> probs, std::span<const int> labels,
                         const LossConfig& cfg) {
  detail::check_focal_inputs(probs.size(), labels);
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    total += detail::focal_term(probs[i], labels[i], cfg.focal_alpha, cfg.focal_gamma).value;
  }
  if (cfg.focal_reduction == Reduction::kMean && !probs.empty()) total /= double(probs.size());
  return total;
}

// Graph op over a probability vector.
template <std::floating_point T>
Var focal_loss(Graph<T>& g, Var probs, std::span<const int> labels, const LossConfig& cfg) {
  const Tensor<T>& P = g.value(probs);
  detail::check_focal_inputs(P.size(), labels);
  const double norm =
      cfg.focal_reduction == Reduction::kMean ? 1.0 / double(P.size()) : 1.0;
  std::vector<T> slopes(P.size());
  double total = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const auto term = detail::focal_term(double(P[i]), labels[i], cfg.focal_alpha,
                                         cfg.focal_gamma);
    total += term.value;
    slopes[i] = T(term.slope * norm);
  }
  return g.record(Tensor<T>::scalar(T(total * norm)), {probs},
                  [probs, slopes = std::move(slopes)](Graph<T>& g, const Tensor<T>& d) {
                    if (auto* dp = g.grad_slot(probs))
                      for (std::size_t i = 0; i < slopes.size(); ++i) (*dp)[i] += d[0] * slopes[i];
                  });
}

// Batches are counted from 1; the CTC term joins on every n-th batch.
inline bool ctc_due(std::size_t batch_index, const LossConfig& cfg) {
  return cfg.ctc_weight != 0.0 && batch_index % cfg.ctc_every_n_batches == 0;
}

inline double combined_loss(double focal, std::optional<double> ctc, std::size_t batch_index,
                            const LossConfig& cfg) {
  if (ctc && ctc_due(batch_index, cfg)) return focal + cfg.ctc_weight * *ctc;
  return focal;
}

}  // namespace haren
