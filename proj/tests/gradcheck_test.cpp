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

#include "haren/gradcheck.hpp"

#include <gtest/gtest.h>

#include <set>

namespace haren {
namespace {

TEST(GradCheck, EveryModelGroupPasses) {
  const auto rows = gradcheck_model();
  std::set<std::string> groups;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.pass) << r.group << " " << r.max_rel_err << " at " << r.worst;
    EXPECT_GT(r.checked, 0u);
    groups.insert(r.group);
  }
  EXPECT_TRUE(groups.count("ctc_logits"));
  EXPECT_GE(groups.size(), 5u);
}

TEST(GradCheck, CorruptedAdjointIsCaught) {
  // x*x recorded with a backward rule that drops the factor 2.
  Tensor<double> x({2, 3});
  for (std::size_t i = 0; i < 6; ++i) x[i] = 0.3 * double(i) - 0.7;
  const auto rows = check_gradients(
      {{"x", "broken", x}}, [](Graph<double>& g, std::span<const Var> v) {
        const Var in = v[0];
        Tensor<double> out = g.value(in);
        for (double& e : out.values()) e *= e;
        const Var sq = g.record(std::move(out), {in}, [in](Graph<double>& gg, const Tensor<double>& up) {
          if (auto* gr = gg.grad_slot(in)) {
            const auto& xv = gg.value(in);
            for (std::size_t i = 0; i < up.size(); ++i) (*gr)[i] += up[i] * xv[i];
          }
        });
        return sum(g, sq);
      });
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].pass);
  EXPECT_NEAR(rows[0].max_rel_err, 0.5, 1e-6);
}

TEST(GradCheck, CorrectRuleOnSameFunctionPasses) {
  Tensor<double> x({2, 3});
  for (std::size_t i = 0; i < 6; ++i) x[i] = 0.3 * double(i) - 0.7;
  const auto rows = check_gradients({{"x", "ok", x}}, [](Graph<double>& g, std::span<const Var> v) {
    return sum(g, mul(g, v[0], v[0]));
  });
  EXPECT_TRUE(rows[0].pass) << rows[0].max_rel_err;
}

}  // namespace
}  // namespace haren
