// Copyright 2026 The LOMo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "lomo/inference.hpp"
#include "test_util.hpp"

namespace lomo {
namespace {

using testing::make_sample;

// Builds a sample whose frames are unit vectors so that template i's
// response at frame f is responses[i][f].
struct ResponseInstance {
  Model model;
  SequenceSample sample;
};

ResponseInstance from_responses(const std::vector<std::vector<double>>& r, std::size_t t) {
  const std::size_t m = r.size(), n = r.front().size();
  ResponseInstance inst{Model::zeros(m, n), {}};
  inst.model.coverage = t;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t f = 0; f < n; ++f) inst.model.templates(i, f) = r[i][f];
  inst.sample.id = "resp";
  inst.sample.label = 1;
  inst.sample.frames = Matrix(n, n);
  for (std::size_t f = 0; f < n; ++f) inst.sample.frames(f, f) = 1.0;
  return inst;
}

// Oracle: every ordered M-tuple of frames honoring the spacing.
double exhaustive_best(const Model& m, const SequenceSample& s, std::size_t t,
                       std::size_t* count = nullptr) {
  const std::size_t n = s.length(), ev = m.events();
  std::vector<std::size_t> k(ev, 0);
  double best = -1e300;
  std::size_t feasible = 0;
  while (true) {
    if (testing::separated(k, t)) {
      ++feasible;
      best = std::max(best, testing::direct_score(m, s, k));
    }
    std::size_t i = ev;
    while (i > 0 && ++k[i - 1] == n) k[--i] = 0;
    if (i == 0) break;
  }
  if (count) *count = feasible;
  return best;
}

TEST(EffectiveT, NoClamp) { EXPECT_EQ(effective_t(300, 3, 50), 50u); }
TEST(EffectiveT, CappedByLengthOverEvents) { EXPECT_EQ(effective_t(12, 3, 50), 4u); }
TEST(EffectiveT, SpanClampEngages) { EXPECT_EQ(effective_t(3, 3, 5), 0u); }
TEST(EffectiveT, SingleEventUsesFirstCapOnly) { EXPECT_EQ(effective_t(10, 1, 50), 10u); }

TEST(EffectiveT, ShortSequenceRejected) {
  try {
    effective_t(2, 3, 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "sequence shorter than number of events");
  }
}

TEST(EffectiveT, AlwaysLeavesRoomForAllEvents) {
  for (std::size_t m = 1; m <= 5; ++m)
    for (std::size_t n = m; n <= 40; ++n)
      for (std::size_t t = 0; t <= 45; t += 3) {
        const std::size_t te = effective_t(n, m, t);
        EXPECT_LE(te, t);
        EXPECT_LE((m - 1) * (te + 1) + 1, n) << n << " " << m << " " << t;
      }
}

TEST(Greedy, HandSimulation) {
  auto inst = from_responses({{5, 1, 1, 4}, {0, 9, 8, 0}}, 1);
  const auto a = infer_greedy(inst.model, inst.sample);
  EXPECT_EQ(a.k, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(a.perm_rank, 1u);
  EXPECT_DOUBLE_EQ(a.template_score, (5.0 + 8.0) / 2.0);
}

TEST(Greedy, ZeroModelSpacesPicksFromTheStart) {
  Rng rng(2);
  for (std::size_t t : {0u, 1u, 3u}) {
    Model m = Model::zeros(4, 3);
    m.coverage = t;
    const auto s = testing::random_sample(25, 3, rng);
    const auto a = infer_greedy(m, s);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.k[i], i * (t + 1));
  }
}

TEST(Greedy, SingleEventIsArgmax) {
  auto inst = from_responses({{1, 3, 2}}, 0);
  const auto g = infer_greedy(inst.model, inst.sample);
  const auto d = infer_dp(inst.model, inst.sample);
  const auto b = infer_brute(inst.model, inst.sample);
  EXPECT_EQ(g.k, std::vector<std::size_t>{1});
  EXPECT_EQ(d.k, g.k);
  EXPECT_EQ(b.k, g.k);
  EXPECT_DOUBLE_EQ(b.total, 3.0);
}

TEST(Greedy, PassesOverPicksThatStrandLaterTemplates) {
  // Taking the middle frame would leave nothing two apart from it.
  auto inst = from_responses({{0, 5, 0}, {1, 1, 1}}, 1);
  const auto a = infer_greedy(inst.model, inst.sample);
  EXPECT_TRUE(testing::separated(a.k, 1));
  EXPECT_EQ(a.k, (std::vector<std::size_t>{0, 2}));
}

TEST(Greedy, StrictCoverageRejectsInfeasibleRequest) {
  Model m = Model::zeros(3, 2);
  Rng rng(1);
  const auto s = testing::random_sample(5, 2, rng);
  InferenceConfig cfg;
  cfg.coverage_t = 2;
  cfg.clamp = false;
  EXPECT_THROW(infer_greedy(m, s, cfg), NumericError);
  cfg.clamp = true;
  EXPECT_NO_THROW(infer_greedy(m, s, cfg));
}

TEST(Dp, MatchesExhaustiveOracle) {
  Rng rng(101);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    const std::size_t n = m + rng.below(13 - m);
    const std::size_t d = 1 + rng.below(8);
    const std::size_t t = rng.below(3);
    Model model = testing::random_model(m, d, t, rng);
    const auto s = testing::random_sample(n, d, rng);
    const std::size_t te = effective_t(n, m, t);
    const auto a = infer_dp(model, s);
    EXPECT_NEAR(a.total, exhaustive_best(model, s, te), 1e-9);
    EXPECT_EQ(a.total, infer_brute(model, s).total);
    EXPECT_TRUE(testing::separated(a.k, te));
  }
}

TEST(Dp, DominatesGreedy) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(4);
    const std::size_t n = m + rng.below(60);
    const std::size_t d = 1 + rng.below(6);
    Model model = testing::random_model(m, d, rng.below(6), rng);
    const auto s = testing::random_sample(n, d, rng);
    const auto g = infer_greedy(model, s);
    const auto dp = infer_dp(model, s);
    EXPECT_GE(dp.total, g.total - 1e-12);
  }
}

TEST(Dp, GlobalTermIsAddedForMixedModels) {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    Model model = testing::random_model(2, 3, 1, rng);
    model.global_template = std::vector<double>{rng.normal(), rng.normal(), rng.normal()};
    model.gamma_g = 0.25;
    const auto s = testing::random_sample(9, 3, rng);
    const auto a = infer_dp(model, s);
    EXPECT_NEAR(a.total, exhaustive_best(model, s, 1), 1e-9);
  }
}

TEST(Dp, TieBreakingPrefersSmallestRankThenEarliestPositions) {
  Model m = Model::zeros(3, 2);
  Rng rng(4);
  const auto s = testing::random_sample(10, 2, rng);
  const auto a = infer_dp(m, s);
  EXPECT_EQ(a.perm_rank, 1u);
  EXPECT_EQ(a.k, (std::vector<std::size_t>{0, 1, 2}));
  const auto b = infer_brute(m, s);
  EXPECT_EQ(b.k, a.k);
}

TEST(Inference, Deterministic) {
  Rng rng(12);
  Model model = testing::random_model(3, 4, 2, rng);
  const auto s = testing::random_sample(30, 4, rng);
  for (Solver solver : {Solver::greedy, Solver::dp}) {
    const InferenceConfig cfg{solver, std::nullopt, true};
    const auto a = infer(model, s, cfg), b = infer(model, s, cfg);
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.total, b.total);
  }
}

TEST(Inference, ArgmaxInvariantUnderPositiveScaling) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Model model = testing::random_model(3, 4, 1, rng);
    const auto s = testing::random_sample(15, 4, rng);
    const double alpha = 0.01 + 10 * rng.uniform01();
    Model scaled = model;
    for (double& v : scaled.templates.data()) v *= alpha;
    for (double& v : scaled.ordering_costs) v *= alpha;
    const auto g0 = infer_greedy(model, s), g1 = infer_greedy(scaled, s);
    EXPECT_EQ(g0.k, g1.k);
    const auto d0 = infer_dp(model, s), d1 = infer_dp(scaled, s);
    EXPECT_EQ(d0.k, d1.k);
    EXPECT_NEAR(d1.total, alpha * d0.total, 1e-9 * (1 + std::abs(d1.total)));
  }
}

TEST(Brute, SquareInstanceEnumeratesAllPermutations) {
  Rng rng(31);
  for (std::size_t m = 1; m <= 4; ++m) {
    Model model = testing::random_model(m, 2, 0, rng);
    const auto s = testing::random_sample(m, 2, rng);
    std::size_t count = 0;
    const double best = exhaustive_best(model, s, 0, &count);
    EXPECT_EQ(count, factorial(m));
    EXPECT_NEAR(infer_brute(model, s).total, best, 1e-12);
  }
}

TEST(Brute, GuardRejectsLargeInstances) {
  Model model = Model::zeros(3, 2);
  Rng rng(1);
  const auto s = testing::random_sample(300, 2, rng);
  try {
    infer_brute(model, s);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_STREQ(e.what(), "instance too large for brute force");
  }
}

TEST(Inference, DimensionMismatch) {
  Model model = Model::zeros(2, 3);
  const auto s = make_sample({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_THROW(infer_greedy(model, s), DataError);
  EXPECT_THROW(infer_dp(model, s), DataError);
  EXPECT_THROW(infer_brute(model, s), DataError);
}

TEST(Inference, ParseSolver) {
  EXPECT_EQ(parse_solver("dp"), Solver::dp);
  EXPECT_THROW(parse_solver("viterbi"), UsageError);
}

}  // namespace
}  // namespace lomo
