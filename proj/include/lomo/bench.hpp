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

// Random-instance benchmark comparing the inference solvers.

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lomo/common.hpp"
#include "lomo/core.hpp"
#include "lomo/inference.hpp"

namespace lomo {

struct BenchInstance {
  Model model;
  SequenceSample sample;
};

/// Frames ~ N(0, 1), templates ~ N(0, 1/d) so responses are ~ N(0, 1),
/// ordering costs ~ N(0, cost_scale^2).
inline BenchInstance random_instance(std::size_t n, std::size_t m, std::size_t t,
                                     std::size_t d, double cost_scale, Rng& rng) {
  BenchInstance inst;
  inst.model = Model::zeros(m, d);
  inst.model.coverage = t;
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : inst.model.templates.data()) v = w_scale * rng.normal();
  for (double& c : inst.model.ordering_costs) c = cost_scale * rng.normal();
  inst.sample.id = "bench";
  inst.sample.label = 1;
  inst.sample.frames = Matrix(n, d);
  for (double& v : inst.sample.frames.data()) v = rng.normal();
  return inst;
}

struct BenchRow {
  Solver solver = Solver::greedy;
  double total_seconds = 0.0;
  double mean_score = 0.0;
  double mean_gap_to_dp = 0.0;  // mean of (dp total - this solver's total)
};

/// Times every solver on the same `instances` random instances. Rows come
/// in the order greedy, dp, brute (brute only when requested).
inline std::vector<BenchRow> benchmark_solvers(std::size_t n, std::size_t m, std::size_t t,
                                               std::size_t d, std::size_t instances,
                                               double cost_scale, std::uint64_t seed,
                                               bool with_brute) {
  Rng rng(seed);
  std::vector<BenchInstance> insts;
  for (std::size_t i = 0; i < instances; ++i)
    insts.push_back(random_instance(n, m, t, d, cost_scale, rng));

  std::vector<Solver> solvers = {Solver::greedy, Solver::dp};
  if (with_brute) solvers.push_back(Solver::brute);
  std::vector<std::vector<double>> totals(solvers.size());
  std::vector<BenchRow> rows;
  for (std::size_t s = 0; s < solvers.size(); ++s) {
    BenchRow row;
    row.solver = solvers[s];
    const InferenceConfig cfg{solvers[s], std::nullopt, true};
    const auto start = std::chrono::steady_clock::now();
    for (const auto& inst : insts) totals[s].push_back(infer(inst.model, inst.sample, cfg).total);
    row.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  const double count = static_cast<double>(std::max<std::size_t>(instances, 1));
  for (std::size_t s = 0; s < solvers.size(); ++s) {
    double score = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
      score += totals[s][i];
      gap += totals[1][i] - totals[s][i];
    }
    rows[s].mean_score = score / count;
    rows[s].mean_gap_to_dp = gap / count;
  }
  return rows;
}

}  // namespace lomo
