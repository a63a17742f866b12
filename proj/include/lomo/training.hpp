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

// Stochastic subgradient training of the latent ordinal model and the
// regularized hinge objective it minimizes.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lomo/common.hpp"
#include "lomo/core.hpp"
#include "lomo/inference.hpp"

namespace lomo {

struct TrainConfig {
  std::size_t events = 3;
  double eta = 0.05;
  double lambda1 = 1e-5;
  double lambda2 = 0.0;
  double gamma_g = 0.0;
  std::size_t coverage_t = 0;
  std::uint64_t maxiter = 10000;
  std::uint64_t seed = 0;
  Pooling pooling = Pooling::mean;
  bool ordinal_enabled = true;
  double init_scale = 1e-4;
  Solver solver = Solver::greedy;
  // Iterations between objective evaluations; 0 picks maxiter / 100.
  std::uint64_t trace_interval = 0;

  void validate() const {
    if (events < 1 || events > kMaxEvents)
      throw UsageError("number of events must be in [1, 8]");
    if (!std::isfinite(eta) || eta <= 0.0)
      throw UsageError("learning rate must be finite and > 0");
    if (!std::isfinite(lambda1) || lambda1 < 0.0 || !std::isfinite(lambda2) ||
        lambda2 < 0.0)
      throw UsageError("regularization weights must be finite and >= 0");
    if (!(gamma_g >= 0.0 && gamma_g <= 1.0))
      throw UsageError("gamma_g must lie in [0, 1]");
    if (!std::isfinite(init_scale) || init_scale < 0.0)
      throw UsageError("init_scale must be finite and >= 0");
  }

  InferenceConfig inference() const { return {solver, std::nullopt, true}; }
};

struct TracePoint {
  std::uint64_t iteration = 0;
  double objective = 0.0;
};

struct TrainReport {
  Model model;
  std::vector<TracePoint> trace;
  std::uint64_t violations = 0;
  double seconds = 0.0;
};

/// Templates (and the global template when gamma_g > 0) drawn i.i.d. from
/// U[0, init_scale]; ordering costs start at zero.
inline Model init_model(const TrainConfig& cfg, std::size_t dim,
                        std::uint64_t seed) {
  cfg.validate();
  if (dim < 1) throw UsageError("feature dimension must be >= 1");
  Model m = Model::zeros(cfg.events, dim);
  m.gamma_g = cfg.gamma_g;
  m.pooling = cfg.pooling;
  m.coverage = cfg.coverage_t;
  Rng rng(seed);
  for (double& v : m.templates.data()) v = rng.uniform(0.0, cfg.init_scale);
  if (cfg.gamma_g > 0.0) {
    std::vector<double> g(dim);
    for (double& v : g) v = rng.uniform(0.0, cfg.init_scale);
    m.global_template = std::move(g);
  }
  return m;
}

/// One stochastic update in place. Returns true when the sample violated
/// the margin (y * s < 1); otherwise the model is left untouched.
inline bool sgd_update(Model& model, const SequenceSample& sample,
                       const TrainConfig& cfg) {
  check_compatible(model, sample);
  const LatentAssignment a = infer(model, sample, cfg.inference());
  const double y = static_cast<double>(sample.label);
  if (y * a.total >= 1.0) return false;

  const double eta = cfg.eta;
  const double local = eta * (1.0 - cfg.gamma_g) * y;
  const double shrink_w = 1.0 - cfg.lambda1 * eta;
  const std::size_t m = model.events();
  const std::size_t d = model.dim();
  for (std::size_t i = 0; i < m; ++i) {
    auto w = model.templates.row(i);
    const auto x = sample.frame(a.k[i]);
    for (std::size_t j = 0; j < d; ++j)
      w[j] = w[j] * shrink_w + local * x[j] / static_cast<double>(m);
  }
  if (cfg.ordinal_enabled) {
    const double shrink_c = 1.0 - cfg.lambda2 * eta;
    for (double& c : model.ordering_costs) c *= shrink_c;
    model.ordering_costs[a.perm_rank - 1] += local;
  }
  if (model.global_template) {
    const auto xg = pool(sample, model.pooling);
    auto& g = *model.global_template;
    const double step = eta * cfg.gamma_g * y;
    for (std::size_t j = 0; j < d; ++j) g[j] = g[j] * shrink_w + step * xg[j];
  }
  return true;
}

inline Model sgd_step(Model model, const SequenceSample& sample,
                      const TrainConfig& cfg) {
  sgd_update(model, sample, cfg);
  return model;
}

/// (lambda1/2)(sum ||w_i||^2 + ||w_g||^2) + (lambda2/2) sum c_j^2
/// + mean hinge loss, with scores from the named solver.
inline double objective(const Model& model,
                        std::span<const SequenceSample> data,
                        const TrainConfig& cfg, Solver solver) {
  if (data.empty()) throw DataError("objective: empty dataset");
  double wsq = squared_norm(model.templates.data());
  if (model.global_template) wsq += squared_norm(*model.global_template);
  const double csq = squared_norm(model.ordering_costs);
  const InferenceConfig ic{solver, std::nullopt, true};
  double hinge = 0.0;
  for (const auto& s : data) {
    const double score = infer(model, s, ic).total;
    hinge += std::max(0.0, 1.0 - static_cast<double>(s.label) * score);
  }
  return 0.5 * cfg.lambda1 * wsq + 0.5 * cfg.lambda2 * csq +
         hinge / static_cast<double>(data.size());
}

inline void check_binary_dataset(std::span<const SequenceSample> data) {
  if (data.empty()) throw DataError("training set is empty");
  const std::size_t d = data.front().dim();
  for (const auto& s : data) {
    s.validate();
    if (s.dim() != d)
      throw DataError("mixed feature dimensions in training set ('" + s.id +
                      "')");
    if (s.label != 1 && s.label != -1)
      throw DataError("binary training requires labels -1/+1 ('" + s.id + "')");
  }
}

/// maxiter rounds of: draw a sample uniformly with replacement, apply
/// sgd_update. Deterministic in cfg.seed.
inline TrainReport train(std::span<const SequenceSample> data,
                         const TrainConfig& cfg) {
  cfg.validate();
  check_binary_dataset(data);
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.model = init_model(cfg, data.front().dim(), derive_seed(cfg.seed, 0));
  Rng rng(derive_seed(cfg.seed, 1));

  const std::uint64_t interval =
      cfg.trace_interval > 0 ? cfg.trace_interval
                             : std::max<std::uint64_t>(1, cfg.maxiter / 100);
  auto record = [&](std::uint64_t it) {
    report.trace.push_back(
        {it, objective(report.model, data, cfg, cfg.solver)});
  };
  record(0);
  for (std::uint64_t it = 1; it <= cfg.maxiter; ++it) {
    const auto& s = data[static_cast<std::size_t>(rng.below(data.size()))];
    if (sgd_update(report.model, s, cfg)) ++report.violations;
    if (it % interval == 0 || it == cfg.maxiter) record(it);
  }
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

}  // namespace lomo
