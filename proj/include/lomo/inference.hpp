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

// Latent-assignment inference: the greedy suppression solver used during
// training, an exact dynamic program over all template orderings, and an
// exhaustive search used as a test oracle.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lomo/common.hpp"
#include "lomo/core.hpp"

namespace lomo {

enum class Solver { greedy, dp, brute };

inline std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::greedy: return "greedy";
    case Solver::dp: return "dp";
    case Solver::brute: return "brute";
  }
  return "?";
}

inline Solver parse_solver(std::string_view s) {
  if (s == "greedy") return Solver::greedy;
  if (s == "dp") return Solver::dp;
  if (s == "brute") return Solver::brute;
  throw UsageError("unknown solver '" + std::string(s) + "'");
}

struct InferenceConfig {
  Solver solver = Solver::greedy;
  std::optional<std::size_t> coverage_t;  // overrides the model's coverage
  bool clamp = true;
};

/// Coverage actually used for a sequence of n frames and m events: the
/// requested t capped at n / m, and lowered further if m events spaced t + 1
/// apart would not fit.
inline std::size_t effective_t(std::size_t n, std::size_t m, std::size_t t) {
  if (m < 1) throw UsageError("number of events must be >= 1");
  if (n < m) throw DataError("sequence shorter than number of events");
  const std::size_t t1 = std::min(t, n / m);
  if (m == 1) return t1;
  if ((m - 1) * (t1 + 1) + 1 > n) return (n - m) / (m - 1);
  return t1;
}

namespace detail {

inline std::size_t resolve_t(const Model& model, const SequenceSample& sample,
                             const InferenceConfig& cfg) {
  const std::size_t t = cfg.coverage_t.value_or(model.coverage);
  const std::size_t n = sample.length();
  const std::size_t m = model.events();
  if (cfg.clamp) return effective_t(n, m, t);
  if (n < m) throw DataError("sequence shorter than number of events");
  if ((m - 1) * (t + 1) + 1 > n)
    throw NumericError("coverage t=" + std::to_string(t) +
                       " leaves no feasible assignment for sequence '" +
                       sample.id + "'");
  return t;
}

// responses(i, f) = <w_i, x_f>
inline Matrix response_table(const Model& model, const SequenceSample& sample) {
  const std::size_t m = model.events();
  const std::size_t n = sample.length();
  Matrix r(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t f = 0; f < n; ++f)
      r(i, f) = dot(model.templates.row(i), sample.frame(f));
  return r;
}

// Largest number of frames among `alive` that can be chosen pairwise at
// least `gap` apart, stopping once `needed` is reached.
inline std::size_t packing_count(const std::vector<char>& alive,
                                 std::size_t gap, std::size_t needed) {
  std::size_t count = 0;
  std::size_t next_ok = 0;
  for (std::size_t f = 0; f < alive.size() && count < needed; ++f) {
    if (alive[f] && f >= next_ok) {
      ++count;
      next_ok = f + gap;
    }
  }
  return count;
}

inline void suppress(std::vector<char>& alive, std::size_t center,
                     std::size_t t) {
  const std::size_t lo = center >= t ? center - t : 0;
  const std::size_t hi = std::min(alive.size() - 1, center + t);
  for (std::size_t f = lo; f <= hi; ++f) alive[f] = 0;
}

// Right fold over the temporal slots; shared by dp and brute so that equal
// assignments produce bit-identical values.
inline double slot_sum(const Matrix& resp, std::span<const std::size_t> order,
                       std::span<const std::size_t> pos) {
  double s = 0.0;
  for (std::size_t j = order.size(); j-- > 0;) s = resp(order[j], pos[j]) + s;
  return s;
}

}  // namespace detail

/// Greedy suppression: templates in index order each take their best
/// remaining frame (smallest index on ties), then frames within t of the
/// pick are removed. A pick that would leave too few frames for the
/// remaining templates is passed over for the next best feasible one.
inline LatentAssignment infer_greedy(const Model& model,
                                     const SequenceSample& sample,
                                     const InferenceConfig& cfg = {}) {
  check_compatible(model, sample);
  const std::size_t t = detail::resolve_t(model, sample, cfg);
  const std::size_t m = model.events();
  const std::size_t n = sample.length();
  std::vector<char> alive(n, 1);
  std::vector<double> resp(n, 0.0);
  std::vector<std::size_t> k(m);

  for (std::size_t i = 0; i < m; ++i) {
    const auto w = model.templates.row(i);
    std::size_t best = n;
    for (std::size_t f = 0; f < n; ++f) {
      if (!alive[f]) continue;
      resp[f] = dot(w, sample.frame(f));
      if (best == n || resp[f] > resp[best]) best = f;
    }
    if (best == n) throw NumericError("greedy inference exhausted candidates");

    const std::size_t remaining = m - i - 1;
    auto feasible_after = [&](std::size_t f) {
      if (remaining == 0) return true;
      std::vector<char> trial = alive;
      detail::suppress(trial, f, t);
      return detail::packing_count(trial, t + 1, remaining) >= remaining;
    };
    if (!feasible_after(best)) {
      std::vector<std::size_t> order;
      for (std::size_t f = 0; f < n; ++f)
        if (alive[f]) order.push_back(f);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return resp[a] > resp[b]; });
      best = n;
      for (std::size_t f : order) {
        if (feasible_after(f)) {
          best = f;
          break;
        }
      }
      if (best == n) throw NumericError("greedy inference exhausted candidates");
    }
    k[i] = best;
    detail::suppress(alive, best, t);
  }
  return score_fixed(model, sample, k, t);
}

/// Exact maximizer. For each temporal ordering of the templates a suffix
/// dynamic program with running maxima places the templates at positions
/// at least t + 1 apart in O(N M); the ordering cost is added afterwards.
/// Ties go to the smallest rank, then to the lexicographically smallest
/// position tuple.
inline LatentAssignment infer_dp(const Model& model,
                                 const SequenceSample& sample,
                                 const InferenceConfig& cfg = {}) {
  check_compatible(model, sample);
  const std::size_t t = detail::resolve_t(model, sample, cfg);
  const std::size_t m = model.events();
  const std::size_t n = sample.length();
  const std::size_t gap = t + 1;
  const Matrix resp = detail::response_table(model, sample);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // suffix_best(j, p): best sum over slots j..m-1 with slot j at some q >= p
  // suffix_arg(j, p): smallest such q
  Matrix suffix_best(m, n + 1, kNegInf);
  std::vector<std::size_t> suffix_arg(m * (n + 1), n);
  std::vector<std::size_t> order(m), pos(m), best_pos(m);
  std::uint64_t best_rank = 0;
  double best_value = kNegInf;
  const std::uint64_t n_orders = factorial(m);

  for (std::uint64_t rank = 1; rank <= n_orders; ++rank) {
    const auto pattern = pattern_from_rank(rank, m);
    for (std::size_t i = 0; i < m; ++i) order[pattern[i]] = i;

    for (std::size_t j = m; j-- > 0;) {
      suffix_best(j, n) = kNegInf;
      suffix_arg[j * (n + 1) + n] = n;
      for (std::size_t p = n; p-- > 0;) {
        double g = kNegInf;
        if (j + 1 == m) {
          g = resp(order[j], p);
        } else if (p + gap < n) {
          const double tail = suffix_best(j + 1, p + gap);
          if (tail != kNegInf) g = resp(order[j], p) + tail;
        }
        if (g != kNegInf && g >= suffix_best(j, p + 1)) {
          suffix_best(j, p) = g;
          suffix_arg[j * (n + 1) + p] = p;
        } else {
          suffix_best(j, p) = suffix_best(j, p + 1);
          suffix_arg[j * (n + 1) + p] = suffix_arg[j * (n + 1) + p + 1];
        }
      }
    }
    if (suffix_best(0, 0) == kNegInf)
      throw NumericError("no feasible latent assignment");
    pos[0] = suffix_arg[0];
    for (std::size_t j = 1; j < m; ++j)
      pos[j] = suffix_arg[j * (n + 1) + pos[j - 1] + gap];

    const double value = detail::slot_sum(resp, order, pos) /
                             static_cast<double>(m) +
                         model.cost(rank);
    if (best_rank == 0 || value > best_value) {
      best_value = value;
      best_rank = rank;
      for (std::size_t j = 0; j < m; ++j) best_pos[order[j]] = pos[j];
    }
  }
  return score_fixed(model, sample, best_pos, t);
}

inline constexpr double kBruteForceLimit = 1e7;

/// Exhaustive search over every feasible assignment; a reference for
/// infer_dp with identical tie-breaking.
inline LatentAssignment infer_brute(const Model& model,
                                    const SequenceSample& sample,
                                    const InferenceConfig& cfg = {}) {
  check_compatible(model, sample);
  const std::size_t m = model.events();
  const std::size_t n = sample.length();
  if (std::pow(static_cast<double>(n), static_cast<double>(m)) > kBruteForceLimit)
    throw NumericError("instance too large for brute force");
  const std::size_t t = detail::resolve_t(model, sample, cfg);
  const Matrix resp = detail::response_table(model, sample);

  std::vector<std::size_t> k(m, 0), best_k;
  std::vector<std::size_t> order(m), pos(m), best_sorted;
  std::uint64_t best_rank = 0;
  double best_value = 0.0;

  auto feasible = [&]() {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const std::size_t g = k[i] > k[j] ? k[i] - k[j] : k[j] - k[i];
        if (g < t + 1) return false;
      }
    return true;
  };

  while (true) {
    if (feasible()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return k[a] < k[b]; });
      for (std::size_t j = 0; j < m; ++j) pos[j] = k[order[j]];
      const std::uint64_t rank = perm_rank(k);
      const double value =
          detail::slot_sum(resp, order, pos) / static_cast<double>(m) +
          model.cost(rank);
      const bool better =
          best_rank == 0 || value > best_value ||
          (value == best_value &&
           (rank < best_rank || (rank == best_rank && pos < best_sorted)));
      if (better) {
        best_value = value;
        best_rank = rank;
        best_k = k;
        best_sorted = pos;
      }
    }
    bool done = true;
    for (std::size_t i = m; i-- > 0;) {
      if (++k[i] < n) {
        done = false;
        break;
      }
      k[i] = 0;
    }
    if (done) break;
  }
  if (best_rank == 0) throw NumericError("no feasible latent assignment");
  return score_fixed(model, sample, best_k, t);
}

inline LatentAssignment infer(const Model& model, const SequenceSample& sample,
                              const InferenceConfig& cfg = {}) {
  switch (cfg.solver) {
    case Solver::greedy: return infer_greedy(model, sample, cfg);
    case Solver::dp: return infer_dp(model, sample, cfg);
    case Solver::brute: return infer_brute(model, sample, cfg);
  }
  throw UsageError("unknown solver");
}

/// score_fixed with the clamped coverage of the model.
inline LatentAssignment score_fixed(const Model& model,
                                    const SequenceSample& sample,
                                    std::span<const std::size_t> k) {
  return score_fixed(model, sample, k,
                     effective_t(sample.length(), model.events(), model.coverage));
}

}  // namespace lomo
