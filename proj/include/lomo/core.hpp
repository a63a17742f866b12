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

// Domain types of the latent ordinal model, the permutation rank of a
// latent assignment, and scoring of a sequence under a fixed assignment.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lomo/common.hpp"

namespace lomo {

/// One labeled sequence: N frames of dimension d stored as matrix rows.
/// Binary labels are -1/+1; multiclass labels are class indices >= 0.
struct SequenceSample {
  std::string id;
  int label = 0;
  std::optional<std::string> group;
  Matrix frames;

  std::size_t length() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
  std::span<const double> frame(std::size_t f) const { return frames.row(f); }

  void validate() const {
    if (frames.rows() == 0)
      throw DataError("sequence '" + id + "' has no frames");
    if (frames.cols() == 0)
      throw DataError("sequence '" + id + "' has zero feature dimension");
    if (!all_finite(frames.data()))
      throw DataError("sequence '" + id + "' contains a non-finite value");
  }
};

enum class Pooling { mean, max };

inline std::string_view to_string(Pooling p) {
  return p == Pooling::mean ? "mean" : "max";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::mean;
  if (s == "max") return Pooling::max;
  throw UsageError("unknown pooling mode '" + std::string(s) + "'");
}

/// Temporal pooling over all frames, coordinate-wise. Mean pooling sums
/// each coordinate in sorted order, so the result is bit-identical under
/// any reordering of the frames.
inline std::vector<double> pool(const SequenceSample& sample,
                                Pooling mode = Pooling::mean) {
  const std::size_t n = sample.length();
  const std::size_t d = sample.dim();
  if (n == 0) throw DataError("pool: empty sequence");
  std::vector<double> out(d);
  if (mode == Pooling::max) {
    std::copy(sample.frame(0).begin(), sample.frame(0).end(), out.begin());
    for (std::size_t f = 1; f < n; ++f) {
      const auto x = sample.frame(f);
      for (std::size_t j = 0; j < d; ++j) out[j] = std::max(out[j], x[j]);
    }
    return out;
  }
  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t f = 0; f < n; ++f) column[f] = sample.frames(f, j);
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    out[j] = sum / static_cast<double>(n);
  }
  return out;
}

/// Model parameters: M sub-event templates, one cost per temporal ordering
/// of the templates (M! entries, indexed by perm_rank - 1), and an optional
/// global template mixed in with weight gamma_g.
struct Model {
  Matrix templates;  // M x d
  std::vector<double> ordering_costs;
  std::optional<std::vector<double>> global_template;
  double gamma_g = 0.0;
  Pooling pooling = Pooling::mean;
  std::size_t coverage = 0;

  std::size_t events() const noexcept { return templates.rows(); }
  std::size_t dim() const noexcept { return templates.cols(); }

  static Model zeros(std::size_t events, std::size_t dim) {
    if (events < 1 || events > kMaxEvents)
      throw UsageError("number of events must be in [1, 8]");
    Model m;
    m.templates = Matrix(events, dim);
    m.ordering_costs.assign(factorial(events), 0.0);
    return m;
  }

  // Cost for a 1-based permutation rank.
  double cost(std::uint64_t rank) const { return ordering_costs.at(rank - 1); }

  void validate() const {
    const std::size_t m = events();
    if (m < 1 || m > kMaxEvents)
      throw UsageError("number of events must be in [1, 8]");
    if (dim() < 1) throw UsageError("model dimension must be >= 1");
    if (ordering_costs.size() != factorial(m))
      throw DataError("ordering cost table must have M! entries");
    if (!(gamma_g >= 0.0 && gamma_g <= 1.0))
      throw UsageError("gamma_g must lie in [0, 1]");
    if (global_template) {
      if (global_template->size() != dim())
        throw DataError("global template dimension mismatch");
    } else if (gamma_g != 0.0) {
      throw UsageError("gamma_g > 0 requires a global template");
    }
    if (!all_finite(templates.data()) || !all_finite(ordering_costs) ||
        (global_template && !all_finite(*global_template)))
      throw NumericError("model contains a non-finite parameter");
  }
};

/// The chosen frame per template (0-based, indexed by template), the rank
/// of their temporal order pattern, and the score parts.
struct LatentAssignment {
  std::vector<std::size_t> k;
  std::uint64_t perm_rank = 1;
  double template_score = 0.0;
  double ordering_cost = 0.0;
  double global_score = 0.0;
  double total = 0.0;
};

/// Lexicographic rank (1-based) of the order pattern of `k` among all M!
/// patterns, via the Lehmer code. Entries must be distinct.
template <std::ranges::random_access_range R>
std::uint64_t perm_rank(const R& k) {
  const std::size_t m = std::ranges::size(k);
  if (m < 1 || m > 20) throw UsageError("perm_rank: length must be in [1, 20]");
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::uint64_t smaller_after = 0;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (k[j] == k[i]) throw NumericError("tied latent positions");
      if (k[j] < k[i]) ++smaller_after;
    }
    rank = rank * (m - i) + smaller_after;
  }
  return rank + 1;
}

inline std::uint64_t perm_rank(std::initializer_list<long long> k) {
  return perm_rank(std::vector<long long>(k));
}

/// Inverse of perm_rank: the 0-based order pattern with the given rank, i.e.
/// pattern[i] is the temporal slot of entry i.
inline std::vector<std::size_t> pattern_from_rank(std::uint64_t rank,
                                                  std::size_t m) {
  if (m < 1 || m > 20 || rank < 1 || rank > factorial(m))
    throw UsageError("pattern_from_rank: rank out of range");
  std::uint64_t code = rank - 1;
  std::vector<std::size_t> digits(m);
  for (std::size_t i = m; i-- > 0;) {
    const std::uint64_t base = m - i;
    digits[i] = static_cast<std::size_t>(code % base);
    code /= base;
  }
  std::vector<std::size_t> items(m);
  for (std::size_t i = 0; i < m; ++i) items[i] = i;
  std::vector<std::size_t> pattern(m);
  for (std::size_t i = 0; i < m; ++i) {
    pattern[i] = items[digits[i]];
    items.erase(items.begin() + static_cast<std::ptrdiff_t>(digits[i]));
  }
  return pattern;
}

inline void check_compatible(const Model& model, const SequenceSample& sample) {
  if (model.dim() != sample.dim())
    throw DataError("dimension mismatch: model has d=" +
                    std::to_string(model.dim()) + ", sequence '" + sample.id +
                    "' has d=" + std::to_string(sample.dim()));
}

inline double global_score(const Model& model, const SequenceSample& sample) {
  if (!model.global_template) return 0.0;
  const auto xg = pool(sample, model.pooling);
  return dot(*model.global_template, xg);
}

inline double combine(double gamma_g, double global, double local) {
  return gamma_g * global + (1.0 - gamma_g) * local;
}

/// Score of `sample` under the latent assignment `k`, where every pair of
/// chosen frames must be at least `t + 1` apart.
inline LatentAssignment score_fixed(const Model& model,
                                    const SequenceSample& sample,
                                    std::span<const std::size_t> k,
                                    std::size_t t) {
  check_compatible(model, sample);
  const std::size_t m = model.events();
  if (k.size() != m)
    throw UsageError("latent assignment must have one index per template");
  for (std::size_t i = 0; i < m; ++i) {
    if (k[i] >= sample.length())
      throw UsageError("latent index out of range");
    for (std::size_t j = i + 1; j < m; ++j) {
      const std::size_t gap = k[i] > k[j] ? k[i] - k[j] : k[j] - k[i];
      if (gap < t + 1)
        throw NumericError("latent positions violate the coverage constraint");
    }
  }
  LatentAssignment a;
  a.k.assign(k.begin(), k.end());
  a.perm_rank = perm_rank(a.k);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    sum += dot(model.templates.row(i), sample.frame(k[i]));
  a.template_score = sum / static_cast<double>(m);
  a.ordering_cost = model.cost(a.perm_rank);
  a.global_score = global_score(model, sample);
  a.total = combine(model.gamma_g, a.global_score,
                    a.template_score + a.ordering_cost);
  return a;
}

}  // namespace lomo
