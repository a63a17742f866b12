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

// Evaluation: ranking and classification metrics, fold construction,
// cross-validation, staged hyperparameter grid search and the search over
// late-fusion weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lomo/common.hpp"
#include "lomo/core.hpp"
#include "lomo/data.hpp"
#include "lomo/inference.hpp"
#include "lomo/parallel.hpp"
#include "lomo/pipeline.hpp"
#include "lomo/training.hpp"

namespace lomo {

// ---------------------------------------------------------------------------
// Metrics. Labels are +1 (positive) / -1 (negative) unless noted.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_lengths(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw UsageError("scores and labels differ in length");
  if (!all_finite(scores)) throw NumericError("non-finite score");
}

inline std::pair<std::size_t, std::size_t> count_classes(std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y > 0 ? pos : neg)++;
  return {pos, neg};
}

}  // namespace detail

/// Mean over positives of the precision at each positive's rank; ranking
/// is by descending score with ties kept in input order.
inline double average_precision(std::span<const double> scores,
                                std::span<const int> labels) {
  detail::check_lengths(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) throw NumericError("average precision needs at least one positive");
  return sum / static_cast<double>(hits);
}

/// Unweighted mean of per-class AP.
inline double mean_average_precision(
    std::span<const std::pair<std::vector<double>, std::vector<int>>> per_class) {
  if (per_class.empty()) throw UsageError("mean_average_precision: no classes");
  double s = 0.0;
  for (const auto& [scores, labels] : per_class) s += average_precision(scores, labels);
  return s / static_cast<double>(per_class.size());
}

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counting 1/2.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_lengths(scores, labels);
  const auto [npos, nneg] = detail::count_classes(labels);
  if (npos == 0 || nneg == 0) throw NumericError("AUC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q)
      if (labels[order[q]] > 0) rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(npos), n = static_cast<double>(nneg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

/// 1 - EER, with the equal-error point linearly interpolated between ROC
/// vertices when no vertex has FPR == FNR.
inline double roc_eer_rate(std::span<const double> scores, std::span<const int> labels) {
  detail::check_lengths(scores, labels);
  const auto [npos, nneg] = detail::count_classes(labels);
  if (npos == 0 || nneg == 0) throw NumericError("ROC-EER needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // f = FPR - FNR rises from -1 at (0,0) to +1 at (1,1).
  double prev_fpr = 0.0, prev_f = -1.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0 ? tp : fp)++;
      ++j;
    }
    i = j;
    const double fpr = static_cast<double>(fp) / static_cast<double>(nneg);
    const double fnr = 1.0 - static_cast<double>(tp) / static_cast<double>(npos);
    const double f = fpr - fnr;
    if (f >= 0.0) {
      double eer = fpr;
      if (f > 0.0) {
        const double lambda = -prev_f / (f - prev_f);
        eer = prev_fpr + lambda * (fpr - prev_fpr);
      }
      return 1.0 - eer;
    }
    prev_fpr = fpr;
    prev_f = f;
  }
  return 0.0;  // unreachable: the last vertex is (1, 1)
}

/// Mean per-class recall over the classes present in `labels`.
inline double average_class_accuracy(std::span<const int> predictions,
                                     std::span<const int> labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw UsageError("average_class_accuracy: length mismatch or empty input");
  std::map<int, std::pair<std::size_t, std::size_t>> per;  // label -> (hit, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& e = per[labels[i]];
    ++e.second;
    if (predictions[i] == labels[i]) ++e.first;
  }
  double s = 0.0;
  for (const auto& [label, e] : per)
    s += static_cast<double>(e.first) / static_cast<double>(e.second);
  return s / static_cast<double>(per.size());
}

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw UsageError("accuracy: length mismatch or empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

enum class Metric { acc, avgclassacc, map, auc, eer };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::acc: return "acc";
    case Metric::avgclassacc: return "avgclassacc";
    case Metric::map: return "map";
    case Metric::auc: return "auc";
    case Metric::eer: return "eer";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (Metric m : {Metric::acc, Metric::avgclassacc, Metric::map, Metric::auc, Metric::eer})
    if (to_string(m) == s) return m;
  throw UsageError("unknown metric '" + std::string(s) + "'");
}

/// Evaluates a metric on a score table. `classes` empty means a binary
/// table (one column, labels -1/+1); otherwise column c scores class
/// classes[c]. Multiclass auc/eer/map average the one-vs-all values over
/// the classes for which they are defined. Returns nullopt when the metric
/// is undefined on this set (e.g. AUC with a single class present).
inline std::optional<double> compute_metric(Metric metric, const ScoreTable& table,
                                            std::span<const int> labels,
                                            std::span<const int> classes) {
  if (table.rows() != labels.size()) throw UsageError("score table / label mismatch");
  const bool binary = classes.empty();
  std::vector<int> predictions(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::vector<double> row(table.columns);
    for (std::size_t c = 0; c < table.columns; ++c) row[c] = table.at(r, c);
    predictions[r] = binary ? (row[0] >= 0.0 ? 1 : -1) : classes[argmax_first(row)];
  }
  switch (metric) {
    case Metric::acc: return accuracy(predictions, labels);
    case Metric::avgclassacc: return average_class_accuracy(predictions, labels);
    default: break;
  }
  auto one = [&](std::span<const double> s, std::span<const int> y) -> std::optional<double> {
    const auto [npos, nneg] = detail::count_classes(y);
    if (metric == Metric::map) {
      if (npos == 0) return std::nullopt;
      return average_precision(s, y);
    }
    if (npos == 0 || nneg == 0) return std::nullopt;
    return metric == Metric::auc ? auc(s, y) : roc_eer_rate(s, y);
  };
  if (binary) return one(table.column(0), labels);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<int> y(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) y[r] = labels[r] == classes[c] ? 1 : -1;
    if (auto v = one(table.column(c), y)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

enum class FoldPolicy { random_k_fold, group_k_fold, leave_one_group_out, fixed_from_manifest };

inline std::string_view to_string(FoldPolicy p) {
  switch (p) {
    case FoldPolicy::random_k_fold: return "random_k_fold";
    case FoldPolicy::group_k_fold: return "group_k_fold";
    case FoldPolicy::leave_one_group_out: return "leave_one_group_out";
    case FoldPolicy::fixed_from_manifest: return "fixed_from_manifest";
  }
  return "?";
}

struct FoldSpec {
  std::string name;
  FoldPolicy policy = FoldPolicy::random_k_fold;
  std::size_t count = 0;
  std::vector<std::size_t> fold_of;  // parallel to the dataset

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string group_of(const SequenceSample& s) { return s.group.value_or(s.id); }

/// Deterministic fold assignment. Group policies key on the sample's group
/// (its id when ungrouped) so no group is split; group_k_fold orders groups
/// by a seeded hash of the group id and deals them round-robin.
/// `manifest_folds` is only used by fixed_from_manifest.
inline FoldSpec make_folds(std::span<const SequenceSample> data, FoldPolicy policy,
                           std::size_t k, std::uint64_t seed,
                           std::span<const std::optional<int>> manifest_folds = {}) {
  const std::size_t n = data.size();
  if (n == 0) throw DataError("make_folds: empty dataset");
  FoldSpec fs;
  fs.policy = policy;
  fs.fold_of.assign(n, 0);
  switch (policy) {
    case FoldPolicy::random_k_fold: {
      if (k < 2 || k > n) throw UsageError("random k-fold needs 2 <= k <= samples");
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      Rng rng(seed);
      rng.shuffle(idx);
      for (std::size_t i = 0; i < n; ++i) fs.fold_of[idx[i]] = i % k;
      fs.count = k;
      fs.name = "random:" + std::to_string(k);
      break;
    }
    case FoldPolicy::group_k_fold: {
      std::set<std::string> groups;
      for (const auto& s : data) groups.insert(group_of(s));
      if (k < 2 || k > groups.size()) throw UsageError("group k-fold needs 2 <= k <= groups");
      std::vector<std::pair<std::uint64_t, std::string>> keyed;
      for (const auto& g : groups) keyed.emplace_back(mix_seed(fnv1a(g) ^ seed), g);
      std::sort(keyed.begin(), keyed.end());
      std::map<std::string, std::size_t> fold_of_group;
      for (std::size_t i = 0; i < keyed.size(); ++i) fold_of_group[keyed[i].second] = i % k;
      for (std::size_t i = 0; i < n; ++i) fs.fold_of[i] = fold_of_group[group_of(data[i])];
      fs.count = k;
      fs.name = "group:" + std::to_string(k);
      break;
    }
    case FoldPolicy::leave_one_group_out: {
      std::set<std::string> groups;
      for (const auto& s : data) groups.insert(group_of(s));
      if (groups.size() < 2) throw UsageError("leave-one-group-out needs >= 2 groups");
      std::map<std::string, std::size_t> index;
      for (const auto& g : groups) index.emplace(g, index.size());
      for (std::size_t i = 0; i < n; ++i) fs.fold_of[i] = index[group_of(data[i])];
      fs.count = groups.size();
      fs.name = "logo";
      break;
    }
    case FoldPolicy::fixed_from_manifest: {
      if (manifest_folds.size() != n)
        throw DataError("manifest folds required for every sample");
      int max_fold = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (!manifest_folds[i] || *manifest_folds[i] < 0)
          throw DataError("sample '" + data[i].id + "' has no fold in the manifest");
        fs.fold_of[i] = static_cast<std::size_t>(*manifest_folds[i]);
        max_fold = std::max(max_fold, *manifest_folds[i]);
      }
      fs.count = static_cast<std::size_t>(max_fold) + 1;
      fs.name = "manifest";
      break;
    }
  }
  for (std::size_t f = 0; f < fs.count; ++f)
    if (fs.members(f).empty())
      throw DataError("fold " + std::to_string(f) + " is empty");
  if (fs.count < 2) throw DataError("cross-validation needs at least 2 folds");
  return fs;
}

/// Parses "random:K", "group:K", "logo" or "manifest".
inline std::pair<FoldPolicy, std::size_t> parse_fold_option(std::string_view s) {
  auto number = [&](std::string_view rest) {
    std::size_t k = 0;
    if (!detail::parse_number(rest, k)) throw UsageError("bad fold count in '" + std::string(s) + "'");
    return k;
  };
  if (s.starts_with("random:")) return {FoldPolicy::random_k_fold, number(s.substr(7))};
  if (s.starts_with("group:")) return {FoldPolicy::group_k_fold, number(s.substr(6))};
  if (s == "logo") return {FoldPolicy::leave_one_group_out, 0};
  if (s == "manifest") return {FoldPolicy::fixed_from_manifest, 0};
  throw UsageError("unknown fold policy '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Held-out scores of every fold.
struct FoldScores {
  std::vector<ScoreTable> tables;                 // one per fold
  std::vector<std::vector<std::size_t>> test;     // dataset indices per fold
  std::vector<std::size_t> train_sizes;
};

inline std::vector<int> labels_of(std::span<const SequenceSample> data,
                                  std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i].label);
  return out;
}

/// Trains on all folds but one and scores the held-out fold, for every
/// fold. `classes` empty selects binary training.
inline FoldScores cross_validate_scores(std::span<const SequenceSample> data,
                                        const FoldSpec& folds, const ModelSpec& spec,
                                        std::span<const int> classes,
                                        const InferenceConfig& icfg, std::size_t jobs = 1) {
  if (folds.fold_of.size() != data.size())
    throw UsageError("fold assignment does not match the dataset");
  struct One {
    ScoreTable table;
    std::vector<std::size_t> test;
    std::size_t train_size;
  };
  auto results = parallel_map(folds.count, jobs, [&](std::size_t f) {
    std::vector<SequenceSample> train_set, test_set;
    std::vector<std::size_t> test_idx;
    std::set<std::string> train_ids;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (folds.fold_of[i] == f) {
        test_set.push_back(data[i]);
        test_idx.push_back(i);
      } else {
        train_set.push_back(data[i]);
        train_ids.insert(data[i].id);
      }
    }
    for (const auto& s : test_set)
      if (train_ids.count(s.id))
        throw std::logic_error("sample '" + s.id + "' appears in both train and test fold");
    ModelSpec fold_spec = spec;
    fold_spec.config.seed = derive_seed(spec.config.seed, 5000 + f);
    const Classifier c =
        classes.empty() ? train_binary(train_set, fold_spec)
                        : train_multiclass(train_set, fold_spec,
                                           std::vector<int>(classes.begin(), classes.end()));
    return One{score_table(c, test_set, icfg), std::move(test_idx), train_set.size()};
  });
  FoldScores out;
  for (auto& r : results) {
    out.tables.push_back(std::move(r.table));
    out.test.push_back(std::move(r.test));
    out.train_sizes.push_back(r.train_size);
  }
  return out;
}

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::map<std::string, std::optional<double>> metrics;
};

struct ClassBreakdown {
  int label = 0;
  std::size_t support = 0;
  double recall = 0.0;
  std::optional<double> ap;
};

struct EvalReport {
  nlohmann::ordered_json config;
  std::string fold_name;
  std::vector<Metric> metrics;
  std::vector<FoldResult> folds;
  std::map<std::string, std::optional<double>> aggregate;
  std::vector<ClassBreakdown> per_class;
  std::vector<int> confusion_labels;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  nlohmann::ordered_json extra;

  std::optional<double> value(Metric m) const { return aggregate.at(std::string(to_string(m))); }
};

inline std::string fingerprint(const nlohmann::ordered_json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  using oj = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? oj(*v) : oj(); };
  oj j;
  j["version"] = 1;
  j["config_fingerprint"] = fingerprint(r.config);
  j["config"] = r.config;
  j["folds"] = r.fold_name;
  oj per_fold = oj::array();
  for (const auto& f : r.folds) {
    oj jf;
    jf["fold"] = f.fold;
    jf["n_train"] = f.n_train;
    jf["n_test"] = f.n_test;
    oj m;
    for (Metric metric : r.metrics) m[std::string(to_string(metric))] = opt(f.metrics.at(std::string(to_string(metric))));
    jf["metrics"] = m;
    per_fold.push_back(jf);
  }
  j["per_fold"] = per_fold;
  oj agg;
  for (Metric metric : r.metrics) agg[std::string(to_string(metric))] = opt(r.aggregate.at(std::string(to_string(metric))));
  j["aggregate"] = agg;
  oj pc = oj::array();
  for (const auto& c : r.per_class) {
    oj jc;
    jc["label"] = c.label;
    jc["support"] = c.support;
    jc["recall"] = c.recall;
    jc["ap"] = opt(c.ap);
    pc.push_back(jc);
  }
  j["per_class"] = pc;
  j["confusion"] = {{"labels", r.confusion_labels}, {"counts", r.confusion}};
  if (!r.extra.is_null()) j["extra"] = r.extra;
  return j;
}

/// Metrics per fold (aggregate = mean over the folds where the metric is
/// defined), plus per-class recall/AP and confusion counts pooled over all
/// held-out predictions.
inline EvalReport evaluate_folds(std::span<const SequenceSample> data, const FoldScores& fs,
                                 std::span<const int> classes, std::span<const Metric> metrics,
                                 nlohmann::ordered_json config = {}, std::string fold_name = {}) {
  EvalReport r;
  r.config = std::move(config);
  r.fold_name = std::move(fold_name);
  r.metrics.assign(metrics.begin(), metrics.end());
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t f = 0; f < fs.tables.size(); ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.n_train = fs.train_sizes[f];
    fr.n_test = fs.test[f].size();
    const auto y = labels_of(data, fs.test[f]);
    for (Metric m : metrics) {
      const auto v = compute_metric(m, fs.tables[f], y, classes);
      fr.metrics[std::string(to_string(m))] = v;
      if (v) {
        auto& s = sums[std::string(to_string(m))];
        s.first += *v;
        ++s.second;
      }
    }
    r.folds.push_back(std::move(fr));
  }
  for (Metric m : metrics) {
    const std::string key(to_string(m));
    const auto it = sums.find(key);
    r.aggregate[key] = it == sums.end() ? std::nullopt
                                        : std::optional<double>(it->second.first /
                                                                static_cast<double>(it->second.second));
  }

  // Pool held-out predictions.
  const bool binary = classes.empty();
  r.confusion_labels = binary ? std::vector<int>{-1, 1}
                              : std::vector<int>(classes.begin(), classes.end());
  const std::size_t nc = r.confusion_labels.size();
  r.confusion.assign(nc, std::vector<std::size_t>(nc, 0));
  std::vector<int> y_all, pred_all;
  std::vector<std::vector<double>> col_scores(binary ? 1 : nc);
  for (std::size_t f = 0; f < fs.tables.size(); ++f) {
    const auto& t = fs.tables[f];
    for (std::size_t row = 0; row < t.rows(); ++row) {
      std::vector<double> s(t.columns);
      for (std::size_t c = 0; c < t.columns; ++c) {
        s[c] = t.at(row, c);
        col_scores[c].push_back(s[c]);
      }
      const int y = data[fs.test[f][row]].label;
      const int p = binary ? (s[0] >= 0.0 ? 1 : -1) : classes[argmax_first(s)];
      y_all.push_back(y);
      pred_all.push_back(p);
      auto index = [&](int label) {
        return static_cast<std::size_t>(
            std::find(r.confusion_labels.begin(), r.confusion_labels.end(), label) -
            r.confusion_labels.begin());
      };
      ++r.confusion[index(y)][index(p)];
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    const int label = r.confusion_labels[c];
    ClassBreakdown b;
    b.label = label;
    std::size_t hit = 0;
    std::vector<int> onevsall(y_all.size());
    for (std::size_t i = 0; i < y_all.size(); ++i) {
      onevsall[i] = y_all[i] == label ? 1 : -1;
      if (y_all[i] == label) {
        ++b.support;
        hit += pred_all[i] == label;
      }
    }
    b.recall = b.support ? static_cast<double>(hit) / static_cast<double>(b.support) : 0.0;
    if (b.support) {
      if (binary) {
        std::vector<double> s = col_scores[0];
        if (label < 0)
          for (double& v : s) v = -v;
        b.ap = average_precision(s, onevsall);
      } else {
        b.ap = average_precision(col_scores[c], onevsall);
      }
    }
    r.per_class.push_back(b);
  }
  return r;
}

inline nlohmann::ordered_json describe(const ModelSpec& spec, const InferenceConfig& icfg) {
  const TrainConfig c = spec.resolved();
  nlohmann::ordered_json j;
  j["model_kind"] = to_string(spec.kind);
  j["events"] = c.events;
  j["eta"] = c.eta;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["gamma_g"] = c.gamma_g;
  j["coverage_t"] = c.coverage_t;
  j["maxiter"] = c.maxiter;
  j["seed"] = c.seed;
  j["pooling"] = to_string(c.pooling);
  j["ordinal_enabled"] = c.ordinal_enabled;
  j["init_scale"] = c.init_scale;
  j["train_solver"] = to_string(c.solver);
  j["eval_solver"] = to_string(icfg.solver);
  return j;
}

inline EvalReport cross_validate(std::span<const SequenceSample> data, const FoldSpec& folds,
                                 const ModelSpec& spec, std::span<const Metric> metrics,
                                 const InferenceConfig& icfg = {}, std::size_t jobs = 1) {
  const std::vector<int> classes =
      is_binary_labels(data) ? std::vector<int>{} : class_set(data);
  const FoldScores fs = cross_validate_scores(data, folds, spec, classes, icfg, jobs);
  return evaluate_folds(data, fs, classes, metrics, describe(spec, icfg), folds.name);
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Candidate values; an empty list means "keep the spec's value".
struct Grid {
  std::vector<double> lambda1;
  std::vector<std::size_t> coverage_t;
  std::vector<double> gamma_g;
  std::vector<double> fusion_weights;
};

inline Grid parse_grid(const nlohmann::json& j) {
  Grid g;
  try {
    if (j.contains("lambda1")) g.lambda1 = j["lambda1"].get<std::vector<double>>();
    if (j.contains("coverage_t")) g.coverage_t = j["coverage_t"].get<std::vector<std::size_t>>();
    if (j.contains("gamma_g")) g.gamma_g = j["gamma_g"].get<std::vector<double>>();
    if (j.contains("fusion_weights"))
      g.fusion_weights = j["fusion_weights"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed grid: ") + e.what());
  }
  for (const char* key : {"lambda1", "coverage_t", "gamma_g", "fusion_weights"})
    if (j.contains(key) && j[key].empty())
      throw UsageError(std::string("grid list '") + key + "' is empty");
  return g;
}

struct GridRow {
  int stage = 1;
  double lambda1 = 0.0;
  std::size_t coverage_t = 0;
  double gamma_g = 0.0;
  double value = 0.0;
};

struct GridResult {
  ModelSpec best;
  double best_value = 0.0;
  std::vector<GridRow> rows;
};

inline bool gamma_is_free(ModelKind k) {
  return k == ModelKind::alomo || k == ModelKind::mil_gtp;
}

/// Staged search: stage 1 picks (lambda1, t) at the stage-1 gamma (0 for
/// kinds whose gamma is free, the pinned value otherwise); stage 2 sweeps
/// gamma with those fixed. The stage-1 gamma is not re-run in stage 2, so
/// the table has |lambda1| * |t| + |gamma \ {stage-1 gamma}| rows. Ties go
/// to smaller lambda1, then smaller t, then smaller gamma. An undefined
/// metric counts as -infinity.
inline GridResult grid_search(std::span<const SequenceSample> data, const FoldSpec& folds,
                              const ModelSpec& spec, const Grid& grid, Metric metric,
                              const InferenceConfig& icfg = {}, std::size_t jobs = 1) {
  const TrainConfig base = spec.resolved();
  auto lambdas = grid.lambda1.empty() ? std::vector<double>{base.lambda1} : grid.lambda1;
  auto ts = grid.coverage_t.empty() ? std::vector<std::size_t>{base.coverage_t} : grid.coverage_t;
  std::vector<double> gammas;
  double gamma0 = base.gamma_g;
  if (gamma_is_free(spec.kind) && !grid.gamma_g.empty()) {
    gammas = grid.gamma_g;
    gamma0 = 0.0;
  }
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(ts.begin(), ts.end());
  std::sort(gammas.begin(), gammas.end());

  auto evaluate = [&](double l1, std::size_t t, double g) {
    ModelSpec s = spec;
    s.config.lambda1 = l1;
    s.config.coverage_t = t;
    s.config.gamma_g = g;
    const EvalReport r = cross_validate(data, folds, s, std::span(&metric, 1), icfg, jobs);
    const auto v = r.value(metric);
    return v ? *v : -std::numeric_limits<double>::infinity();
  };

  GridResult out;
  double best_l1 = lambdas.front();
  std::size_t best_t = ts.front();
  double best = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (double l1 : lambdas)
    for (std::size_t t : ts) {
      const double v = evaluate(l1, t, gamma0);
      out.rows.push_back({1, l1, t, gamma0, v});
      if (first || v > best) {
        best = v;
        best_l1 = l1;
        best_t = t;
        first = false;
      }
    }
  double best_gamma = gamma0;
  for (double g : gammas) {
    if (g == gamma0) continue;
    const double v = evaluate(best_l1, best_t, g);
    out.rows.push_back({2, best_l1, best_t, g, v});
    if (v > best || (v == best && g < best_gamma)) {
      best = v;
      best_gamma = g;
    }
  }
  out.best = spec;
  out.best.config.lambda1 = best_l1;
  out.best.config.coverage_t = best_t;
  out.best.config.gamma_g = best_gamma;
  out.best_value = best;
  return out;
}

// ---------------------------------------------------------------------------
// Late-fusion weight search
// ---------------------------------------------------------------------------

/// Fuses the held-out scores of several channels fold by fold (z-score
/// statistics come from the fold being evaluated).
inline FoldScores fuse_folds(std::span<const FoldScores> channels, FusionMode mode,
                             std::span<const double> weights) {
  if (channels.empty()) throw UsageError("fuse_folds: no channels");
  FoldScores out = channels.front();
  for (std::size_t f = 0; f < out.tables.size(); ++f) {
    std::vector<ScoreTable> tables;
    for (const auto& ch : channels) {
      if (ch.test[f] != out.test[f]) throw DataError("channels use different folds");
      tables.push_back(ch.tables[f]);
    }
    out.tables[f] = late_fusion(tables, mode, weights);
  }
  return out;
}

struct FusionSearchRow {
  std::vector<double> weights;
  double value = 0.0;
};

struct FusionSearchResult {
  std::vector<double> best_weights;
  double best_value = 0.0;
  std::vector<FusionSearchRow> rows;
};

/// Every weight tuple over `candidates` except all-zero, z-score fusion;
/// ties go to the lexicographically smallest tuple.
inline FusionSearchResult search_fusion_weights(std::span<const SequenceSample> data,
                                                std::span<const FoldScores> channels,
                                                std::span<const int> classes, Metric metric,
                                                std::vector<double> candidates = {0.0, 0.5, 1.0}) {
  if (candidates.empty()) throw UsageError("no fusion weight candidates");
  std::sort(candidates.begin(), candidates.end());
  const std::size_t k = channels.size();
  std::vector<std::size_t> digit(k, 0);
  FusionSearchResult out;
  bool have = false;
  for (;;) {
    std::vector<double> w(k);
    bool nonzero = false;
    for (std::size_t i = 0; i < k; ++i) {
      w[i] = candidates[digit[i]];
      nonzero |= w[i] != 0.0;
    }
    if (nonzero) {
      const FoldScores fused = fuse_folds(channels, FusionMode::zscore_weighted, w);
      const auto r = evaluate_folds(data, fused, classes, std::span(&metric, 1));
      const auto v = r.value(metric);
      const double value = v ? *v : -std::numeric_limits<double>::infinity();
      out.rows.push_back({w, value});
      if (!have || value > out.best_value) {
        out.best_value = value;
        out.best_weights = w;
        have = true;
      }
    }
    std::size_t i = k;
    while (i > 0 && ++digit[i - 1] == candidates.size()) digit[--i] = 0;
    if (i == 0) break;
  }
  if (!have) throw UsageError("fusion weight search needs a non-zero candidate");
  return out;
}

}  // namespace lomo
