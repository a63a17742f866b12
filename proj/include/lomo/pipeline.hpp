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

// Experiment composition above binary training: the baseline ladder,
// one-vs-all multiclass classifiers, late fusion of prediction scores and
// model persistence.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lomo/common.hpp"
#include "lomo/core.hpp"
#include "lomo/inference.hpp"
#include "lomo/parallel.hpp"
#include "lomo/training.hpp"

namespace lomo {

enum class ModelKind : std::uint8_t {
  mnp = 0,
  mxp = 1,
  mil = 2,
  lomo = 3,
  lomo_ord0 = 4,
  gtp = 5,
  mil_gtp = 6,
  alomo = 7,
};

inline constexpr std::array<std::string_view, 8> kModelKindNames = {
    "mnp", "mxp", "mil", "lomo", "lomo-ord0", "gtp", "mil-gtp", "alomo"};

inline std::string_view to_string(ModelKind k) {
  return kModelKindNames.at(static_cast<std::size_t>(k));
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (std::size_t i = 0; i < kModelKindNames.size(); ++i)
    if (kModelKindNames[i] == s) return static_cast<ModelKind>(i);
  throw UsageError("unknown model kind '" + std::string(s) + "'");
}

/// A model kind together with the training configuration. The kind pins
/// some configuration fields; resolved() applies them.
struct ModelSpec {
  ModelKind kind = ModelKind::lomo;
  TrainConfig config;

  TrainConfig resolved() const {
    TrainConfig c = config;
    switch (kind) {
      case ModelKind::mnp:
      case ModelKind::mxp:
        c.events = 1;
        c.gamma_g = 1.0;
        c.ordinal_enabled = false;
        c.pooling = kind == ModelKind::mnp ? Pooling::mean : Pooling::max;
        break;
      case ModelKind::mil:
        c.events = 1;
        c.ordinal_enabled = false;
        c.gamma_g = 0.0;
        break;
      case ModelKind::lomo:
        c.gamma_g = 0.0;
        break;
      case ModelKind::lomo_ord0:
        c.gamma_g = 0.0;
        c.ordinal_enabled = false;
        break;
      case ModelKind::gtp:
        c.gamma_g = 1.0;
        break;
      case ModelKind::mil_gtp:
        c.events = 1;
        break;
      case ModelKind::alomo:
        break;
    }
    c.validate();
    return c;
  }
};

/// One binary model (class_labels empty) or one model per class for
/// one-vs-all prediction.
struct Classifier {
  ModelKind kind = ModelKind::lomo;
  std::uint64_t seed = 0;
  std::vector<int> class_labels;
  std::vector<Model> models;

  bool binary() const noexcept { return class_labels.empty(); }
  std::size_t outputs() const noexcept { return models.size(); }
  std::size_t dim() const { return models.at(0).dim(); }
  std::size_t events() const { return models.at(0).events(); }
};

inline bool is_binary_labels(std::span<const SequenceSample> data) {
  return std::all_of(data.begin(), data.end(),
                     [](const auto& s) { return s.label == 1 || s.label == -1; });
}

inline std::vector<int> class_set(std::span<const SequenceSample> data) {
  std::set<int> s;
  for (const auto& x : data) s.insert(x.label);
  return {s.begin(), s.end()};
}

inline Classifier train_binary(std::span<const SequenceSample> data,
                               const ModelSpec& spec) {
  const TrainConfig cfg = spec.resolved();
  Classifier c;
  c.kind = spec.kind;
  c.seed = cfg.seed;
  c.models.push_back(train(data, cfg).model);
  return c;
}

/// One-vs-all: for class index c the samples with that label become +1 and
/// all others -1; the per-class seed is derived from the base seed and c.
/// `classes` defaults to the labels present in `data`.
inline Classifier train_multiclass(std::span<const SequenceSample> data,
                                   const ModelSpec& spec,
                                   std::vector<int> classes = {},
                                   std::size_t jobs = 1) {
  if (data.empty()) throw DataError("training set is empty");
  if (classes.empty()) classes = class_set(data);
  if (classes.size() < 2) throw DataError("multiclass training needs >= 2 classes");
  for (int label : classes) {
    const bool present = std::any_of(data.begin(), data.end(),
                                     [&](const auto& s) { return s.label == label; });
    if (!present)
      throw DataError("class " + std::to_string(label) + " has no training samples");
  }
  const TrainConfig base = spec.resolved();
  auto models = parallel_map(classes.size(), jobs, [&](std::size_t ci) {
    std::vector<SequenceSample> relabeled(data.begin(), data.end());
    for (auto& s : relabeled) s.label = s.label == classes[ci] ? 1 : -1;
    TrainConfig cfg = base;
    cfg.seed = derive_seed(base.seed, 1000 + ci);
    return train(relabeled, cfg).model;
  });
  Classifier c;
  c.kind = spec.kind;
  c.seed = base.seed;
  c.class_labels = std::move(classes);
  c.models = std::move(models);
  return c;
}

/// Binary when every label is -1/+1, one-vs-all otherwise.
inline Classifier train_classifier(std::span<const SequenceSample> data,
                                   const ModelSpec& spec,
                                   std::vector<int> classes = {},
                                   std::size_t jobs = 1) {
  if (classes.empty() && is_binary_labels(data)) return train_binary(data, spec);
  return train_multiclass(data, spec, std::move(classes), jobs);
}

inline std::vector<LatentAssignment> predict_latents(const Classifier& c,
                                                     const SequenceSample& s,
                                                     const InferenceConfig& cfg = {}) {
  std::vector<LatentAssignment> out;
  out.reserve(c.models.size());
  for (const auto& m : c.models) out.push_back(infer(m, s, cfg));
  return out;
}

/// Raw scores, one per output (a single score for binary classifiers).
inline std::vector<double> predict(const Classifier& c, const SequenceSample& s,
                                   const InferenceConfig& cfg = {}) {
  std::vector<double> out;
  out.reserve(c.models.size());
  for (const auto& m : c.models) out.push_back(infer(m, s, cfg).total);
  return out;
}

inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Binary: +1 when s >= 0. Multiclass: label of the highest score, the
/// smallest class index winning ties.
inline int decide(const Classifier& c, std::span<const double> scores) {
  if (c.binary()) return scores[0] >= 0.0 ? 1 : -1;
  return c.class_labels.at(argmax_first(scores));
}

// ---------------------------------------------------------------------------
// Late fusion
// ---------------------------------------------------------------------------

/// Scores of a set of samples: one row per sample, one column per output.
struct ScoreTable {
  std::vector<std::string> ids;
  std::size_t columns = 1;
  std::vector<double> values;

  std::size_t rows() const noexcept { return ids.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * columns + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * columns + c]; }
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
  }
};

inline ScoreTable score_table(const Classifier& c,
                              std::span<const SequenceSample> data,
                              const InferenceConfig& cfg = {}) {
  ScoreTable t;
  t.columns = c.outputs();
  for (const auto& s : data) {
    t.ids.push_back(s.id);
    for (double v : predict(c, s, cfg)) t.values.push_back(v);
  }
  return t;
}

enum class FusionMode { equal_mean, zscore_weighted };

inline FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "equal" || s == "equal_mean") return FusionMode::equal_mean;
  if (s == "zscore" || s == "zscore_weighted") return FusionMode::zscore_weighted;
  throw UsageError("unknown fusion mode '" + std::string(s) + "'");
}

inline std::string_view to_string(FusionMode m) {
  return m == FusionMode::equal_mean ? "equal" : "zscore";
}

/// Per-column standardization over the rows of the table (population
/// variance); a constant column maps to zeros.
inline ScoreTable zscore(const ScoreTable& t) {
  ScoreTable out = t;
  const double n = static_cast<double>(t.rows());
  for (std::size_t c = 0; c < t.columns; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) mean += t.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double d = t.at(r, c) - mean;
      var += d * d;
    }
    var /= n;
    const double sd = std::sqrt(var);
    for (std::size_t r = 0; r < t.rows(); ++r)
      out.at(r, c) = var > 0.0 ? (t.at(r, c) - mean) / sd : 0.0;
  }
  return out;
}

/// equal_mean averages raw scores (weights are ignored). zscore_weighted
/// standardizes each table's columns over its own rows and sums them with
/// the given weights (all ones by default).
inline ScoreTable late_fusion(std::span<const ScoreTable> tables, FusionMode mode,
                              std::span<const double> weights = {}) {
  if (tables.empty()) throw UsageError("late_fusion: no score tables");
  const ScoreTable& first = tables.front();
  if (!weights.empty() && weights.size() != tables.size())
    throw UsageError("late_fusion: one weight per table required");
  for (const auto& t : tables) {
    if (t.ids != first.ids || t.columns != first.columns)
      throw DataError("late_fusion: tables cover different samples or classes");
    if (!all_finite(t.values)) throw NumericError("late_fusion: non-finite score");
  }
  ScoreTable out = first;
  std::fill(out.values.begin(), out.values.end(), 0.0);
  if (mode == FusionMode::equal_mean) {
    for (const auto& t : tables)
      for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += t.values[i];
    for (double& v : out.values) v /= static_cast<double>(tables.size());
    return out;
  }
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const ScoreTable z = zscore(tables[k]);
    const double w = weights.empty() ? 1.0 : weights[k];
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += w * z.values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: "LOMO1" container, little-endian.
//
//   magic "LOMO1" | u8 mode (0 binary, 1 one-vs-all) | u8 kind | u64 seed
//   | u32 count | count x { i64 label | u64 d | u64 M | f64 gamma_g
//   | u8 pooling | u64 coverage | u8 has_global | f64[M*d] templates
//   | f64[M!] ordering costs | f64[d] global template (if present) }
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 5> kModelMagic = {'L', 'O', 'M', 'O', '1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("model file truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("model file truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint8_t get_u8(std::istream& in) {
  const int c = in.get();
  if (c == std::char_traits<char>::eof()) throw DataError("model file truncated");
  return static_cast<std::uint8_t>(c);
}
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

inline void write_classifier(std::ostream& out, const Classifier& c) {
  if (c.models.empty()) throw UsageError("classifier has no models");
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::put_u8(out, c.binary() ? 0 : 1);
  detail::put_u8(out, static_cast<std::uint8_t>(c.kind));
  detail::put_u64(out, c.seed);
  detail::put_u32(out, static_cast<std::uint32_t>(c.models.size()));
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const Model& m = c.models[i];
    m.validate();
    const std::int64_t label = c.binary() ? 1 : c.class_labels.at(i);
    detail::put_u64(out, static_cast<std::uint64_t>(label));
    detail::put_u64(out, m.dim());
    detail::put_u64(out, m.events());
    detail::put_f64(out, m.gamma_g);
    detail::put_u8(out, m.pooling == Pooling::mean ? 0 : 1);
    detail::put_u64(out, m.coverage);
    detail::put_u8(out, m.global_template ? 1 : 0);
    for (double v : m.templates.data()) detail::put_f64(out, v);
    for (double v : m.ordering_costs) detail::put_f64(out, v);
    if (m.global_template)
      for (double v : *m.global_template) detail::put_f64(out, v);
  }
  if (!out) throw DataError("failed writing model");
}

inline Classifier read_classifier(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kModelMagic)
    throw DataError("not a LOMO1 model file");
  Classifier c;
  const std::uint8_t mode = detail::get_u8(in);
  if (mode > 1) throw DataError("bad classifier mode in model file");
  const std::uint8_t kind = detail::get_u8(in);
  if (kind >= kModelKindNames.size()) throw DataError("bad model kind in model file");
  c.kind = static_cast<ModelKind>(kind);
  c.seed = detail::get_u64(in);
  const std::uint32_t count = detail::get_u32(in);
  if (count == 0 || (mode == 0 && count != 1))
    throw DataError("bad model count in model file");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = static_cast<std::int64_t>(detail::get_u64(in));
    const std::uint64_t d = detail::get_u64(in);
    const std::uint64_t m = detail::get_u64(in);
    if (m < 1 || m > kMaxEvents || d < 1 || d > (1ULL << 32))
      throw DataError("bad model shape in model file");
    Model model = Model::zeros(m, d);
    model.gamma_g = detail::get_f64(in);
    const std::uint8_t pooling = detail::get_u8(in);
    if (pooling > 1) throw DataError("bad pooling in model file");
    model.pooling = pooling == 0 ? Pooling::mean : Pooling::max;
    model.coverage = detail::get_u64(in);
    const bool has_global = detail::get_u8(in) != 0;
    for (double& v : model.templates.data()) v = detail::get_f64(in);
    for (double& v : model.ordering_costs) v = detail::get_f64(in);
    if (has_global) {
      std::vector<double> g(d);
      for (double& v : g) v = detail::get_f64(in);
      model.global_template = std::move(g);
    }
    model.validate();
    if (!c.models.empty() && model.dim() != c.models.front().dim())
      throw DataError("models in one file must share a dimension");
    if (mode == 1) c.class_labels.push_back(static_cast<int>(label));
    c.models.push_back(std::move(model));
  }
  return c;
}

inline void save_classifier(const std::filesystem::path& path, const Classifier& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_classifier(out, c);
}

inline Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  return read_classifier(in);
}

}  // namespace lomo
