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

// Sequence files (LSEQ text format), JSON manifests, and the synthetic
// planted-order generator.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lomo/common.hpp"
#include "lomo/core.hpp"

namespace lomo {

// ---------------------------------------------------------------------------
// LSEQ
//
//   lseq 1 <d>
//   seq <id> <label> <group or -> <N>
//   <d numbers>      (N lines)
//
// Blank lines are ignored and '#' starts a comment line.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
      ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

inline bool skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

class LseqParseError : public DataError {
 public:
  LseqParseError(const std::string& source, std::size_t line,
                 const std::string& msg)
      : DataError(source + ":" + std::to_string(line) + ": " + msg),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::vector<SequenceSample> read_lseq(std::istream& in,
                                             const std::string& source = "<lseq>") {
  std::vector<SequenceSample> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  bool have_header = false;
  SequenceSample* cur = nullptr;
  std::size_t expected_rows = 0, rows_read = 0;
  std::vector<double> buffer;

  auto fail = [&](const std::string& msg) {
    throw LseqParseError(source, lineno, msg);
  };
  auto finish = [&]() {
    if (!cur) return;
    if (rows_read != expected_rows)
      fail("sequence '" + cur->id + "' declares " + std::to_string(expected_rows) +
           " frames but has " + std::to_string(rows_read));
    cur->frames = Matrix(expected_rows, dim, std::move(buffer));
    buffer.clear();
    cur = nullptr;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (!have_header) {
      if (tok.size() != 3 || tok[0] != "lseq" || tok[1] != "1" ||
          !detail::parse_number(tok[2], dim) || dim == 0)
        fail("malformed header, expected 'lseq 1 <d>'");
      have_header = true;
      continue;
    }
    if (cur && rows_read < expected_rows) {
      if (tok.size() != dim)
        fail("expected " + std::to_string(dim) + " values, found " +
             std::to_string(tok.size()));
      for (auto t : tok) {
        double v = 0.0;
        if (!detail::parse_number(t, v)) fail("bad number '" + std::string(t) + "'");
        if (!std::isfinite(v)) fail("non-finite value");
        buffer.push_back(v);
      }
      ++rows_read;
      continue;
    }
    finish();
    if (tok.size() != 5 || tok[0] != "seq")
      fail("expected 'seq <id> <label> <group> <N>'");
    SequenceSample s;
    s.id = std::string(tok[1]);
    if (!detail::parse_number(tok[2], s.label)) fail("bad label");
    if (tok[3] != "-") s.group = std::string(tok[3]);
    if (!detail::parse_number(tok[4], expected_rows)) fail("bad frame count");
    if (expected_rows == 0) fail("sequence '" + s.id + "' has no frames");
    out.push_back(std::move(s));
    cur = &out.back();
    rows_read = 0;
    buffer.reserve(expected_rows * dim);
  }
  if (!have_header) throw LseqParseError(source, lineno, "missing header");
  finish();
  return out;
}

inline std::vector<SequenceSample> read_lseq(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_lseq(in, path.string());
}

inline void write_lseq(std::ostream& out, std::span<const SequenceSample> data) {
  if (data.empty()) throw DataError("write_lseq: no sequences");
  const std::size_t dim = data.front().dim();
  out << "lseq 1 " << dim << "\n";
  out << std::setprecision(17);
  for (const auto& s : data) {
    s.validate();
    if (s.dim() != dim) throw DataError("write_lseq: mixed dimensions");
    if (s.id.empty() || s.id.find_first_of(" \t\r\n") != std::string::npos)
      throw DataError("write_lseq: sequence ids must be non-empty without whitespace");
    out << "seq " << s.id << ' ' << s.label << ' '
        << (s.group ? *s.group : std::string("-")) << ' ' << s.length() << "\n";
    for (std::size_t f = 0; f < s.length(); ++f) {
      const auto x = s.frame(f);
      for (std::size_t j = 0; j < dim; ++j) {
        if (j) out << ' ';
        out << x[j];
      }
      out << "\n";
    }
  }
}

inline void write_lseq(const std::filesystem::path& path,
                       std::span<const SequenceSample> data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_lseq(out, data);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;
  std::optional<int> label;  // overrides labels inside the file
  std::optional<std::string> group;
  std::optional<int> fold;
};

struct Manifest {
  int version = 1;
  std::size_t dim = 0;
  std::vector<ManifestEntry> entries;
};

/// Samples loaded through a manifest, with the fold index each one
/// inherited from its entry (if any).
struct Dataset {
  std::vector<SequenceSample> samples;
  std::vector<std::optional<int>> folds;
};

inline Manifest parse_manifest(const nlohmann::json& j) {
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    m.dim = j.at("dim").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.path = e.at("path").get<std::string>();
      if (e.contains("label") && !e["label"].is_null()) me.label = e["label"].get<int>();
      if (e.contains("group") && !e["group"].is_null())
        me.group = e["group"].get<std::string>();
      if (e.contains("fold") && !e["fold"].is_null()) me.fold = e["fold"].get<int>();
      m.entries.push_back(std::move(me));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest: ") + ex.what());
  }
  if (m.version != 1) throw DataError("unsupported manifest version");
  if (m.dim == 0) throw DataError("manifest dim must be >= 1");
  return m;
}

inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["dim"] = m.dim;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json je;
    je["path"] = e.path;
    je["label"] = e.label ? nlohmann::ordered_json(*e.label) : nlohmann::ordered_json();
    je["group"] = e.group ? nlohmann::ordered_json(*e.group) : nlohmann::ordered_json();
    je["fold"] = e.fold ? nlohmann::ordered_json(*e.fold) : nlohmann::ordered_json();
    j["entries"].push_back(je);
  }
  return j;
}

/// Loads every entry; relative paths resolve against the manifest's
/// directory. In multiclass mode labels must form a contiguous range 0..C-1.
inline Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("malformed manifest " + path.string() + ": " + ex.what());
  }
  const Manifest m = parse_manifest(j);
  Dataset ds;
  for (const auto& e : m.entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = path.parent_path() / p;
    if (!std::filesystem::exists(p)) throw DataError("missing sequence file " + p.string());
    for (auto& s : read_lseq(p)) {
      if (s.dim() != m.dim)
        throw DataError("sequence '" + s.id + "' has d=" + std::to_string(s.dim()) +
                        " but manifest declares " + std::to_string(m.dim));
      if (e.label) s.label = *e.label;
      if (e.group) s.group = e.group;
      ds.samples.push_back(std::move(s));
      ds.folds.push_back(e.fold);
    }
  }
  if (ds.samples.empty()) throw DataError("manifest lists no sequences");
  bool binary = true;
  int max_label = -1;
  for (const auto& s : ds.samples) {
    if (s.label != 1 && s.label != -1) binary = false;
    max_label = std::max(max_label, s.label);
  }
  if (!binary) {
    std::vector<char> seen(static_cast<std::size_t>(std::max(max_label, 0)) + 1, 0);
    for (const auto& s : ds.samples) {
      if (s.label < 0) throw DataError("multiclass labels must be >= 0");
      seen[static_cast<std::size_t>(s.label)] = 1;
    }
    for (char c : seen)
      if (!c) throw DataError("multiclass labels must be contiguous from 0");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic planted-order sequences
// ---------------------------------------------------------------------------

enum class NegativeMode { shuffled_order, events_absent };

inline NegativeMode parse_negative_mode(std::string_view s) {
  if (s == "shuffled_order" || s == "shuffled") return NegativeMode::shuffled_order;
  if (s == "events_absent" || s == "absent") return NegativeMode::events_absent;
  throw UsageError("unknown negative mode '" + std::string(s) + "'");
}

inline std::string_view to_string(NegativeMode m) {
  return m == NegativeMode::shuffled_order ? "shuffled_order" : "events_absent";
}

struct SynthConfig {
  std::size_t dim = 16;
  std::size_t min_length = 30;
  std::size_t max_length = 30;
  std::size_t events = 3;
  std::size_t n_pos = 200;
  std::size_t n_neg = 200;
  double noise_sigma = 0.15;
  NegativeMode neg_mode = NegativeMode::shuffled_order;
  std::size_t min_gap = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 1) throw UsageError("synth: dim must be >= 1");
    if (events < 1 || events > kMaxEvents)
      throw UsageError("synth: events must be in [1, 8]");
    if (min_length > max_length) throw UsageError("synth: min_length > max_length");
    if (min_length < events * (min_gap + 1))
      throw NumericError("synth: min_length must be >= events * (min_gap + 1)");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
      throw UsageError("synth: noise_sigma must be finite and >= 0");
    if (neg_mode == NegativeMode::shuffled_order && events < 2)
      throw NumericError("synth: shuffled_order negatives need at least 2 events");
    if (n_pos < 2 || n_neg < 2)
      throw UsageError("synth: need at least 2 positives and 2 negatives");
  }
};

/// Per-sample construction record: where each prototype went.
struct SynthRecord {
  std::string id;
  int label = 0;
  std::vector<std::size_t> positions;  // temporal slots, increasing
  std::vector<std::size_t> prototype_at_slot;  // empty when events are absent
};

struct SynthData {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> test;
  Matrix prototypes;  // events x dim, orthonormal when dim >= events
  std::vector<SynthRecord> records;
};

inline SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  if (cfg.dim < cfg.events)
    std::cerr << "warning: synth dim < events; prototypes cannot be orthogonal\n";
  Rng rng(cfg.seed);
  SynthData out;

  // Gram-Schmidt on Gaussian draws.
  out.prototypes = Matrix(cfg.events, cfg.dim);
  for (std::size_t i = 0; i < cfg.events; ++i) {
    auto p = out.prototypes.row(i);
    for (;;) {
      for (double& v : p) v = rng.normal();
      if (i < cfg.dim)
        for (std::size_t j = 0; j < i; ++j) {
          const auto q = out.prototypes.row(j);
          const double proj = dot(p, q);
          for (std::size_t c = 0; c < cfg.dim; ++c) p[c] -= proj * q[c];
        }
      const double norm = std::sqrt(squared_norm(p));
      if (norm > 1e-8) {
        for (double& v : p) v /= norm;
        break;
      }
    }
  }

  const std::uint64_t n_patterns = factorial(cfg.events);
  auto make = [&](bool positive, std::size_t index) {
    const std::size_t n =
        cfg.min_length +
        static_cast<std::size_t>(rng.below(cfg.max_length - cfg.min_length + 1));
    SequenceSample s;
    s.id = std::string(positive ? "pos-" : "neg-") + std::to_string(index);
    s.label = positive ? 1 : -1;
    s.frames = Matrix(n, cfg.dim);
    SynthRecord rec{s.id, s.label, {}, {}};

    // Increasing positions with gaps >= min_gap + 1: choose a sorted subset of
    // [0, n - (events-1)*min_gap) and stretch it.
    const std::size_t span = n - (cfg.events - 1) * cfg.min_gap;
    std::vector<std::size_t> pool(span);
    for (std::size_t i = 0; i < span; ++i) pool[i] = i;
    for (std::size_t i = 0; i < cfg.events; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(span - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + cfg.events);
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t j = 0; j < cfg.events; ++j) chosen[j] += j * cfg.min_gap;
    rec.positions = chosen;

    const bool place = positive || cfg.neg_mode == NegativeMode::shuffled_order;
    if (place) {
      std::vector<std::size_t> proto_at_slot(cfg.events);
      if (positive) {
        for (std::size_t j = 0; j < cfg.events; ++j) proto_at_slot[j] = j;
      } else {
        // Uniform over the non-identity patterns: ranks 2..M!.
        const std::uint64_t rank = 2 + rng.below(n_patterns - 1);
        const auto pattern = pattern_from_rank(rank, cfg.events);
        for (std::size_t i = 0; i < cfg.events; ++i) proto_at_slot[pattern[i]] = i;
      }
      for (std::size_t j = 0; j < cfg.events; ++j) {
        const auto p = out.prototypes.row(proto_at_slot[j]);
        std::copy(p.begin(), p.end(), s.frames.row(chosen[j]).begin());
      }
      rec.prototype_at_slot = std::move(proto_at_slot);
    }
    if (cfg.noise_sigma > 0.0)
      for (double& v : s.frames.data()) v += cfg.noise_sigma * rng.normal();
    out.records.push_back(std::move(rec));
    return s;
  };

  std::vector<SequenceSample> pos, neg;
  for (std::size_t i = 0; i < cfg.n_pos; ++i) pos.push_back(make(true, i));
  for (std::size_t i = 0; i < cfg.n_neg; ++i) neg.push_back(make(false, i));
  rng.shuffle(pos);
  rng.shuffle(neg);

  // Stratified halves.
  const std::size_t pos_train = cfg.n_pos / 2, neg_train = cfg.n_neg / 2;
  for (std::size_t i = 0; i < pos.size(); ++i)
    (i < pos_train ? out.train : out.test).push_back(std::move(pos[i]));
  for (std::size_t i = 0; i < neg.size(); ++i)
    (i < neg_train ? out.train : out.test).push_back(std::move(neg[i]));
  return out;
}

}  // namespace lomo
