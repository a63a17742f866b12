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

// lomo: command-line front end (train, predict, eval, synth, infer-bench).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "lomo.hpp"

#ifndef LOMO_VERSION
#define LOMO_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    T v{};
    if (!lomo::detail::parse_number(std::string_view(item), v))
      throw lomo::UsageError("bad list value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// Records how a command ran; written next to its primary output.
struct RunRecord {
  std::string command_line;
  std::string command;
  ojson config;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string started;

  void write(const fs::path& path) const {
    ojson j;
    j["command_line"] = command_line;
    j["command"] = command;
    j["code_version"] = LOMO_VERSION;
    j["seed"] = seed;
    j["config"] = config;
    j["outputs"] = outputs;
    j["started_utc"] = started;
    j["finished_utc"] = utc_now();
    std::ofstream out(path);
    if (!out) throw lomo::DataError("cannot write run record " + path.string());
    out << j.dump(2) << "\n";
  }
};

fs::path record_path(const std::string& explicit_path, const std::string& out,
                     const std::string& command) {
  if (!explicit_path.empty()) return explicit_path;
  if (!out.empty() && out != "-") return out + ".run.json";
  return "lomo-" + command + ".run.json";
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("LOMO_SEED")) {
    std::uint64_t v = 0;
    if (!lomo::detail::parse_number(std::string_view(env), v))
      throw lomo::UsageError("LOMO_SEED must be an unsigned integer");
    return v;
  }
  return 0;
}

lomo::Dataset align_to(const lomo::Dataset& channel, const lomo::Dataset& primary) {
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < channel.samples.size(); ++i) where[channel.samples[i].id] = i;
  if (where.size() != primary.samples.size())
    throw lomo::DataError("fused channels must contain the same sequence ids");
  lomo::Dataset aligned;
  for (std::size_t i = 0; i < primary.samples.size(); ++i) {
    const auto& s = primary.samples[i];
    const auto it = where.find(s.id);
    if (it == where.end()) throw lomo::DataError("sequence '" + s.id + "' missing from a channel");
    lomo::SequenceSample copy = channel.samples[it->second];
    copy.label = s.label;
    copy.group = s.group;
    aligned.samples.push_back(std::move(copy));
    aligned.folds.push_back(primary.folds[i]);
  }
  return aligned;
}

// Training flags shared by `train` and `eval`.
struct TrainFlags {
  std::string kind = "lomo";
  std::size_t events = 3;
  double eta = 0.05;
  double lambda1 = 1e-5;
  double lambda2 = 0.0;
  double gamma_g = 0.0;
  std::size_t coverage_t = 5;
  std::uint64_t maxiter = 10000;
  std::optional<std::uint64_t> seed;
  std::string pooling = "mean";
  std::string train_solver = "greedy";
  double init_scale = 1e-4;

  void add(CLI::App& app) {
    app.add_option("--model-kind", kind, "mnp|mxp|mil|lomo|lomo-ord0|gtp|mil-gtp|alomo")
        ->check(CLI::IsMember({"mnp", "mxp", "mil", "lomo", "lomo-ord0", "gtp", "mil-gtp", "alomo"}));
    app.add_option("--events", events, "number of sub-events M");
    app.add_option("--eta", eta, "learning rate");
    app.add_option("--lambda1", lambda1, "template regularization");
    app.add_option("--lambda2", lambda2, "ordering-cost regularization");
    app.add_option("--gamma-g", gamma_g, "global/local mixing weight");
    app.add_option("--coverage-t", coverage_t, "suppression radius t");
    app.add_option("--maxiter", maxiter, "SGD iterations");
    app.add_option("--seed", seed, "random seed (default: $LOMO_SEED or 0)");
    app.add_option("--pooling", pooling, "mean|max")->check(CLI::IsMember({"mean", "max"}));
    app.add_option("--train-solver", train_solver, "inference used inside training")
        ->check(CLI::IsMember({"greedy", "dp", "brute"}));
    app.add_option("--init-scale", init_scale, "template init range [0, s]");
  }

  lomo::ModelSpec spec() const {
    lomo::ModelSpec s;
    s.kind = lomo::parse_model_kind(kind);
    s.config.events = events;
    s.config.eta = eta;
    s.config.lambda1 = lambda1;
    s.config.lambda2 = lambda2;
    s.config.gamma_g = gamma_g;
    s.config.coverage_t = coverage_t;
    s.config.maxiter = maxiter;
    s.config.seed = seed ? *seed : default_seed();
    s.config.pooling = lomo::parse_pooling(pooling);
    s.config.solver = lomo::parse_solver(train_solver);
    s.config.init_scale = init_scale;
    s.resolved();
    return s;
  }
};

// ----------------------------------------------------------------- train

struct TrainCmd {
  std::string manifest, out, record;
  std::size_t jobs = 1;
  TrainFlags flags;

  void add(CLI::App& app) {
    app.add_option("--manifest", manifest, "training manifest (JSON)")->required();
    app.add_option("--out", out, "model file to write")->required();
    app.add_option("--jobs", jobs, "worker threads for one-vs-all training");
    app.add_option("--record", record, "run record path (default <out>.run.json)");
    flags.add(app);
  }

  int run(RunRecord& rec) {
    const lomo::ModelSpec spec = flags.spec();
    const lomo::Dataset ds = lomo::load_manifest(manifest);
    const lomo::Classifier c = lomo::train_classifier(ds.samples, spec, {}, jobs);
    lomo::save_classifier(out, c);
    rec.config = lomo::describe(spec, {});
    rec.config["manifest"] = manifest;
    rec.config["mode"] = c.binary() ? "binary" : "one-vs-all";
    rec.seed = spec.config.seed;
    rec.outputs = {out};
    rec.write(record_path(record, out, "train"));
    std::cerr << "trained " << lomo::to_string(c.kind) << " ("
              << (c.binary() ? "binary" : std::to_string(c.outputs()) + " classes")
              << ") on " << ds.samples.size() << " sequences -> " << out << "\n";
    return 0;
  }
};

// --------------------------------------------------------------- predict

struct PredictCmd {
  std::string model, manifest, solver = "greedy", out = "-", record;
  bool dump_latents = false;

  void add(CLI::App& app) {
    app.add_option("--model", model, "model file")->required();
    app.add_option("--manifest", manifest, "sequences to score")->required();
    app.add_option("--solver", solver, "greedy|dp|brute")
        ->check(CLI::IsMember({"greedy", "dp", "brute"}));
    app.add_flag("--dump-latents", dump_latents,
                 "append chosen frames, permutation rank and score parts");
    app.add_option("--out", out, "TSV output (default stdout)");
    app.add_option("--record", record, "run record path");
  }

  int run(RunRecord& rec) {
    const lomo::Classifier c = lomo::load_classifier(model);
    const lomo::Dataset ds = lomo::load_manifest(manifest);
    const lomo::InferenceConfig icfg{lomo::parse_solver(solver), std::nullopt, true};
    std::ofstream file;
    if (out != "-") {
      file.open(out);
      if (!file) throw lomo::DataError("cannot write " + out);
    }
    std::ostream& os = out == "-" ? std::cout : file;
    os << std::setprecision(17);
    os << "id\tlabel";
    if (c.binary()) {
      os << "\tscore";
    } else {
      for (int l : c.class_labels) os << "\tscore_" << l;
    }
    os << "\tdecision";
    const std::size_t m = c.events();
    if (dump_latents) {
      for (std::size_t i = 1; i <= m; ++i) os << "\tk" << i;
      os << "\tperm_rank\ttemplate_score\tordering_cost\tglobal_score";
    }
    os << "\n";
    for (const auto& s : ds.samples) {
      const auto latents = lomo::predict_latents(c, s, icfg);
      std::vector<double> scores;
      for (const auto& a : latents) scores.push_back(a.total);
      const int decision = lomo::decide(c, scores);
      os << s.id << '\t' << s.label;
      for (double v : scores) os << '\t' << v;
      os << '\t' << decision;
      if (dump_latents) {
        // Latents of the binary model, or of the winning class.
        const auto& a = latents[c.binary() ? 0 : lomo::argmax_first(scores)];
        for (std::size_t k : a.k) os << '\t' << k;
        os << '\t' << a.perm_rank << '\t' << a.template_score << '\t' << a.ordering_cost
           << '\t' << a.global_score;
      }
      os << "\n";
    }
    rec.config = {{"model", model}, {"manifest", manifest}, {"solver", solver},
                  {"dump_latents", dump_latents}};
    rec.seed = c.seed;
    rec.outputs = {out};
    rec.write(record_path(record, out, "predict"));
    return 0;
  }
};

// ------------------------------------------------------------------ eval

struct EvalCmd {
  std::string manifest, metrics = "acc", folds = "random:5", grid, fuse, fusion = "equal",
              weights, solver = "greedy", out = "-", record;
  std::size_t jobs = 1;
  TrainFlags flags;

  void add(CLI::App& app) {
    app.add_option("--manifest", manifest, "dataset manifest (labels, groups, folds)");
    app.add_option("--metrics", metrics, "comma list of acc,avgclassacc,map,auc,eer");
    app.add_option("--folds", folds, "random:K | group:K | logo | manifest");
    app.add_option("--grid", grid, "JSON grid over lambda1, coverage_t, gamma_g, fusion_weights");
    app.add_option("--fuse", fuse,
                   "comma list of per-channel manifests; one model is trained per channel "
                   "and their held-out scores are fused");
    app.add_option("--fusion", fusion, "equal|zscore")->check(CLI::IsMember({"equal", "zscore"}));
    app.add_option("--weights", weights, "comma list of fusion weights");
    app.add_option("--solver", solver, "inference used for evaluation")
        ->check(CLI::IsMember({"greedy", "dp", "brute"}));
    app.add_option("--jobs", jobs, "worker threads across folds");
    app.add_option("--out", out, "EvalReport JSON (default stdout)");
    app.add_option("--record", record, "run record path");
    flags.add(app);
  }

  int run(RunRecord& rec) {
    using namespace lomo;
    std::vector<Metric> metric_list;
    for (const auto& m : split_list(metrics)) metric_list.push_back(parse_metric(m));
    if (metric_list.empty()) throw UsageError("--metrics is empty");
    const ModelSpec spec = flags.spec();
    const InferenceConfig icfg{parse_solver(solver), std::nullopt, true};

    std::vector<std::string> channel_paths = split_list(fuse);
    const bool fusing = !channel_paths.empty();
    if (!fusing) {
      if (manifest.empty()) throw UsageError("--manifest is required");
      channel_paths = {manifest};
    }
    std::vector<Dataset> channels;
    for (const auto& p : channel_paths) channels.push_back(load_manifest(p));
    // Labels, groups and folds come from --manifest when given, otherwise
    // from the first channel; every channel is aligned to that sample order.
    const Dataset primary = manifest.empty() || !fusing ? channels.front() : load_manifest(manifest);
    for (auto& ch : channels) ch = align_to(ch, primary);
    const auto& data = primary.samples;

    const auto [policy, k] = parse_fold_option(folds);
    const FoldSpec fold_spec = make_folds(data, policy, k, spec.config.seed, primary.folds);
    const std::vector<int> classes = is_binary_labels(data) ? std::vector<int>{} : class_set(data);

    Grid g;
    if (!grid.empty()) {
      std::ifstream in(grid);
      if (!in) throw DataError("cannot open grid " + grid);
      try {
        g = parse_grid(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed grid: ") + e.what());
      }
    }
    const bool search_hyper = !g.lambda1.empty() || !g.coverage_t.empty() || !g.gamma_g.empty();

    ojson extra;
    std::vector<ModelSpec> channel_specs(channels.size(), spec);
    if (search_hyper) {
      ojson tables = ojson::array();
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const GridResult gr =
            grid_search(channels[c].samples, fold_spec, spec, g, metric_list.front(), icfg, jobs);
        channel_specs[c] = gr.best;
        ojson rows = ojson::array();
        for (const auto& r : gr.rows)
          rows.push_back({{"stage", r.stage}, {"lambda1", r.lambda1}, {"coverage_t", r.coverage_t},
                          {"gamma_g", r.gamma_g}, {"value", r.value}});
        tables.push_back({{"channel", channel_paths[c]},
                          {"best", {{"lambda1", gr.best.config.lambda1},
                                    {"coverage_t", gr.best.config.coverage_t},
                                    {"gamma_g", gr.best.config.gamma_g},
                                    {"value", gr.best_value}}},
                          {"rows", rows}});
      }
      extra["grid_metric"] = to_string(metric_list.front());
      extra["grid"] = tables;
    }

    std::vector<FoldScores> scores;
    for (std::size_t c = 0; c < channels.size(); ++c)
      scores.push_back(cross_validate_scores(channels[c].samples, fold_spec, channel_specs[c],
                                             classes, icfg, jobs));

    FoldScores final_scores = scores.front();
    if (fusing) {
      const FusionMode mode = parse_fusion_mode(fusion);
      std::vector<double> w = parse_list<double>(weights);
      if (!w.empty() && w.size() != channels.size())
        throw UsageError("--weights needs one value per fused channel");
      if (w.empty() && mode == FusionMode::zscore_weighted && !g.fusion_weights.empty()) {
        const auto fr = search_fusion_weights(data, scores, classes, metric_list.front(),
                                              g.fusion_weights);
        w = fr.best_weights;
        ojson rows = ojson::array();
        for (const auto& r : fr.rows) rows.push_back({{"weights", r.weights}, {"value", r.value}});
        extra["fusion_search"] = {{"best", fr.best_weights}, {"value", fr.best_value}, {"rows", rows}};
      }
      final_scores = fuse_folds(scores, mode, w);
      extra["fusion"] = {{"mode", to_string(mode)},
                         {"weights", w},
                         {"channels", channel_paths},
                         {"zscore_statistics", "per evaluation fold"}};
    }

    ojson config = describe(channel_specs.front(), icfg);
    config["metrics"] = metrics;
    config["folds"] = folds;
    config["manifest"] = fusing ? ojson(channel_paths) : ojson(manifest);
    EvalReport report = evaluate_folds(data, final_scores, classes, metric_list, config, fold_spec.name);
    report.extra = extra;
    const std::string text = to_json(report).dump(2);
    if (out == "-") {
      std::cout << text << "\n";
    } else {
      std::ofstream f(out);
      if (!f) throw DataError("cannot write " + out);
      f << text << "\n";
    }
    rec.config = config;
    rec.seed = spec.config.seed;
    rec.outputs = {out};
    rec.write(record_path(record, out, "eval"));
    return 0;
  }
};

// ----------------------------------------------------------------- synth

struct SynthCmd {
  lomo::SynthConfig cfg;
  std::string neg_mode = "shuffled_order", out, record;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    app.add_option("--dim", cfg.dim, "feature dimension d");
    app.add_option("--n-min", cfg.min_length, "minimum sequence length");
    app.add_option("--n-max", cfg.max_length, "maximum sequence length");
    app.add_option("--events", cfg.events, "number of planted events");
    app.add_option("--n-pos", cfg.n_pos, "positive sequences (train + test)");
    app.add_option("--n-neg", cfg.n_neg, "negative sequences (train + test)");
    app.add_option("--noise", cfg.noise_sigma, "Gaussian noise std");
    app.add_option("--neg-mode", neg_mode, "shuffled_order|events_absent")
        ->check(CLI::IsMember({"shuffled_order", "events_absent"}));
    app.add_option("--min-gap", cfg.min_gap, "minimum gap between planted events");
    app.add_option("--seed", seed, "random seed (default: $LOMO_SEED or 0)");
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--record", record, "run record path (default <out>/run.json)");
  }

  int run(RunRecord& rec) {
    cfg.neg_mode = lomo::parse_negative_mode(neg_mode);
    cfg.seed = seed ? *seed : default_seed();
    const lomo::SynthData data = lomo::generate_synthetic(cfg);
    fs::create_directories(out);
    const fs::path dir(out);
    lomo::write_lseq(dir / "train.lseq", data.train);
    lomo::write_lseq(dir / "test.lseq", data.test);
    auto manifest = [&](std::vector<std::pair<std::string, int>> files) {
      lomo::Manifest m;
      m.dim = cfg.dim;
      for (auto& [f, fold] : files)
        m.entries.push_back({f, std::nullopt, std::nullopt,
                             fold < 0 ? std::nullopt : std::optional<int>(fold)});
      return lomo::manifest_to_json(m).dump(2) + "\n";
    };
    std::ofstream(dir / "train.json") << manifest({{"train.lseq", -1}});
    std::ofstream(dir / "test.json") << manifest({{"test.lseq", -1}});
    std::ofstream(dir / "all.json") << manifest({{"train.lseq", 0}, {"test.lseq", 1}});
    std::ofstream log(dir / "construction.tsv");
    log << "id\tlabel\tpositions\tprototype_at_slot\n";
    for (const auto& r : data.records) {
      log << r.id << '\t' << r.label << '\t';
      for (std::size_t i = 0; i < r.positions.size(); ++i) log << (i ? "," : "") << r.positions[i];
      log << '\t';
      if (r.prototype_at_slot.empty()) log << '-';
      for (std::size_t i = 0; i < r.prototype_at_slot.size(); ++i)
        log << (i ? "," : "") << r.prototype_at_slot[i];
      log << '\n';
    }
    rec.config = {{"dim", cfg.dim},           {"n_min", cfg.min_length},
                  {"n_max", cfg.max_length},  {"events", cfg.events},
                  {"n_pos", cfg.n_pos},       {"n_neg", cfg.n_neg},
                  {"noise_sigma", cfg.noise_sigma}, {"neg_mode", lomo::to_string(cfg.neg_mode)},
                  {"min_gap", cfg.min_gap}};
    rec.seed = cfg.seed;
    for (const char* f : {"train.lseq", "test.lseq", "train.json", "test.json", "all.json",
                          "construction.tsv"})
      rec.outputs.push_back((dir / f).string());
    rec.write(record.empty() ? dir / "run.json" : fs::path(record));
    return 0;
  }
};

// ----------------------------------------------------------- infer-bench

struct BenchCmd {
  std::string ns = "50,100,300", ms = "1,2,3", ts = "0,5", out = "-", record;
  std::size_t dim = 64, instances = 20;
  double cost_scale = 0.1;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    app.add_option("--n", ns, "comma list of sequence lengths");
    app.add_option("--m", ms, "comma list of event counts");
    app.add_option("--t", ts, "comma list of coverage values");
    app.add_option("--dim", dim, "feature dimension");
    app.add_option("--instances", instances, "random instances per cell");
    app.add_option("--cost-scale", cost_scale, "std of random ordering costs");
    app.add_option("--seed", seed, "random seed (default: $LOMO_SEED or 0)");
    app.add_option("--out", out, "CSV output (default stdout)");
    app.add_option("--record", record, "run record path");
  }

  int run(RunRecord& rec) {
    using namespace lomo;
    const std::uint64_t base = seed ? *seed : default_seed();
    std::ofstream file;
    if (out != "-") {
      file.open(out);
      if (!file) throw DataError("cannot write " + out);
    }
    std::ostream& os = out == "-" ? std::cout : file;
    os << std::setprecision(10);
    os << "solver,N,M,t,d,instances,total_seconds,mean_seconds,mean_score,mean_gap_to_dp\n";
    for (std::size_t n : parse_list<std::size_t>(ns))
      for (std::size_t m : parse_list<std::size_t>(ms))
        for (std::size_t t : parse_list<std::size_t>(ts)) {
          if (n < m) {
            std::cerr << "skipping N=" << n << " M=" << m << ": fewer frames than events\n";
            continue;
          }
          const bool brute_ok =
              std::pow(static_cast<double>(n), static_cast<double>(m)) <= kBruteForceLimit;
          if (!brute_ok)
            std::cerr << "brute skipped for N=" << n << " M=" << m << " t=" << t
                      << ": instance too large for brute force\n";
          const auto bench = benchmark_solvers(n, m, t, dim, instances, cost_scale,
                                               derive_seed(base, n * 1000003 + m * 1009 + t),
                                               brute_ok);
          for (const auto& row : bench) {
            os << to_string(row.solver) << ',' << n << ',' << m << ',' << t << ',' << dim << ','
               << instances << ',' << row.total_seconds << ','
               << row.total_seconds / static_cast<double>(instances) << ',' << row.mean_score
               << ',' << row.mean_gap_to_dp << "\n";
          }
        }
    rec.config = {{"n", ns}, {"m", ms}, {"t", ts}, {"dim", dim}, {"instances", instances},
                  {"cost_scale", cost_scale}};
    rec.seed = base;
    rec.outputs = {out};
    rec.write(record_path(record, out, "infer-bench"));
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent ordinal models for weakly supervised sequence classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LOMO_VERSION);

  TrainCmd train_cmd;
  PredictCmd predict_cmd;
  EvalCmd eval_cmd;
  SynthCmd synth_cmd;
  BenchCmd bench_cmd;
  auto* train = app.add_subcommand("train", "train a model from a manifest");
  train_cmd.add(*train);
  auto* predict = app.add_subcommand("predict", "score sequences with a trained model");
  predict_cmd.add(*predict);
  auto* eval = app.add_subcommand("eval", "cross-validate, grid search and fuse");
  eval_cmd.add(*eval);
  auto* synth = app.add_subcommand("synth", "generate planted-order synthetic data");
  synth_cmd.add(*synth);
  auto* bench = app.add_subcommand("infer-bench", "time greedy vs dp vs brute inference");
  bench_cmd.add(*bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  RunRecord rec;
  rec.started = utc_now();
  for (int i = 0; i < argc; ++i) rec.command_line += (i ? " " : "") + std::string(argv[i]);
  try {
    rec.command = app.get_subcommands().front()->get_name();
    if (*train) return train_cmd.run(rec);
    if (*predict) return predict_cmd.run(rec);
    if (*eval) return eval_cmd.run(rec);
    if (*synth) return synth_cmd.run(rec);
    if (*bench) return bench_cmd.run(rec);
  } catch (const lomo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
