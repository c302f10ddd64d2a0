// Copyright 2026 The atlas-nas Authors.
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

// atlas-nas: one binary over the whole library. Every subcommand prints a
// single JSON report on stdout and keeps progress on stderr, so runs can
// be piped into each other (filter output is valid refine input). Exit
// codes: 0 success, 1 usage, 2 runtime failure, 3 budget overrun.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "atlas/bench.hpp"
#include "atlas/clock.hpp"
#include "atlas/coordinator.hpp"
#include "atlas/dataset.hpp"
#include "atlas/filtering.hpp"
#include "atlas/mlp.hpp"
#include "atlas/proxies.hpp"
#include "atlas/refinement.hpp"
#include "atlas/search_space.hpp"

namespace {

using json = nlohmann::json;
using namespace atlas;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitBudget = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const json& report) { std::cout << report.dump(2) << "\n"; }

int default_workers() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(std::min(hw, 8u));
}

double parse_duration(const std::string& text) {
  static const std::regex pattern(R"(^\s*([0-9]+\.?[0-9]*|\.[0-9]+)\s*([smh])\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw UsageError("bad duration \"" + text +
                     "\"; want <number><s|m|h>, e.g. 90s, 2m, 1.5h");
  }
  double seconds = std::stod(m[1].str());
  switch (m[2].str()[0]) {
    case 'm': seconds *= 60.0; break;
    case 'h': seconds *= 3600.0; break;
    default: break;
  }
  return seconds;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

ArchEncoding parse_arch(const std::string& text) {
  try {
    return ArchEncoding::from_string(text);
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad --arch: ") + e.what());
  }
}

ProxyKind parse_kind(const std::string& text) {
  try {
    return proxy_kind_from_string(text);
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad --proxy: ") + e.what());
  }
}

// Space grammar: widths, then the layer count, e.g. "4,8,16,32 x3". The
// option accepts the two shell tokens that form or one quoted string.
SearchSpaceSpec parse_space(const std::vector<std::string>& tokens,
                            int input_dim) {
  std::string text;
  for (const auto& t : tokens) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  static const std::regex pattern(
      R"(^\s*([0-9]+(?:\s*,\s*[0-9]+)*)\s*x\s*([0-9]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw UsageError("bad --space \"" + text +
                     "\"; want widths then layers, e.g. \"4,8,16,32 x3\"");
  }
  SearchSpaceSpec space;
  space.num_layers = std::stoi(m[2].str());
  std::string widths = m[1].str();
  widths.erase(std::remove_if(widths.begin(), widths.end(),
                              [](char c) { return c == ' ' || c == '\t'; }),
               widths.end());
  for (const auto& w : split_list(widths)) space.width_choices.push_back(std::stoi(w));
  space.input_dim = input_dim;
  try {
    space.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad --space: ") + e.what());
  }
  return space;
}

json space_echo(const SearchSpaceSpec& space) {
  return json{{"num_layers", space.num_layers},
              {"width_choices", space.width_choices},
              {"input_dim", space.input_dim}};
}

struct DataArgs {
  std::string csv_path;
  std::string label_column = "label";
  std::string categorical;
  std::string synthetic;
};

void add_data_flags(CLI::App* cmd, DataArgs* args) {
  cmd->add_option("--data", args->csv_path, "CSV file (header row, UTF-8)");
  cmd->add_option("--label-col", args->label_column, "label column name")
      ->capture_default_str();
  cmd->add_option("--categorical", args->categorical,
                  "comma-separated categorical columns to one-hot expand");
  cmd->add_option("--synthetic", args->synthetic,
                  "generator spec n=2000,d=8,noise=0.1,seed=7");
}

bool has_data(const DataArgs& args) {
  return !args.csv_path.empty() || !args.synthetic.empty();
}

Dataset resolve_dataset(const DataArgs& args) {
  bool csv = !args.csv_path.empty();
  bool synthetic = !args.synthetic.empty();
  if (csv == synthetic) {
    throw UsageError("pick exactly one data source: --data or --synthetic");
  }
  if (csv) {
    return load_csv(args.csv_path, args.label_column,
                    split_list(args.categorical));
  }
  int n = -1, d = -1;
  double noise = 0.1;
  std::uint64_t seed = 0;
  for (const auto& part : split_list(args.synthetic)) {
    auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw UsageError("bad --synthetic field \"" + part + "\"; want key=value");
    }
    std::string key = part.substr(0, eq);
    std::string value = part.substr(eq + 1);
    try {
      if (key == "n") {
        n = std::stoi(value);
      } else if (key == "d") {
        d = std::stoi(value);
      } else if (key == "noise") {
        noise = std::stod(value);
      } else if (key == "seed") {
        seed = std::stoull(value);
      } else {
        throw UsageError("unknown --synthetic field \"" + key + "\"");
      }
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError("bad --synthetic value \"" + part + "\"");
    }
  }
  if (n < 0 || d < 0) throw UsageError("--synthetic needs at least n= and d=");
  return make_synthetic(n, d, noise, seed);
}

json data_echo(const DataArgs& args) {
  json j;
  if (!args.csv_path.empty()) {
    j["source"] = "csv";
    j["path"] = args.csv_path;
    j["label_column"] = args.label_column;
    if (!args.categorical.empty()) j["categorical"] = args.categorical;
  } else if (!args.synthetic.empty()) {
    j["source"] = "synthetic";
    j["spec"] = args.synthetic;
  } else {
    j["source"] = "none";
  }
  return j;
}

struct ScoreArgs {
  int batch_size = 4;
  std::string init = "he";
  bool no_positivity = false;
  std::string data_mode = "all-ones";
  std::string recalibration = "both";
  int segments = 16;
  bool bce_variant = false;
};

void add_score_flags(CLI::App* cmd, ScoreArgs* args) {
  cmd->add_option("--proxy-batch", args->batch_size,
                  "rows fed to data-dependent proxies")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--init", args->init, "weight init: lecun|xavier|he")
      ->capture_default_str();
  cmd->add_flag("--no-positivity", args->no_positivity,
                "skip the |w| rewrite before saliency scoring");
  cmd->add_option("--data-mode", args->data_mode,
                  "saliency input: all-ones|real-batch")
      ->capture_default_str();
  cmd->add_option("--recalibration", args->recalibration,
                  "layer weighting: both|width-only|depth-only|none")
      ->capture_default_str();
  cmd->add_option("--segments", args->segments,
                  "trajectory-length discretization pieces")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--bce-variant", args->bce_variant,
                "score with BCE instead of the sum-output loss");
}

ScoreConfig resolve_score(const ScoreArgs& args, std::uint64_t seed) {
  ScoreConfig cfg;
  cfg.batch_size = args.batch_size;
  cfg.positivity = !args.no_positivity;
  cfg.trajectory_segments = args.segments;
  cfg.bce_variant = args.bce_variant;
  cfg.seed = seed;
  try {
    cfg.init = init_mode_from_string(args.init);
    cfg.data_mode = data_mode_from_string(args.data_mode);
    cfg.recalibration = recalibration_from_string(args.recalibration);
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

json score_echo(const ScoreConfig& cfg, ProxyKind kind) {
  return json{{"kind", to_string(kind)},
              {"batch_size", cfg.batch_size},
              {"init", to_string(cfg.init)},
              {"positivity", cfg.positivity},
              {"data_mode", to_string(cfg.data_mode)},
              {"recalibration", to_string(cfg.recalibration)},
              {"trajectory_segments", cfg.trajectory_segments},
              {"bce_variant", cfg.bce_variant},
              {"seed", cfg.seed}};
}

DataBatch scoring_batch(const Dataset& ds, int rows) {
  DataBatch full = full_batch(ds);
  int n = std::min<int>(rows, full.size());
  DataBatch out;
  out.x = full.x.topRows(n);
  out.y.assign(full.y.begin(), full.y.begin() + n);
  return out;
}

json to_json(const ScoredArch& s) {
  return json{{"arch", s.enc.to_string()},
              {"score", s.score},
              {"degenerate", s.degenerate}};
}

json to_json(const RoundEntry& e) {
  return json{{"arch", e.enc.to_string()},
              {"val_auc", e.val_auc},
              {"train_loss_drop", e.train_loss_drop},
              {"cumulative_epochs", e.cumulative_epochs},
              {"diverged", e.diverged}};
}

json to_json(const RefineResult& r) {
  json rounds = json::array();
  for (const auto& round : r.rounds) {
    json board = json::array();
    for (const auto& entry : round.leaderboard) board.push_back(to_json(entry));
    rounds.push_back(json{{"index", round.index},
                          {"epochs_added", round.epochs_added},
                          {"leaderboard", board}});
  }
  return json{{"winner", r.winner.to_string()},
              {"winner_val_auc", r.winner_val_auc},
              {"rounds", rounds},
              {"total_epochs", r.total_epochs},
              {"wall_time_s", r.wall_time_s},
              {"warnings", r.warnings}};
}

json to_json(const CoordinatorPlan& p) {
  return json{{"t_max_s", p.t_max_s},
              {"evaluations", p.evaluations},
              {"keep", p.keep},
              {"base_epochs", p.base_epochs},
              {"eta", p.eta},
              {"ratio", p.ratio},
              {"t1_s", p.t1_s},
              {"t2_s", p.t2_s},
              {"branch", to_string(p.branch)}};
}

json to_json(const ProfileEstimate& p) {
  return json{{"t1_s", p.t1},
              {"t2_s", p.t2},
              {"probe_count", p.probe_count},
              {"warnings", p.warnings}};
}

// bench build ---------------------------------------------------------------

struct BenchBuildArgs {
  DataArgs data;
  std::vector<std::string> space_tokens;
  std::string out;
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  double train_fraction = 0.8;
  std::uint64_t seed = 7;
  int workers = default_workers();
  std::string created;
};

int run_bench_build(const BenchBuildArgs& a) {
  Dataset ds = resolve_dataset(a.data);
  SearchSpaceSpec space = parse_space(a.space_tokens, ds.dim());
  BenchBuildOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch_size;
  opts.lr = a.lr;
  opts.seed = a.seed;
  opts.workers = a.workers;
  opts.train_fraction = a.train_fraction;
  opts.created = a.created;
  RealClock clock;
  BenchFile bench = build_bench(a.out, space, ds, opts, [](int done, int total) {
    std::cerr << "[bench] " << done << "/" << total << " architectures\n";
  });
  double best = 0.0;
  int diverged = 0;
  for (const auto& rec : bench.records) {
    best = std::max(best, best_val_auc(rec));
    if (rec.diverged) ++diverged;
  }
  emit(json{
      {"command", "bench build"},
      {"config", json{{"data", data_echo(a.data)},
                      {"space", space_echo(space)},
                      {"epochs", a.epochs},
                      {"batch_size", a.batch_size},
                      {"lr", a.lr},
                      {"train_fraction", a.train_fraction},
                      {"seed", a.seed},
                      {"workers", a.workers},
                      {"out", a.out}}},
      {"path", a.out},
      {"architectures", bench.records.size()},
      {"diverged", diverged},
      {"best_val_auc", best},
      {"wall_time_s", clock.now()},
      {"header", json{{"dataset_sha256", bench.header.dataset_sha256},
                      {"created", bench.header.created},
                      {"epochs", bench.header.epochs},
                      {"batch_size", bench.header.batch_size},
                      {"lr", bench.header.lr},
                      {"seed", bench.header.seed}}},
  });
  return kExitOk;
}

// bench query ---------------------------------------------------------------

struct BenchQueryArgs {
  std::string bench_path;
  std::string arch;
  int epoch = -1;
};

int run_bench_query(const BenchQueryArgs& a) {
  BenchFile bench = load_bench(a.bench_path);
  ArchEncoding enc = parse_arch(a.arch);
  std::optional<int> epoch;
  if (a.epoch >= 0) epoch = a.epoch;
  BenchQuery q = query(bench, enc, epoch);
  emit(json{{"command", "bench query"},
            {"config", json{{"bench", a.bench_path},
                            {"arch", a.arch},
                            {"epoch", a.epoch < 0 ? json() : json(a.epoch)}}},
            {"arch", q.arch},
            {"params", q.params},
            {"epoch", q.epoch},
            {"train_auc", q.train_auc},
            {"val_auc", q.val_auc},
            {"train_loss", q.train_loss},
            {"val_loss", q.val_loss},
            {"epoch_time_s", q.epoch_time_s},
            {"diverged", q.diverged}});
  return kExitOk;
}

// bench stats ---------------------------------------------------------------

struct BenchStatsArgs {
  std::string bench_path;
};

int run_bench_stats(const BenchStatsArgs& a) {
  BenchFile bench = load_bench(a.bench_path);
  StatsReport stats = stats_report(bench);
  json report{{"command", "bench stats"},
              {"config", json{{"bench", a.bench_path}}},
              {"architectures", bench.records.size()},
              {"train_ecdf", stats.train_ecdf},
              {"val_ecdf", stats.val_ecdf},
              {"params_vs_val", stats.params_vs_val}};
  report["params_srcc"] = stats.params_srcc ? json(*stats.params_srcc) : json();
  emit(report);
  return kExitOk;
}

// bench srcc ----------------------------------------------------------------

struct BenchSrccArgs {
  std::string bench_path;
  DataArgs data;
  ScoreArgs score;
  std::string proxies = "all";
  int sample = 0;
  std::uint64_t seed = 0;
};

std::vector<ProxyKind> parse_kinds(const std::string& text) {
  if (text == "all") return all_proxy_kinds();
  std::vector<ProxyKind> kinds;
  for (const auto& name : split_list(text)) kinds.push_back(parse_kind(name));
  if (kinds.empty()) throw UsageError("--proxies lists no proxy");
  return kinds;
}

int run_bench_srcc(const BenchSrccArgs& a) {
  BenchFile bench = load_bench(a.bench_path);
  if (!has_data(a.data)) {
    throw UsageError(
        "bench srcc scores against the benchmark's dataset; pass --data or "
        "--synthetic");
  }
  Dataset ds = resolve_dataset(a.data);
  if (dataset_sha256(ds) != bench.header.dataset_sha256) {
    throw std::runtime_error(
        "dataset fingerprint does not match the benchmark header");
  }
  ScoreConfig cfg = resolve_score(a.score, a.seed);
  std::vector<ProxyKind> kinds = parse_kinds(a.proxies);
  DataBatch batch = scoring_batch(ds, cfg.batch_size);
  std::cerr << "[srcc] scoring " << (a.sample > 0 ? a.sample : static_cast<int>(bench.size()))
            << " architectures with " << kinds.size() << " proxies\n";
  ProxySrccReport rep =
      proxy_srcc_report(bench, kinds, cfg, &batch, ds.dim(), a.sample, a.seed);
  json entries = json::array();
  for (const auto& e : rep.entries) {
    json je{{"kind", to_string(e.kind)},
            {"mean_score_time_s", e.mean_score_time_s},
            {"degenerate_count", e.degenerate_count}};
    je["srcc"] = e.srcc ? json(*e.srcc) : json();
    if (!e.error.empty()) je["error"] = e.error;
    entries.push_back(je);
  }
  emit(json{{"command", "bench srcc"},
            {"config", json{{"bench", a.bench_path},
                            {"data", data_echo(a.data)},
                            {"proxy", score_echo(cfg, kinds.front())},
                            {"proxies", a.proxies},
                            {"sample", a.sample},
                            {"seed", a.seed}}},
            {"sample_count", rep.sample_count},
            {"entries", entries}});
  return kExitOk;
}

// proxy score ---------------------------------------------------------------

struct ProxyScoreArgs {
  DataArgs data;
  ScoreArgs score;
  std::string arch;
  std::string kind = "expressflow";
  int input_dim = 0;
  std::uint64_t seed = 0;
};

int run_proxy_score(const ProxyScoreArgs& a) {
  ArchEncoding enc = parse_arch(a.arch);
  ProxyKind kind = parse_kind(a.kind);
  ScoreConfig cfg = resolve_score(a.score, a.seed);
  std::optional<Dataset> ds;
  if (has_data(a.data)) ds = resolve_dataset(a.data);
  int input_dim = ds ? ds->dim() : a.input_dim;
  if (input_dim <= 0) {
    throw UsageError(
        "pass --data, --synthetic, or --input-dim so the model has an input "
        "width");
  }
  if (!ds && proxy_needs_data(kind, cfg)) {
    throw UsageError(to_string(kind) +
                     " scores a real batch; pass --data or --synthetic");
  }
  MlpModel model(enc.sizes, input_dim, cfg.init, arch_seed(a.seed, enc));
  DataBatch batch;
  if (ds) batch = scoring_batch(*ds, cfg.batch_size);
  ProxyScore score = score_proxy(kind, model, batch, cfg);
  emit(json{{"command", "proxy score"},
            {"config", json{{"data", data_echo(a.data)},
                            {"proxy", score_echo(cfg, kind)},
                            {"input_dim", input_dim},
                            {"seed", a.seed}}},
            {"arch", enc.to_string()},
            {"kind", to_string(kind)},
            {"score", score.value},
            {"wall_time_s", score.wall_time_s},
            {"degenerate", score.degenerate}});
  return kExitOk;
}

// proxy identity-check ------------------------------------------------------

struct IdentityArgs {
  std::string arch;
  int input_dim = 8;
  std::uint64_t seed = 0;
  int count = 1;
};

int run_identity_check(const IdentityArgs& a) {
  ArchEncoding enc = parse_arch(a.arch);
  constexpr double kTolerance = 1e-9;
  json runs = json::array();
  double worst = 0.0;
  int neurons = 0;
  for (int i = 0; i < a.count; ++i) {
    std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    MlpModel model(enc.sizes, a.input_dim, InitMode::He, seed);
    SaliencyIdentityReport rep = saliency_identity_check(model);
    worst = std::max(worst, rep.max_rel_deviation);
    neurons += rep.neurons_checked;
    runs.push_back(json{{"seed", seed},
                        {"max_rel_deviation", rep.max_rel_deviation},
                        {"neurons_checked", rep.neurons_checked}});
  }
  bool pass = worst < kTolerance;
  emit(json{{"command", "proxy identity-check"},
            {"config", json{{"arch", a.arch},
                            {"input_dim", a.input_dim},
                            {"seed", a.seed},
                            {"count", a.count}}},
            {"runs", runs},
            {"max_rel_deviation", worst},
            {"neurons_checked", neurons},
            {"tolerance", kTolerance},
            {"pass", pass}});
  if (!pass) {
    std::cerr << "[identity-check] deviation " << worst << " exceeds "
              << kTolerance << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// search filter -------------------------------------------------------------

struct SearchFilterArgs {
  DataArgs data;
  ScoreArgs score;
  std::vector<std::string> space_tokens;
  std::string proxy = "expressflow";
  int evaluations = 100;
  int keep = 10;
  int pool = 10;
  int sample_size = 3;
  int workers = default_workers();
  int input_dim = 0;
  std::uint64_t seed = 0;
  bool adjacent = false;
  std::string tmax;
  std::string history_csv;
};

void write_history_csv(const std::string& path,
                       const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "evaluation,best_score\n" << std::setprecision(17);
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << (i + 1) << "," << history[i] << "\n";
  }
}

int run_search_filter(const SearchFilterArgs& a) {
  std::optional<Dataset> ds;
  if (has_data(a.data)) ds = resolve_dataset(a.data);
  int input_dim = ds ? ds->dim() : a.input_dim;
  if (input_dim <= 0) throw UsageError("pass --data, --synthetic, or --input-dim");
  SearchSpaceSpec space = parse_space(a.space_tokens, input_dim);
  ProxyKind kind = parse_kind(a.proxy);
  ScoreConfig cfg = resolve_score(a.score, a.seed);
  if (!ds && proxy_needs_data(kind, cfg)) {
    throw UsageError(to_string(kind) +
                     " scores a real batch; pass --data or --synthetic");
  }
  DataBatch batch;
  if (ds) batch = scoring_batch(*ds, cfg.batch_size);
  FilterOptions opts;
  opts.evaluations = a.evaluations;
  opts.keep = a.keep;
  opts.pool = a.pool;
  opts.sample_size = a.sample_size;
  opts.workers = a.workers;
  opts.seed = a.seed;
  opts.adjacent_mutation = a.adjacent;
  if (!a.tmax.empty()) opts.deadline = parse_duration(a.tmax);
  std::cerr << "[filter] up to " << a.evaluations << " evaluations with "
            << to_string(kind) << "\n";
  FilterResult result =
      run_filtering(space, kind, cfg, ds ? &batch : nullptr, opts);
  if (!a.history_csv.empty()) write_history_csv(a.history_csv, result.score_history);
  json top = json::array();
  for (const auto& s : result.top_k) top.push_back(to_json(s));
  json config{{"data", data_echo(a.data)},
              {"space", space_echo(space)},
              {"proxy", score_echo(cfg, kind)},
              {"evaluations", a.evaluations},
              {"keep", a.keep},
              {"pool", a.pool},
              {"sample_size", a.sample_size},
              {"workers", a.workers},
              {"seed", a.seed},
              {"adjacent_mutation", a.adjacent}};
  config["t_max_s"] = opts.deadline ? json(*opts.deadline) : json();
  if (!a.history_csv.empty()) config["history_csv"] = a.history_csv;
  emit(json{{"command", "search filter"},
            {"config", config},
            {"top_k", top},
            {"explored", result.explored},
            {"wall_time_s", result.wall_time_s},
            {"score_history", result.score_history},
            {"warnings", result.warnings}});
  return kExitOk;
}

// search refine -------------------------------------------------------------

struct SearchRefineArgs {
  DataArgs data;
  std::string candidates_path;
  std::string init = "he";
  int base_epochs = 2;
  int eta = 2;
  int workers = default_workers();
  int batch_size = 64;
  double lr = 1e-3;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::string tmax;
  double epoch_seconds_hint = 0.0;
  std::string simulate;
  double sim_t2 = 0.0;
};

// Accepts a JSON array of encodings ("8-16" strings or {"arch": ...}
// objects) or any object carrying a top_k array, so `search filter`
// output pipes straight in.
std::vector<ArchEncoding> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open candidate file " + path);
  json parsed = json::parse(in);
  json list;
  if (parsed.is_array()) {
    list = parsed;
  } else if (parsed.is_object() && parsed.contains("top_k")) {
    list = parsed["top_k"];
  } else {
    throw std::runtime_error(
        "candidate file wants a JSON array or an object with a top_k array");
  }
  std::vector<ArchEncoding> out;
  for (const auto& item : list) {
    std::string text;
    if (item.is_string()) {
      text = item.get<std::string>();
    } else if (item.is_object() && item.contains("arch")) {
      text = item["arch"].get<std::string>();
    }
    if (text.empty()) {
      throw std::runtime_error(
          "candidate entries want \"8-16\" strings or {\"arch\": ...} objects");
    }
    out.push_back(ArchEncoding::from_string(text));
  }
  return out;
}

int run_search_refine(const SearchRefineArgs& a) {
  std::vector<ArchEncoding> candidates = load_candidates(a.candidates_path);
  RefineOptions opts;
  opts.base_epochs = a.base_epochs;
  opts.eta = a.eta;
  opts.workers = a.workers;
  if (!a.tmax.empty()) opts.deadline = parse_duration(a.tmax);
  opts.epoch_seconds_hint = a.epoch_seconds_hint;
  std::cerr << "[refine] " << candidates.size() << " candidates, U="
            << a.base_epochs << ", eta=" << a.eta << "\n";
  RefineResult result;
  if (!a.simulate.empty()) {
    BenchFile bench = load_bench(a.simulate);
    SimClock clock;
    SimTrainBackend backend(bench, a.sim_t2, &clock);
    result = run_refinement(candidates, backend, opts, &clock);
  } else {
    if (!has_data(a.data)) {
      throw UsageError(
          "search refine trains for real; pass --data/--synthetic or "
          "--simulate <bench.jsonl>");
    }
    Dataset ds = resolve_dataset(a.data);
    InitMode init;
    try {
      init = init_mode_from_string(a.init);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    auto [train, val] = split(ds, {a.train_fraction, a.seed});
    RealTrainBackend backend(train, val, a.batch_size, a.lr, init, a.seed);
    result = run_refinement(candidates, backend, opts);
  }
  json config{{"candidates", a.candidates_path},
              {"base_epochs", a.base_epochs},
              {"eta", a.eta},
              {"workers", a.workers},
              {"seed", a.seed},
              {"batch_size", a.batch_size},
              {"lr", a.lr},
              {"train_fraction", a.train_fraction},
              {"init", a.init},
              {"data", data_echo(a.data)}};
  config["t_max_s"] = opts.deadline ? json(*opts.deadline) : json();
  if (!a.simulate.empty()) {
    config["simulate"] = a.simulate;
    config["sim_t2"] = a.sim_t2;
  }
  json report = to_json(result);
  report["command"] = "search refine";
  report["config"] = config;
  emit(report);
  return kExitOk;
}

// search atlas --------------------------------------------------------------

struct SearchAtlasArgs {
  DataArgs data;
  ScoreArgs score;
  std::vector<std::string> space_tokens;
  std::string tmax = "60s";
  std::string proxy = "expressflow";
  int ratio = 30;
  int base_epochs = 2;
  int eta = 2;
  int probes = 5;
  int workers = default_workers();
  std::uint64_t seed = 0;
  int batch_size = 64;
  double lr = 1e-3;
  double train_fraction = 0.8;
  int pool = 10;
  int sample_size = 3;
  std::string simulate;
  double sim_t1 = 0.0;
  double sim_t2 = 0.0;
};

int run_search_atlas(const SearchAtlasArgs& a) {
  Dataset ds = resolve_dataset(a.data);
  SearchSpaceSpec space = parse_space(a.space_tokens, ds.dim());
  AtlasOptions opts;
  opts.t_max_s = parse_duration(a.tmax);
  opts.kind = parse_kind(a.proxy);
  opts.score = resolve_score(a.score, a.seed);
  opts.ratio = a.ratio;
  opts.base_epochs = a.base_epochs;
  opts.eta = a.eta;
  opts.probe_count = a.probes;
  opts.workers = a.workers;
  opts.seed = a.seed;
  opts.train_batch_size = a.batch_size;
  opts.lr = a.lr;
  opts.train_fraction = a.train_fraction;
  opts.pool = a.pool;
  opts.sample_size = a.sample_size;
  BenchFile bench;
  std::optional<SimClock> sim_clock;
  Clock* clock = nullptr;
  if (!a.simulate.empty()) {
    bench = load_bench(a.simulate);
    opts.bench = &bench;
    opts.sim_t1 = a.sim_t1;
    opts.sim_t2 = a.sim_t2;
    sim_clock.emplace();
    clock = &*sim_clock;
  }
  std::cerr << "[atlas] budget " << opts.t_max_s << "s, proxy "
            << to_string(opts.kind) << "\n";
  AtlasReport rep = run_atlas(space, ds, opts, clock);
  std::cerr << "[atlas] winner " << rep.winner.to_string() << " after "
            << rep.total_wall_s << "s ("
            << (rep.within_budget ? "within" : "over") << " budget)\n";
  json shortlist = json::array();
  for (const auto& s : rep.shortlist) shortlist.push_back(to_json(s));
  json config{{"data", data_echo(a.data)},
              {"space", space_echo(space)},
              {"proxy", score_echo(opts.score, opts.kind)},
              {"t_max_s", opts.t_max_s},
              {"ratio", a.ratio},
              {"base_epochs", a.base_epochs},
              {"eta", a.eta},
              {"probes", a.probes},
              {"workers", a.workers},
              {"seed", a.seed},
              {"batch_size", a.batch_size},
              {"lr", a.lr},
              {"train_fraction", a.train_fraction},
              {"pool", a.pool},
              {"sample_size", a.sample_size}};
  if (!a.simulate.empty()) {
    config["simulate"] = a.simulate;
    config["sim_t1"] = a.sim_t1;
    config["sim_t2"] = a.sim_t2;
  }
  json report{{"command", "search atlas"},
              {"config", config},
              {"profile", to_json(rep.profile)},
              {"plan", to_json(rep.plan)},
              {"winner", rep.winner.to_string()},
              {"winner_val_auc", rep.winner_val_auc},
              {"profile_wall_s", rep.profile_wall_s},
              {"filter_wall_s", rep.filter_wall_s},
              {"refine_wall_s", rep.refine_wall_s},
              {"total_wall_s", rep.total_wall_s},
              {"within_budget", rep.within_budget},
              {"explored", rep.explored},
              {"shortlist", shortlist},
              {"degradations", rep.degradations}};
  report["winner_bench_auc"] =
      rep.winner_bench_auc ? json(*rep.winner_bench_auc) : json();
  report["refinement"] = rep.refinement ? to_json(*rep.refinement) : json();
  emit(report);
  return rep.within_budget ? kExitOk : kExitBudget;
}

// profile -------------------------------------------------------------------

struct ProfileArgs {
  DataArgs data;
  ScoreArgs score;
  std::vector<std::string> space_tokens;
  std::string proxy = "expressflow";
  int probes = 5;
  std::uint64_t seed = 0;
};

int run_profile(const ProfileArgs& a) {
  Dataset ds = resolve_dataset(a.data);
  SearchSpaceSpec space = parse_space(a.space_tokens, ds.dim());
  ProxyKind kind = parse_kind(a.proxy);
  ScoreConfig cfg = resolve_score(a.score, a.seed);
  ProfileEstimate est = profile(space, ds, kind, cfg, a.probes, a.seed);
  json report{{"command", "profile"},
              {"config", json{{"data", data_echo(a.data)},
                              {"space", space_echo(space)},
                              {"proxy", score_echo(cfg, kind)},
                              {"probes", a.probes},
                              {"seed", a.seed}}}};
  json payload = to_json(est);
  report.update(payload);
  emit(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anytime neural architecture search for tabular MLPs"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  auto* bench = app.add_subcommand("bench", "exhaustive training benchmarks");
  bench->require_subcommand(1);

  BenchBuildArgs build_args;
  auto* bench_build =
      bench->add_subcommand("build", "train every architecture in a space");
  bench_build->add_option("--out", build_args.out, "benchmark file to write")
      ->required();
  bench_build
      ->add_option("--space", build_args.space_tokens,
                   "widths then layers, e.g. \"4,8,16,32 x3\"")
      ->required()
      ->expected(1, 2);
  add_data_flags(bench_build, &build_args.data);
  bench_build->add_option("--epochs", build_args.epochs, "epochs per architecture")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_build->add_option("--batch-size", build_args.batch_size, "training batch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_build->add_option("--lr", build_args.lr, "peak learning rate")
      ->capture_default_str();
  bench_build
      ->add_option("--train-fraction", build_args.train_fraction,
                   "train split fraction")
      ->capture_default_str();
  bench_build->add_option("--seed", build_args.seed, "run seed")
      ->capture_default_str();
  bench_build->add_option("--workers", build_args.workers, "parallel trainers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_build->add_option("--created", build_args.created,
                          "header timestamp override (reproducible rebuilds)");
  bench_build->callback([&] { exit_code = run_bench_build(build_args); });

  BenchQueryArgs query_args;
  auto* bench_query =
      bench->add_subcommand("query", "look up one architecture's record");
  bench_query->add_option("--bench", query_args.bench_path, "benchmark file")
      ->required();
  bench_query->add_option("--arch", query_args.arch, "encoding, e.g. 8-16-32")
      ->required();
  bench_query->add_option("--epoch", query_args.epoch,
                          "0-based epoch (default: best validation epoch)");
  bench_query->callback([&] { exit_code = run_bench_query(query_args); });

  BenchStatsArgs stats_args;
  auto* bench_stats =
      bench->add_subcommand("stats", "distribution summary of a benchmark");
  bench_stats->add_option("--bench", stats_args.bench_path, "benchmark file")
      ->required();
  bench_stats->callback([&] { exit_code = run_bench_stats(stats_args); });

  BenchSrccArgs srcc_args;
  auto* bench_srcc = bench->add_subcommand(
      "srcc", "rank correlation of proxy scores against benchmark AUC");
  bench_srcc->add_option("--bench", srcc_args.bench_path, "benchmark file")
      ->required();
  add_data_flags(bench_srcc, &srcc_args.data);
  add_score_flags(bench_srcc, &srcc_args.score);
  bench_srcc
      ->add_option("--proxies", srcc_args.proxies,
                   "comma list of proxies, or \"all\"")
      ->capture_default_str();
  bench_srcc
      ->add_option("--sample", srcc_args.sample,
                   "architectures to sample (0 = every record)")
      ->capture_default_str();
  bench_srcc->add_option("--seed", srcc_args.seed, "scoring seed")
      ->capture_default_str();
  bench_srcc->callback([&] { exit_code = run_bench_srcc(srcc_args); });

  auto* proxy = app.add_subcommand("proxy", "training-free scoring");
  proxy->require_subcommand(1);

  ProxyScoreArgs score_args;
  auto* proxy_score =
      proxy->add_subcommand("score", "score one architecture with one proxy");
  proxy_score->add_option("--arch", score_args.arch, "encoding, e.g. 8-16-32")
      ->required();
  proxy_score->add_option("--kind", score_args.kind, "proxy name")
      ->capture_default_str();
  proxy_score->add_option("--input-dim", score_args.input_dim,
                          "input width when no dataset is given");
  proxy_score->add_option("--seed", score_args.seed, "init seed")
      ->capture_default_str();
  add_data_flags(proxy_score, &score_args.data);
  add_score_flags(proxy_score, &score_args.score);
  proxy_score->callback([&] { exit_code = run_proxy_score(score_args); });

  IdentityArgs identity_args;
  auto* identity = proxy->add_subcommand(
      "identity-check",
      "verify neuron saliencies equal per-neuron synaptic-saliency sums");
  identity->add_option("--arch", identity_args.arch, "encoding, e.g. 8-16-32")
      ->required();
  identity->add_option("--input-dim", identity_args.input_dim, "input width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  identity->add_option("--seed", identity_args.seed, "first init seed")
      ->capture_default_str();
  identity->add_option("--count", identity_args.count, "seeds to sweep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  identity->callback([&] { exit_code = run_identity_check(identity_args); });

  auto* search = app.add_subcommand("search", "architecture search");
  search->require_subcommand(1);

  SearchFilterArgs filter_args;
  auto* search_filter = search->add_subcommand(
      "filter", "regularized evolution driven by a proxy");
  search_filter
      ->add_option("--space", filter_args.space_tokens,
                   "widths then layers, e.g. \"4,8,16,32 x3\"")
      ->required()
      ->expected(1, 2);
  search_filter->add_option("--proxy", filter_args.proxy, "proxy name")
      ->capture_default_str();
  search_filter->add_option("--m", filter_args.evaluations, "evaluation budget M")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_filter->add_option("--k", filter_args.keep, "shortlist size K")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_filter->add_option("--pool", filter_args.pool, "aging-pool capacity")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_filter
      ->add_option("--sample-size", filter_args.sample_size, "tournament draws")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_filter->add_option("--workers", filter_args.workers, "scoring threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_filter->add_option("--input-dim", filter_args.input_dim,
                            "input width when no dataset is given");
  search_filter->add_option("--seed", filter_args.seed, "search seed")
      ->capture_default_str();
  search_filter->add_flag("--adjacent-mutation", filter_args.adjacent,
                          "mutate widths to list neighbors only");
  search_filter->add_option("--tmax", filter_args.tmax,
                            "scoring deadline, e.g. 30s, 2m");
  search_filter->add_option("--history-csv", filter_args.history_csv,
                            "also write best-so-far scores as CSV");
  add_data_flags(search_filter, &filter_args.data);
  add_score_flags(search_filter, &filter_args.score);
  search_filter->callback([&] { exit_code = run_search_filter(filter_args); });

  SearchRefineArgs refine_args;
  auto* search_refine = search->add_subcommand(
      "refine", "successive-halving training over a candidate list");
  search_refine
      ->add_option("--candidates", refine_args.candidates_path,
                   "JSON candidate file (filter output works)")
      ->required();
  search_refine->add_option("--u", refine_args.base_epochs, "base epochs U")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_refine->add_option("--eta", refine_args.eta, "elimination rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_refine->add_option("--workers", refine_args.workers, "training threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_refine->add_option("--batch-size", refine_args.batch_size,
                            "training batch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_refine->add_option("--lr", refine_args.lr, "peak learning rate")
      ->capture_default_str();
  search_refine
      ->add_option("--train-fraction", refine_args.train_fraction,
                   "train split fraction")
      ->capture_default_str();
  search_refine->add_option("--init", refine_args.init,
                            "weight init: lecun|xavier|he")
      ->capture_default_str();
  search_refine->add_option("--seed", refine_args.seed, "training seed")
      ->capture_default_str();
  search_refine->add_option("--tmax", refine_args.tmax,
                            "training deadline, e.g. 5m");
  search_refine->add_option("--epoch-seconds-hint", refine_args.epoch_seconds_hint,
                            "prior seconds-per-epoch for the deadline check");
  search_refine->add_option("--simulate", refine_args.simulate,
                            "replay curves from this benchmark, no training");
  search_refine->add_option("--sim-t2", refine_args.sim_t2,
                            "simulated seconds per epoch");
  add_data_flags(search_refine, &refine_args.data);
  search_refine->callback([&] { exit_code = run_search_refine(refine_args); });

  SearchAtlasArgs atlas_args;
  auto* search_atlas = search->add_subcommand(
      "atlas", "budget-aware filter + refine pipeline");
  search_atlas
      ->add_option("--space", atlas_args.space_tokens,
                   "widths then layers, e.g. \"4,8,16,32 x3\"")
      ->required()
      ->expected(1, 2);
  search_atlas->add_option("--tmax", atlas_args.tmax, "total budget, e.g. 60s")
      ->capture_default_str();
  search_atlas->add_option("--proxy", atlas_args.proxy, "filtering proxy")
      ->capture_default_str();
  search_atlas->add_option("--ratio", atlas_args.ratio, "evaluations per kept candidate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--u", atlas_args.base_epochs, "base epochs U")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--eta", atlas_args.eta, "elimination rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--probes", atlas_args.probes, "profiling probes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--workers", atlas_args.workers, "worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--seed", atlas_args.seed, "run seed")
      ->capture_default_str();
  search_atlas->add_option("--batch-size", atlas_args.batch_size,
                           "training batch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--lr", atlas_args.lr, "peak learning rate")
      ->capture_default_str();
  search_atlas
      ->add_option("--train-fraction", atlas_args.train_fraction,
                   "train split fraction")
      ->capture_default_str();
  search_atlas->add_option("--pool", atlas_args.pool, "aging-pool capacity")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas
      ->add_option("--sample-size", atlas_args.sample_size, "tournament draws")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  search_atlas->add_option("--simulate", atlas_args.simulate,
                           "replay training from this benchmark");
  search_atlas->add_option("--sim-t1", atlas_args.sim_t1,
                           "simulated seconds per proxy evaluation");
  search_atlas->add_option("--sim-t2", atlas_args.sim_t2,
                           "simulated seconds per training epoch");
  add_data_flags(search_atlas, &atlas_args.data);
  add_score_flags(search_atlas, &atlas_args.score);
  search_atlas->callback([&] { exit_code = run_search_atlas(atlas_args); });

  ProfileArgs profile_args;
  auto* profile_cmd = app.add_subcommand(
      "profile", "measure per-evaluation and per-epoch cost");
  profile_cmd
      ->add_option("--space", profile_args.space_tokens,
                   "widths then layers, e.g. \"4,8,16,32 x3\"")
      ->required()
      ->expected(1, 2);
  profile_cmd->add_option("--proxy", profile_args.proxy, "proxy name")
      ->capture_default_str();
  profile_cmd->add_option("--probes", profile_args.probes, "architectures to time")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  profile_cmd->add_option("--seed", profile_args.seed, "probe-choice seed")
      ->capture_default_str();
  add_data_flags(profile_cmd, &profile_args.data);
  add_score_flags(profile_cmd, &profile_args.score);
  profile_cmd->callback([&] { exit_code = run_profile(profile_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return exit_code;
}
