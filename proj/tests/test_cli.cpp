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

// Drives the installed binary as a subprocess: exit codes, stdout purity
// (one JSON document, nothing else), schema conformance, and agreement
// with direct library calls under the same seeds.

#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "atlas/bench.hpp"
#include "atlas/clock.hpp"
#include "atlas/coordinator.hpp"
#include "atlas/dataset.hpp"
#include "atlas/mlp.hpp"
#include "atlas/proxies.hpp"
#include "atlas/refinement.hpp"
#include "atlas/search_space.hpp"

namespace {

using json = nlohmann::json;
using namespace atlas;

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(ATLAS_NAS_BIN) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = out;
  return result;
}

// Strict parse of the full captured stdout, so any stray non-JSON byte
// (progress text, a second document) fails the test.
json parse_report(const CliResult& result) {
  REQUIRE(result.exit_code == 0);
  return json::parse(result.out);
}

std::filesystem::path tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "atlas_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

// Minimal JSON-schema subset validator covering what report.schema.json
// uses: type (string or list), enum, required, properties,
// additionalProperties=false, items, minItems/maxItems.
bool type_matches(const json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "null") return value.is_null();
  return false;
}

void validate_schema(const json& value, const json& schema,
                     const std::string& path, std::vector<std::string>* errors) {
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(value, t.get<std::string>());
    } else {
      for (const auto& option : t) {
        if (type_matches(value, option.get<std::string>())) ok = true;
      }
    }
    if (!ok) {
      errors->push_back(path + ": type mismatch (" + t.dump() + ", got " +
                        value.type_name() + ")");
      return;
    }
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& option : schema["enum"]) {
      if (value == option) ok = true;
    }
    if (!ok) errors->push_back(path + ": " + value.dump() + " not in enum");
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& name : schema["required"]) {
        if (!value.contains(name.get<std::string>())) {
          errors->push_back(path + ": missing required field " +
                            name.get<std::string>());
        }
      }
    }
    const json empty = json::object();
    const json& props = schema.contains("properties") ? schema["properties"] : empty;
    for (const auto& [key, member] : value.items()) {
      if (props.contains(key)) {
        validate_schema(member, props[key], path + "." + key, errors);
      } else if (schema.contains("additionalProperties") &&
                 schema["additionalProperties"] == false) {
        errors->push_back(path + ": unknown field " + key);
      }
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) {
      errors->push_back(path + ": fewer than minItems entries");
    }
    if (schema.contains("maxItems") && value.size() > schema["maxItems"].get<std::size_t>()) {
      errors->push_back(path + ": more than maxItems entries");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        validate_schema(value[i], schema["items"],
                        path + "[" + std::to_string(i) + "]", errors);
      }
    }
  }
}

const json& report_schema() {
  static const json schema = [] {
    std::ifstream in(ATLAS_SCHEMA_PATH);
    REQUIRE(in.good());
    return json::parse(in);
  }();
  return schema;
}

void check_schema(const json& report) {
  std::vector<std::string> errors;
  validate_schema(report, report_schema(), "$", &errors);
  std::string joined;
  for (const auto& e : errors) joined += e + "; ";
  INFO("schema violations: " << joined);
  CHECK(errors.empty());
}

const std::string kSyntheticSpec = "n=300,d=6,noise=0.1,seed=7";

// One tiny benchmark shared across cases, built on first use.
std::string shared_bench_path() {
  static const std::string path = [] {
    std::string p = (tmp_dir() / "shared_bench.jsonl").string();
    std::filesystem::remove(p);
    CliResult r = run_cli("bench build --out " + p +
                          " --space \"4,8 x2\" --synthetic " + kSyntheticSpec +
                          " --epochs 3 --seed 7 --workers 2"
                          " --created 2026-01-01T00:00:00Z");
    REQUIRE(r.exit_code == 0);
    return p;
  }();
  return path;
}

Dataset shared_dataset() { return make_synthetic(300, 6, 0.1, 7); }

}  // namespace

TEST_CASE("cli: help and usage errors exit 0 and 1") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("proxy score --help").exit_code == 0);

  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("bench").exit_code == 1);
  CHECK(run_cli("frobnicate").exit_code == 1);
  CHECK(run_cli("proxy score --arch 8-8 --bogus 1").exit_code == 1);
  CHECK(run_cli("search filter --m 5").exit_code == 1);
  CHECK(run_cli("proxy score --arch 8-8 --input-dim 4 --kind nosuch").exit_code == 1);
  CHECK(run_cli("proxy score --arch 8x8 --input-dim 4").exit_code == 1);
  CHECK(run_cli("search atlas --space \"4,8 x2\" --tmax 5q --synthetic " +
                kSyntheticSpec).exit_code == 1);
  CHECK(run_cli("search filter --space \"4,8\" --synthetic " + kSyntheticSpec)
            .exit_code == 1);
  CHECK(run_cli("proxy score --arch 8-8 --data a.csv --synthetic " +
                kSyntheticSpec).exit_code == 1);
  CHECK(run_cli("proxy score --arch 8-8 --synthetic d=6,noise=0.1").exit_code == 1);
  CHECK(run_cli("proxy score --arch 8-8 --input-dim 4 --kind snip").exit_code == 1);
}

TEST_CASE("cli: proxy score matches the library and echoes its config") {
  CliResult r = run_cli("proxy score --arch 8-16 --synthetic " + kSyntheticSpec +
                        " --seed 11");
  json report = parse_report(r);
  check_schema(report);
  CHECK(report["command"] == "proxy score");
  CHECK(report["arch"] == "8-16");
  CHECK(report["kind"] == "expressflow");
  CHECK(report["degenerate"] == false);
  CHECK(report["config"]["proxy"]["seed"] == 11);
  CHECK(report["config"]["input_dim"] == 6);

  ArchEncoding enc = ArchEncoding::from_string("8-16");
  ScoreConfig cfg;
  cfg.seed = 11;
  MlpModel model(enc.sizes, 6, cfg.init, arch_seed(11, enc));
  DataBatch empty;
  ProxyScore expected = score_proxy(ProxyKind::ExpressFlow, model, empty, cfg);
  CHECK(report["score"].get<double>() == expected.value);

  CliResult again = run_cli("proxy score --arch 8-16 --synthetic " +
                            kSyntheticSpec + " --seed 11");
  CHECK(json::parse(again.out)["score"] == report["score"]);
  CliResult reseeded = run_cli("proxy score --arch 8-16 --synthetic " +
                               kSyntheticSpec + " --seed 12");
  CHECK(json::parse(reseeded.out)["score"] != report["score"]);
}

TEST_CASE("cli: data-free proxies run without a dataset, data-bound ones refuse") {
  CliResult r = run_cli("proxy score --arch 8-8 --input-dim 5 --kind synflow");
  json report = parse_report(r);
  check_schema(report);
  CHECK(report["config"]["input_dim"] == 5);

  CliResult snip = run_cli("proxy score --arch 8-8 --kind snip --synthetic " +
                           kSyntheticSpec);
  check_schema(parse_report(snip));
}

TEST_CASE("cli: identity-check sweeps seeds and passes") {
  CliResult r = run_cli("proxy identity-check --arch 8-4 --input-dim 6 --count 5 --seed 2");
  json report = parse_report(r);
  check_schema(report);
  CHECK(report["pass"] == true);
  CHECK(report["runs"].size() == 5);
  CHECK(report["max_rel_deviation"].get<double>() < 1e-9);
  CHECK(report["runs"][0]["seed"] == 2);
  CHECK(report["runs"][4]["seed"] == 6);
}

TEST_CASE("cli: bench build writes a loadable file and reports it") {
  std::string path = shared_bench_path();
  BenchFile bench = load_bench(path);
  CHECK(bench.size() == 4);
  CHECK(bench.header.epochs == 3);
  CHECK(bench.header.created == "2026-01-01T00:00:00Z");
  CHECK(bench.header.dataset_sha256 == dataset_sha256(shared_dataset()));

  ArchEncoding enc = ArchEncoding::from_string("4-8");
  const BenchRecord* rec = bench.find("4-8");
  REQUIRE(rec != nullptr);
  CHECK(rec->seed == arch_seed(7, enc));
  CHECK(rec->val_auc.size() == 3);
  MlpModel probe(enc.sizes, 6, InitMode::He, 1);
  CHECK(rec->params == probe.param_count());

  // A rerun over the complete file keeps every record and the header.
  CliResult rerun = run_cli("bench build --out " + path +
                            " --space \"4,8 x2\" --synthetic " + kSyntheticSpec +
                            " --epochs 3 --seed 7 --workers 1"
                            " --created 2026-01-01T00:00:00Z");
  json report = parse_report(rerun);
  check_schema(report);
  CHECK(report["architectures"] == 4);
  CHECK(report["header"]["created"] == "2026-01-01T00:00:00Z");

  // Same path with different settings is refused, not clobbered.
  CliResult clash = run_cli("bench build --out " + path +
                            " --space \"4,8 x2\" --synthetic " + kSyntheticSpec +
                            " --epochs 5 --seed 7");
  CHECK(clash.exit_code == 2);
}

TEST_CASE("cli: bench query returns per-epoch and best slices") {
  std::string path = shared_bench_path();
  json best = parse_report(run_cli("bench query --bench " + path + " --arch 4-8"));
  check_schema(best);
  json fixed = parse_report(run_cli("bench query --bench " + path +
                                    " --arch 4-8 --epoch 1"));
  check_schema(fixed);
  CHECK(fixed["epoch"] == 1);
  CHECK(fixed["config"]["epoch"] == 1);
  CHECK(best["config"]["epoch"].is_null());

  BenchFile bench = load_bench(path);
  const BenchRecord* rec = bench.find("4-8");
  REQUIRE(rec != nullptr);
  CHECK(best["val_auc"].get<double>() == best_val_auc(*rec));
  CHECK(fixed["val_auc"].get<double>() == rec->val_auc[1]);

  CHECK(run_cli("bench query --bench " + path + " --arch 16-16").exit_code == 2);
  CHECK(run_cli("bench query --bench /nonexistent.jsonl --arch 4-8").exit_code == 2);
}

TEST_CASE("cli: bench stats summarizes the file") {
  json report = parse_report(run_cli("bench stats --bench " + shared_bench_path()));
  check_schema(report);
  CHECK(report["architectures"] == 4);
  CHECK(report["val_ecdf"].back()[1].get<double>() == 1.0);
  CHECK(report["params_vs_val"].size() == 4);
}

TEST_CASE("cli: bench srcc reports entries and rejects a different dataset") {
  json report = parse_report(run_cli(
      "bench srcc --bench " + shared_bench_path() + " --synthetic " +
      kSyntheticSpec + " --proxies expressflow,weightnorm --seed 1"));
  check_schema(report);
  CHECK(report["sample_count"] == 4);
  REQUIRE(report["entries"].size() == 2);
  CHECK(report["entries"][0]["kind"] == "expressflow");
  CHECK(report["entries"][1]["kind"] == "weightnorm");
  for (const auto& entry : report["entries"]) {
    CHECK(entry["mean_score_time_s"].get<double>() > 0.0);
  }

  CHECK(run_cli("bench srcc --bench " + shared_bench_path() +
                " --synthetic n=300,d=6,noise=0.2,seed=7").exit_code == 2);
  CHECK(run_cli("bench srcc --bench " + shared_bench_path()).exit_code == 1);
  CHECK(run_cli("bench srcc --bench " + shared_bench_path() + " --synthetic " +
                kSyntheticSpec + " --proxies nosuch").exit_code == 1);
}

TEST_CASE("cli: search filter emits a ranked shortlist plus history CSV") {
  std::string csv = (tmp_dir() / "history.csv").string();
  json report = parse_report(run_cli(
      "search filter --space \"4,8 x2\" --m 6 --k 3 --synthetic " +
      kSyntheticSpec + " --seed 5 --workers 1 --history-csv " + csv));
  check_schema(report);
  CHECK(report["command"] == "search filter");
  REQUIRE(report["top_k"].size() == 3);
  for (std::size_t i = 1; i < report["top_k"].size(); ++i) {
    CHECK(report["top_k"][i - 1]["score"].get<double>() >=
          report["top_k"][i]["score"].get<double>());
  }
  CHECK(report["explored"] == 4);
  CHECK(report["score_history"].size() ==
        static_cast<std::size_t>(report["explored"].get<int>()));
  CHECK(report["config"]["space"]["num_layers"] == 2);

  std::ifstream in(csv);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "evaluation,best_score");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == report["explored"].get<int>());
}

TEST_CASE("cli: filter output pipes into simulated refine and matches the library") {
  std::string filter_out = (tmp_dir() / "filter_out.json").string();
  CliResult filter = run_cli("search filter --space \"4,8 x2\" --m 6 --k 3"
                             " --synthetic " + kSyntheticSpec + " --seed 5");
  json filter_report = parse_report(filter);
  {
    std::ofstream out(filter_out);
    out << filter_report.dump();
  }

  json report = parse_report(run_cli(
      "search refine --candidates " + filter_out + " --simulate " +
      shared_bench_path() + " --sim-t2 0.5 --u 2"));
  check_schema(report);

  std::vector<ArchEncoding> candidates;
  for (const auto& item : filter_report["top_k"]) {
    candidates.push_back(ArchEncoding::from_string(item["arch"].get<std::string>()));
  }
  BenchFile bench = load_bench(shared_bench_path());
  SimClock clock;
  SimTrainBackend backend(bench, 0.5, &clock);
  RefineOptions opts;
  opts.base_epochs = 2;
  RefineResult expected = run_refinement(candidates, backend, opts, &clock);
  CHECK(report["winner"] == expected.winner.to_string());
  CHECK(report["winner_val_auc"].get<double>() == expected.winner_val_auc);
  CHECK(report["total_epochs"] == expected.total_epochs);
  CHECK(report["wall_time_s"].get<double>() == expected.wall_time_s);
  CHECK(report["rounds"].size() == expected.rounds.size());
}

TEST_CASE("cli: refine accepts a bare JSON array and rejects junk") {
  std::string list_path = (tmp_dir() / "candidates.json").string();
  {
    std::ofstream out(list_path);
    out << R"(["4-4", {"arch": "8-8"}])";
  }
  json report = parse_report(run_cli(
      "search refine --candidates " + list_path + " --simulate " +
      shared_bench_path() + " --sim-t2 0.25 --u 1"));
  check_schema(report);
  CHECK(report["rounds"][0]["leaderboard"].size() == 2);

  std::string junk_path = (tmp_dir() / "junk.json").string();
  {
    std::ofstream out(junk_path);
    out << R"({"nothing": true})";
  }
  CHECK(run_cli("search refine --candidates " + junk_path + " --simulate " +
                shared_bench_path()).exit_code == 2);
  CHECK(run_cli("search refine --candidates /nonexistent.json --simulate " +
                shared_bench_path()).exit_code == 2);
  CHECK(run_cli("search refine --candidates " + list_path).exit_code == 1);
}

TEST_CASE("cli: real refine trains and ranks the candidates") {
  std::string list_path = (tmp_dir() / "real_candidates.json").string();
  {
    std::ofstream out(list_path);
    out << R"(["4-4", "8-8"])";
  }
  json report = parse_report(run_cli(
      "search refine --candidates " + list_path + " --synthetic " +
      kSyntheticSpec + " --u 1 --seed 3"));
  check_schema(report);
  CHECK(report["total_epochs"] == 2);
  CHECK(report["winner_val_auc"].get<double>() > 0.0);
}

TEST_CASE("cli: simulated atlas run matches the library and stays in budget") {
  CliResult r = run_cli("search atlas --space \"4,8 x2\" --tmax 10s"
                        " --synthetic " + kSyntheticSpec + " --seed 3"
                        " --simulate " + shared_bench_path() +
                        " --sim-t1 0.002 --sim-t2 0.5");
  json report = parse_report(r);
  check_schema(report);
  CHECK(report["within_budget"] == true);
  CHECK(report["plan"]["branch"] == "standard");
  CHECK(report["config"]["t_max_s"] == 10.0);

  SearchSpaceSpec space{2, {4, 8}, 6};
  Dataset ds = shared_dataset();
  BenchFile bench = load_bench(shared_bench_path());
  AtlasOptions opts;
  opts.t_max_s = 10.0;
  opts.seed = 3;
  opts.bench = &bench;
  opts.sim_t1 = 0.002;
  opts.sim_t2 = 0.5;
  SimClock clock;
  AtlasReport expected = run_atlas(space, ds, opts, &clock);
  CHECK(report["winner"] == expected.winner.to_string());
  CHECK(report["explored"] == expected.explored);
  CHECK(report["total_wall_s"].get<double>() == expected.total_wall_s);
  REQUIRE(!report["winner_bench_auc"].is_null());
  REQUIRE(expected.winner_bench_auc.has_value());
  CHECK(report["winner_bench_auc"].get<double>() == *expected.winner_bench_auc);
}

TEST_CASE("cli: real atlas run returns a winner within budget") {
  CliResult r = run_cli("search atlas --space \"4,8 x2\" --tmax 20s"
                        " --synthetic " + kSyntheticSpec + " --seed 1");
  json report = parse_report(r);
  check_schema(report);
  CHECK(report["within_budget"] == true);
  CHECK(!report["winner"].get<std::string>().empty());
  CHECK(report["total_wall_s"].get<double>() <= 20.0 * 1.1);
}

TEST_CASE("cli: profile reports positive unit costs") {
  json report = parse_report(run_cli("profile --space \"4,8 x2\" --synthetic " +
                                     kSyntheticSpec + " --probes 3"));
  check_schema(report);
  CHECK(report["t1_s"].get<double>() > 0.0);
  CHECK(report["t2_s"].get<double>() > 0.0);
  CHECK(report["probe_count"] == 3);
}

TEST_CASE("cli: schema validator rejects malformed reports") {
  const json& schema = report_schema();
  auto violations = [&](const json& doc) {
    std::vector<std::string> errors;
    validate_schema(doc, schema, "$", &errors);
    return errors;
  };
  CHECK(!violations(json{{"config", json::object()}}).empty());
  CHECK(!violations(json{{"command", "nope"}, {"config", json::object()}}).empty());
  CHECK(!violations(json{{"command", "profile"}, {"config", 3}}).empty());
  CHECK(!violations(json{{"command", "profile"},
                         {"config", json::object()},
                         {"t1_s", "fast"}}).empty());
  CHECK(!violations(json{{"command", "profile"},
                         {"config", json::object()},
                         {"surprise", 1}}).empty());
  CHECK(violations(json{{"command", "profile"},
                        {"config", json::object()},
                        {"t1_s", 0.5}}).empty());
}
