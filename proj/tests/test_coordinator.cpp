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

#include "atlas/coordinator.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

#include "atlas/rng.hpp"

using namespace atlas;

namespace {

SearchSpaceSpec tiny_space() {
  SearchSpaceSpec s;
  s.num_layers = 2;
  s.width_choices = {4, 8};
  s.input_dim = 6;
  return s;
}

BenchFile curve_bench() {
  BenchFile b;
  b.header.num_layers = 2;
  b.header.width_choices = {4, 8};
  b.header.dataset_sha256 = "00";
  b.header.epochs = 6;
  b.header.batch_size = 32;
  b.header.lr = 1e-3;
  b.header.seed = 7;
  b.header.created = "t";

  auto rec = [](std::string arch, std::vector<double> val) {
    BenchRecord r;
    r.arch = std::move(arch);
    r.params = 100;
    r.val_auc = std::move(val);
    r.train_auc = {0.5, 0.6, 0.7, 0.8, 0.85, 0.9};
    r.train_loss = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
    r.val_loss = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
    r.epoch_time_s = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    r.seed = 1;
    return r;
  };
  b.records.push_back(rec("4-4", {0.60, 0.62, 0.63, 0.64, 0.65, 0.66}));
  b.records.push_back(rec("4-8", {0.50, 0.70, 0.70, 0.71, 0.72, 0.80}));
  b.records.push_back(rec("8-4", {0.55, 0.68, 0.70, 0.75, 0.85, 0.90}));
  b.records.push_back(rec("8-8", {0.40, 0.45, 0.50, 0.52, 0.54, 0.56}));
  b.rebuild_index();
  return b;
}

}  // namespace

TEST_CASE("the planner reproduces the worked budget split") {
  // t1=2ms, t2=0.5s, one minute budget: K=15 is the largest K with
  // 0.06K + K*floor(log2 K) <= 60 (K=16 would cost 64.96).
  CoordinatorPlan p = make_plan(0.002, 0.5, 60.0, 30, 2, 2);
  CHECK(p.branch == PlanBranch::Standard);
  CHECK(p.keep == 15);
  CHECK(p.evaluations == 450);
  CHECK(p.t1_s == doctest::Approx(0.9));
  CHECK(p.t2_s == doctest::Approx(45.0));
  CHECK(p.t1_s + p.t2_s <= 60.0);
}

TEST_CASE("planner branch boundaries") {
  SUBCASE("budget of exactly one evaluation plans filtering only") {
    CoordinatorPlan p = make_plan(0.01, 1.0, 0.01, 30, 2, 2);
    CHECK(p.branch == PlanBranch::FilterOnly);
    CHECK(p.keep == 0);
    CHECK(p.evaluations == 1);
  }

  SUBCASE("below one evaluation is an error") {
    CHECK_THROWS_WITH_AS(make_plan(0.01, 1.0, 0.005, 30, 2, 2),
                         doctest::Contains("below one proxy evaluation"),
                         std::invalid_argument);
  }

  SUBCASE("a single trainable candidate with reduced evaluations") {
    // Full-ratio filtering costs 3.0 which exceeds the budget, but one
    // training (2 epochs at 1 s) plus 5 evaluations fits in 2.5 s.
    CoordinatorPlan p = make_plan(0.1, 1.0, 2.5, 30, 2, 2);
    CHECK(p.branch == PlanBranch::SingleCandidate);
    CHECK(p.keep == 1);
    CHECK(p.evaluations == 5);
    CHECK(p.t1_s + p.t2_s <= 2.5 + 1e-12);
  }

  SUBCASE("degraded plans never report zero evaluations") {
    CoordinatorPlan p = make_plan(1.0, 100.0, 1.0, 30, 2, 2);
    CHECK(p.branch == PlanBranch::FilterOnly);
    CHECK(p.evaluations == 1);
  }

  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(make_plan(0.0, 1.0, 10.0, 30, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(0.1, -1.0, 10.0, 30, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(0.1, 1.0, 0.0, 30, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(0.1, 1.0, 10.0, 0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(0.1, 1.0, 10.0, 30, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(0.1, 1.0, 10.0, 30, 2, 1), std::invalid_argument);
  }
}

TEST_CASE("plans grow monotonically with the budget") {
  int prev_k = -1;
  long prev_m = -1;
  for (double t = 0.1; t <= 200.0; t += 0.7) {
    CoordinatorPlan p = make_plan(0.002, 0.5, t, 30, 2, 2);
    CHECK(p.keep >= prev_k);
    CHECK(p.evaluations >= prev_m);
    CHECK(p.t1_s + p.t2_s <= t + 1e-9);
    prev_k = p.keep;
    prev_m = p.evaluations;
  }

  // Doubling the budget never shrinks the candidate count.
  for (double t : {0.5, 2.0, 10.0, 40.0, 160.0}) {
    CoordinatorPlan a = make_plan(0.003, 0.4, t, 30, 2, 2);
    CoordinatorPlan b = make_plan(0.003, 0.4, 2 * t, 30, 2, 2);
    CHECK(b.keep >= a.keep);
    CHECK(b.evaluations >= a.evaluations);
  }
}

TEST_CASE("every feasible plan respects its own budget") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    double t1 = 1e-4 + rng.uniform() * 0.05;
    double t2 = 0.01 + rng.uniform() * 2.0;
    double tmax = t1 + rng.uniform() * 100.0;
    CoordinatorPlan p = make_plan(t1, t2, tmax, 30, 2, 2);
    CHECK(p.t1_s + p.t2_s <= tmax + 1e-9);
    if (p.branch == PlanBranch::Standard) {
      CHECK(p.keep >= 1);
      CHECK(p.evaluations == 30L * p.keep);
    }
    CHECK(p.evaluations >= 1);
  }
}

TEST_CASE("profiling measures positive times on real probes") {
  SearchSpaceSpec space = tiny_space();
  Dataset ds = make_synthetic(200, space.input_dim, 0.1, 5);
  ScoreConfig cfg;

  ProfileEstimate est = profile(space, ds, ProxyKind::ExpressFlow, cfg, 3, 11);
  CHECK(est.t1 > 0.0);
  CHECK(est.t2 > 0.0);
  CHECK(est.probe_count == 3);

  CHECK_THROWS_AS(profile(space, ds, ProxyKind::ExpressFlow, cfg, 0, 11),
                  std::invalid_argument);
}

TEST_CASE("a real end-to-end run returns a refined winner inside its budget") {
  SearchSpaceSpec space = tiny_space();
  Dataset ds = make_synthetic(400, space.input_dim, 0.05, 31);

  AtlasOptions opts;
  opts.t_max_s = 30.0;
  opts.seed = 3;
  opts.probe_count = 2;
  opts.train_batch_size = 32;

  AtlasReport report = run_atlas(space, ds, opts);

  CHECK_NOTHROW(validate_encoding(report.winner, space));
  CHECK(report.within_budget);
  CHECK(report.total_wall_s <= 1.1 * opts.t_max_s);
  CHECK(report.plan.keep >= 1);
  CHECK(report.explored >= 1);
  REQUIRE(report.refinement.has_value());
  CHECK(report.winner_val_auc > 0.5);
  CHECK(report.profile_wall_s > 0.0);
  CHECK(report.filter_wall_s > 0.0);
  CHECK(report.refine_wall_s > 0.0);
}

TEST_CASE("simulated runs replay the benchmark under a virtual clock") {
  SearchSpaceSpec space = tiny_space();
  Dataset ds = make_synthetic(200, space.input_dim, 0.1, 5);
  BenchFile bench = curve_bench();

  AtlasOptions opts;
  opts.seed = 3;
  opts.bench = &bench;
  opts.sim_t1 = 0.002;
  opts.sim_t2 = 0.5;

  SUBCASE("a ten-second budget refines all four architectures") {
    opts.t_max_s = 10.0;
    SimClock clock;
    AtlasReport report = run_atlas(space, ds, opts, &clock);

    // Plan: K=4 fits (0.24 + 8 s), K=5 does not (10.3 s).
    CHECK(report.plan.keep == 4);
    CHECK(report.plan.evaluations == 120);
    CHECK(report.explored == 4);  // capped at the space size

    // Halving over the recorded curves crowns the late bloomer.
    CHECK(report.winner.to_string() == "8-4");
    REQUIRE(report.winner_bench_auc.has_value());
    CHECK(*report.winner_bench_auc == 0.90);
    CHECK(report.within_budget);
    CHECK(report.total_wall_s == doctest::Approx(4 * 0.002 + 16 * 0.5));
  }

  SUBCASE("a tight budget skips training but still answers") {
    opts.t_max_s = 0.5;
    SimClock clock;
    AtlasReport report = run_atlas(space, ds, opts, &clock);

    CHECK(report.plan.keep == 1);
    CHECK_NOTHROW(validate_encoding(report.winner, space));
    CHECK(report.within_budget);
    REQUIRE(report.refinement.has_value());
    CHECK(report.refinement->rounds.empty());  // round skipped by deadline
    bool skipped = false;
    for (const auto& d : report.degradations)
      if (d.find("refinement") != std::string::npos) skipped = true;
    CHECK(skipped);
  }

  SUBCASE("a budget below one epoch degrades to filtering only") {
    opts.t_max_s = 0.01;
    SimClock clock;
    AtlasReport report = run_atlas(space, ds, opts, &clock);

    CHECK(report.plan.branch == PlanBranch::FilterOnly);
    CHECK(report.plan.keep == 0);
    CHECK_FALSE(report.refinement.has_value());
    CHECK_NOTHROW(validate_encoding(report.winner, space));
    CHECK(report.winner_bench_auc.has_value());
    CHECK(report.within_budget);
  }

  SUBCASE("longer budgets never lower the winner's recorded quality") {
    double prev = -1.0;
    for (double budget : {0.01, 0.5, 10.0}) {
      opts.t_max_s = budget;
      SimClock clock;
      AtlasReport report = run_atlas(space, ds, opts, &clock);
      REQUIRE(report.winner_bench_auc.has_value());
      CHECK(*report.winner_bench_auc >= prev);
      prev = *report.winner_bench_auc;
    }
  }
}

TEST_CASE("the coordinator rejects unusable input") {
  SearchSpaceSpec space = tiny_space();
  Dataset ds = make_synthetic(150, space.input_dim, 0.1, 2);
  AtlasOptions opts;

  {
    AtlasOptions bad = opts;
    bad.t_max_s = 0.0;
    CHECK_THROWS_AS(run_atlas(space, ds, bad), std::invalid_argument);
  }
  {
    AtlasOptions bad = opts;
    bad.workers = 0;
    CHECK_THROWS_AS(run_atlas(space, ds, bad), std::invalid_argument);
  }
  {
    BenchFile bench = curve_bench();
    AtlasOptions bad = opts;
    bad.bench = &bench;  // simulation without sim costs
    CHECK_THROWS_AS(run_atlas(space, ds, bad), std::invalid_argument);
  }
}
