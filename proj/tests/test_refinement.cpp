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

#include "atlas/refinement.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "atlas/rng.hpp"

using namespace atlas;

namespace {

// Crafted benchmark: six recorded epochs per architecture, curves chosen
// so halving rankings can be traced on paper.
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

  auto rec = [](std::string arch, std::vector<double> val,
                std::vector<double> loss) {
    BenchRecord r;
    r.arch = std::move(arch);
    r.params = 100;
    r.val_auc = std::move(val);
    r.train_loss = std::move(loss);
    r.train_auc = {0.5, 0.6, 0.7, 0.8, 0.85, 0.9};
    r.val_loss = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
    r.epoch_time_s = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    r.seed = 1;
    return r;
  };
  // After 2 epochs the ranking is 4-8 (.70), 8-4 (.68), 4-4 (.62),
  // 8-8 (.45); after 6 epochs 8-4 overtakes 4-8.
  b.records.push_back(rec("4-4", {0.60, 0.62, 0.63, 0.64, 0.65, 0.66},
                          {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}));
  b.records.push_back(rec("4-8", {0.50, 0.70, 0.70, 0.71, 0.72, 0.80},
                          {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}));
  b.records.push_back(rec("8-4", {0.55, 0.68, 0.70, 0.75, 0.85, 0.90},
                          {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}));
  b.records.push_back(rec("8-8", {0.40, 0.45, 0.50, 0.52, 0.54, 0.56},
                          {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}));
  b.rebuild_index();
  return b;
}

std::vector<ArchEncoding> encs(std::vector<std::string> keys) {
  std::vector<ArchEncoding> out;
  for (auto& k : keys) out.push_back(ArchEncoding::from_string(k));
  return out;
}

}  // namespace

TEST_CASE("halving schedules follow the doubling arithmetic") {
  SUBCASE("eight candidates, base two epochs") {
    HalvingSchedule s = HalvingSchedule::make(8, 2, 2);
    REQUIRE(s.rounds.size() == 3);
    CHECK(s.rounds[0].survivors == 8);
    CHECK(s.rounds[0].epochs_added == 2);
    CHECK(s.rounds[1].survivors == 4);
    CHECK(s.rounds[1].epochs_added == 4);
    CHECK(s.rounds[2].survivors == 2);
    CHECK(s.rounds[2].epochs_added == 8);
    CHECK(s.total_epochs == 48);  // 16 + 16 + 16
    CHECK(s.horizon == 16);
  }

  SUBCASE("single candidate trains once for the base epochs") {
    HalvingSchedule s = HalvingSchedule::make(1, 3, 2);
    REQUIRE(s.rounds.size() == 1);
    CHECK(s.rounds[0].survivors == 1);
    CHECK(s.rounds[0].epochs_added == 3);
    CHECK(s.total_epochs == 3);
    CHECK(s.horizon == 3);
  }

  SUBCASE("non-power sizes use ceilings") {
    HalvingSchedule s = HalvingSchedule::make(5, 1, 2);
    REQUIRE(s.rounds.size() == 2);
    CHECK(s.rounds[0].survivors == 5);
    CHECK(s.rounds[0].epochs_added == 1);
    CHECK(s.rounds[1].survivors == 3);
    CHECK(s.rounds[1].epochs_added == 2);
    CHECK(s.total_epochs == 11);
    CHECK(s.horizon == 4);
  }

  SUBCASE("powers of the rate cost exactly K * U * log rounds") {
    for (int k : {2, 4, 8, 16, 32}) {
      HalvingSchedule s = HalvingSchedule::make(k, 2, 2);
      int rounds = static_cast<int>(std::lround(std::log2(k)));
      CHECK(s.total_epochs == static_cast<long>(k) * 2 * rounds);
      CHECK(static_cast<int>(s.rounds.size()) == rounds);
    }
  }

  SUBCASE("every schedule shrinks survivors and grows epochs") {
    for (int k = 2; k <= 40; ++k) {
      HalvingSchedule s = HalvingSchedule::make(k, 2, 2);
      CHECK(s.rounds.front().survivors == k);
      for (std::size_t r = 1; r < s.rounds.size(); ++r) {
        CHECK(s.rounds[r].survivors < s.rounds[r - 1].survivors);
        CHECK(s.rounds[r].epochs_added == 2 * s.rounds[r - 1].epochs_added);
      }
      CHECK(s.rounds.back().survivors >= 2);
    }
  }

  SUBCASE("bad arguments are rejected") {
    CHECK_THROWS_AS(HalvingSchedule::make(0, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(HalvingSchedule::make(4, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(HalvingSchedule::make(4, 2, 1), std::invalid_argument);
  }
}

TEST_CASE("simulated halving replays recorded curves") {
  BenchFile bench = curve_bench();
  SimClock clock;
  SimTrainBackend backend(bench, 0.5, &clock);

  RefineOptions opts;
  opts.base_epochs = 2;

  RefineResult res = run_refinement(
      encs({"4-4", "4-8", "8-4", "8-8"}), backend, opts, &clock);

  // Two rounds: 4x2 epochs, then 2x4 epochs on the survivors.
  REQUIRE(res.rounds.size() == 2);
  CHECK(res.rounds[0].epochs_added == 2);
  CHECK(res.rounds[1].epochs_added == 4);
  CHECK(res.total_epochs == 16);
  CHECK(clock.now() == doctest::Approx(8.0));  // 16 epochs at 0.5 s

  // Round 0 ranks by the recorded AUC after two epochs.
  const auto& first = res.rounds[0].leaderboard;
  REQUIRE(first.size() == 4);
  CHECK(first[0].enc.to_string() == "4-8");
  CHECK(first[1].enc.to_string() == "8-4");
  CHECK(first[2].enc.to_string() == "4-4");
  CHECK(first[3].enc.to_string() == "8-8");
  CHECK(first[0].val_auc == 0.70);
  CHECK(first[0].cumulative_epochs == 2);

  // The late bloomer wins after the full six epochs.
  const auto& final_board = res.rounds[1].leaderboard;
  REQUIRE(final_board.size() == 2);
  CHECK(res.winner.to_string() == "8-4");
  CHECK(res.winner_val_auc == 0.90);
  CHECK(final_board[0].cumulative_epochs == 6);
  CHECK(res.warnings.empty());
}

TEST_CASE("ranking ties fall back to loss drop and then the encoding") {
  BenchFile b;
  b.header.num_layers = 2;
  b.header.width_choices = {4, 8};
  b.header.dataset_sha256 = "00";
  b.header.epochs = 2;
  b.header.batch_size = 32;
  b.header.lr = 1e-3;
  b.header.seed = 7;
  b.header.created = "t";

  auto rec = [](std::string arch, std::vector<double> val,
                std::vector<double> loss) {
    BenchRecord r;
    r.arch = std::move(arch);
    r.params = 10;
    r.val_auc = std::move(val);
    r.train_loss = std::move(loss);
    r.train_auc = {0.5, 0.6};
    r.val_loss = {1.0, 0.9};
    r.epoch_time_s = {0.1, 0.1};
    r.seed = 1;
    return r;
  };

  RefineOptions opts;
  opts.base_epochs = 2;

  SUBCASE("equal AUC, the larger training-loss drop wins") {
    // Lexicographic order alone would favor 4-4; the drop overrides it.
    b.records.push_back(rec("4-4", {0.60, 0.70}, {1.0, 0.9}));   // drop 0.1
    b.records.push_back(rec("8-8", {0.65, 0.70}, {1.0, 0.75}));  // drop 0.25
    b.rebuild_index();
    SimTrainBackend backend(b, 0.0, nullptr);
    RefineResult res = run_refinement(encs({"4-4", "8-8"}), backend, opts, nullptr);
    CHECK(res.winner.to_string() == "8-8");
  }

  SUBCASE("equal AUC and drop, the smaller encoding wins") {
    b.records.push_back(rec("8-8", {0.60, 0.70}, {1.0, 0.9}));
    b.records.push_back(rec("4-4", {0.65, 0.70}, {1.0, 0.9}));
    b.rebuild_index();
    SimTrainBackend backend(b, 0.0, nullptr);
    RefineResult res = run_refinement(encs({"8-8", "4-4"}), backend, opts, nullptr);
    CHECK(res.winner.to_string() == "4-4");
  }
}

TEST_CASE("recorded divergence pushes a candidate to the bottom") {
  BenchFile bench = curve_bench();
  // Mark the would-be winner as diverged.
  for (auto& r : bench.records)
    if (r.arch == "8-4") r.diverged = true;
  bench.rebuild_index();

  SimTrainBackend backend(bench, 0.0, nullptr);
  RefineOptions opts;
  opts.base_epochs = 2;
  RefineResult res = run_refinement(
      encs({"4-4", "4-8", "8-4", "8-8"}), backend, opts, nullptr);

  const auto& first = res.rounds[0].leaderboard;
  CHECK(first.back().enc.to_string() == "8-4");
  CHECK(first.back().diverged);
  CHECK(res.winner.to_string() == "4-8");
  REQUIRE(!res.warnings.empty());
  CHECK(res.warnings.front().find("8-4") != std::string::npos);
}

TEST_CASE("a deadline skips rounds that cannot fit") {
  BenchFile bench = curve_bench();

  SUBCASE("later round skipped, earlier leader returned") {
    SimClock clock;
    SimTrainBackend backend(bench, 1.0, &clock);
    RefineOptions opts;
    opts.base_epochs = 2;
    opts.deadline = 9.0;           // round 0 costs 8, round 1 another 8
    opts.epoch_seconds_hint = 1.0;
    RefineResult res = run_refinement(
        encs({"4-4", "4-8", "8-4", "8-8"}), backend, opts, &clock);
    REQUIRE(res.rounds.size() == 1);
    CHECK(res.winner.to_string() == "4-8");  // round-0 leader
    CHECK(res.total_epochs == 8);
    REQUIRE(!res.warnings.empty());
    CHECK(res.warnings.front().find("skipping round 1") != std::string::npos);
  }

  SUBCASE("no budget at all returns the incoming leader") {
    SimClock clock;
    SimTrainBackend backend(bench, 1.0, &clock);
    RefineOptions opts;
    opts.base_epochs = 2;
    opts.deadline = 0.5;
    opts.epoch_seconds_hint = 1.0;
    RefineResult res = run_refinement(
        encs({"8-8", "4-4"}), backend, opts, &clock);
    CHECK(res.rounds.empty());
    CHECK(res.winner.to_string() == "8-8");
    CHECK(res.total_epochs == 0);
  }
}

TEST_CASE("real refinement matches a hand-run halving tournament") {
  Dataset ds = make_synthetic(300, 6, 0.1, 9);
  auto [train, val] = split(ds, {0.8, 9});
  const std::uint64_t seed = 4;
  const int B = 32;
  const double lr = 1e-3;

  std::vector<ArchEncoding> cands = encs({"4-4", "4-8", "8-4", "8-8"});

  RealTrainBackend backend(train, val, B, lr, InitMode::He, seed);
  RefineOptions opts;
  opts.base_epochs = 2;
  RefineResult res = run_refinement(cands, backend, opts, nullptr);

  // Oracle: replay the tournament by hand with fresh models. Round 0
  // trains everyone 2 epochs on the shared 8-epoch cosine horizon.
  struct Entry {
    ArchEncoding enc;
    MlpModel model;
    std::vector<EpochStats> hist;
  };
  std::vector<Entry> entries;
  for (const auto& enc : cands) {
    MlpModel m(enc.sizes, 6, InitMode::He, arch_seed(seed, enc));
    entries.push_back({enc, std::move(m), {}});
  }
  auto train_for = [&](Entry& e, int epochs, int start) {
    TrainOptions topts;
    topts.epochs = epochs;
    topts.batch_size = B;
    topts.lr = lr;
    topts.seed = arch_seed(seed, e.enc);
    topts.horizon = 8;
    topts.start_epoch = start;
    auto stats = train_epochs(e.model, train, val, topts);
    e.hist.insert(e.hist.end(), stats.begin(), stats.end());
  };
  for (auto& e : entries) train_for(e, 2, 0);
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    double av = a.hist.back().val_auc, bv = b.hist.back().val_auc;
    if (av != bv) return av > bv;
    return a.enc < b.enc;
  });

  REQUIRE(res.rounds.size() == 2);
  const auto& round0 = res.rounds[0].leaderboard;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(round0[i].enc == entries[i].enc);
    CHECK(round0[i].val_auc == entries[i].hist.back().val_auc);
  }

  // Round 1: survivors continue from their warm state for 4 more epochs.
  entries.erase(entries.begin() + 2, entries.end());
  for (auto& e : entries) train_for(e, 4, 2);
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    double av = a.hist.back().val_auc, bv = b.hist.back().val_auc;
    if (av != bv) return av > bv;
    return a.enc < b.enc;
  });

  CHECK(res.winner == entries[0].enc);
  CHECK(res.winner_val_auc == entries[0].hist.back().val_auc);
  CHECK(res.rounds[1].leaderboard[0].cumulative_epochs == 6);
  CHECK(res.total_epochs == 16);

  // Warm starting must equal one uninterrupted run: train the winner's
  // architecture 6 straight epochs on the same horizon and compare.
  {
    MlpModel m(res.winner.sizes, 6, InitMode::He, arch_seed(seed, res.winner));
    TrainOptions topts;
    topts.epochs = 6;
    topts.batch_size = B;
    topts.lr = lr;
    topts.seed = arch_seed(seed, res.winner);
    topts.horizon = 8;
    auto stats = train_epochs(m, train, val, topts);
    CHECK(res.winner_val_auc == stats.back().val_auc);
    const MlpModel& refined = backend.model(res.winner);
    CHECK((refined.flatten_parameters() - m.flatten_parameters()).norm() == 0.0);
  }
}

TEST_CASE("worker count never changes refinement results") {
  Dataset ds = make_synthetic(240, 6, 0.1, 13);
  auto [train, val] = split(ds, {0.8, 13});
  std::vector<ArchEncoding> cands = encs({"4-4", "4-8", "8-4", "8-8"});

  RefineOptions opts;
  opts.base_epochs = 1;

  RealTrainBackend solo(train, val, 32, 1e-3, InitMode::He, 5);
  RefineResult a = run_refinement(cands, solo, opts, nullptr);

  opts.workers = 4;
  RealTrainBackend pooled(train, val, 32, 1e-3, InitMode::He, 5);
  RefineResult b = run_refinement(cands, pooled, opts, nullptr);

  CHECK(a.winner == b.winner);
  CHECK(a.winner_val_auc == b.winner_val_auc);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    const auto& la = a.rounds[r].leaderboard;
    const auto& lb = b.rounds[r].leaderboard;
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
      CHECK(la[i].enc == lb[i].enc);
      CHECK(la[i].val_auc == lb[i].val_auc);
      CHECK(la[i].train_loss_drop == lb[i].train_loss_drop);
    }
  }
}

TEST_CASE("refinement rejects unusable input") {
  BenchFile bench = curve_bench();
  SimTrainBackend backend(bench, 0.0, nullptr);
  RefineOptions opts;

  CHECK_THROWS_AS(run_refinement({}, backend, opts, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_refinement(encs({"4-4", "4-4"}), backend, opts, nullptr),
                  std::invalid_argument);
  {
    RefineOptions bad = opts;
    bad.workers = 0;
    CHECK_THROWS_AS(run_refinement(encs({"4-4"}), backend, bad, nullptr),
                    std::invalid_argument);
  }

  // Architectures missing from the benchmark are rejected up front.
  CHECK_THROWS_WITH_AS(
      run_refinement(encs({"4-4", "16-16"}), backend, opts, nullptr),
      doctest::Contains("not in the benchmark"), std::invalid_argument);

  CHECK_THROWS_AS(SimTrainBackend(bench, -1.0, nullptr), std::invalid_argument);

  // Training through a backend that was never prepared is a logic error.
  Dataset ds = make_synthetic(150, 6, 0.1, 2);
  auto [train, val] = split(ds, {0.8, 2});
  RealTrainBackend rb(train, val, 32, 1e-3, InitMode::He, 0);
  CHECK_THROWS_AS(rb.train(ArchEncoding{{4, 4}}, 1, 0, 2), std::logic_error);
  CHECK_THROWS_AS(rb.model(ArchEncoding{{4, 4}}), std::invalid_argument);
}
