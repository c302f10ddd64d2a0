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

#ifndef ATLAS_COORDINATOR_HPP_
#define ATLAS_COORDINATOR_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atlas/bench.hpp"
#include "atlas/clock.hpp"
#include "atlas/dataset.hpp"
#include "atlas/filtering.hpp"
#include "atlas/proxies.hpp"
#include "atlas/refinement.hpp"
#include "atlas/search_space.hpp"

namespace atlas {

struct ProfileEstimate {
  double t1 = 0.0;  // seconds per proxy score
  double t2 = 0.0;  // seconds per training epoch
  int probe_count = 0;
  std::vector<std::string> warnings;
};

/// Times proxy scoring and single-epoch training on `probe_count`
/// seed-chosen architectures. Architecture choice is deterministic per
/// seed; the measured times are environmental.
ProfileEstimate profile(const SearchSpaceSpec& space, const Dataset& dataset,
                        ProxyKind kind, const ScoreConfig& cfg, int probe_count,
                        std::uint64_t seed);

enum class PlanBranch { Standard, SingleCandidate, FilterOnly };

std::string to_string(PlanBranch branch);

/// Budget split between the scoring phase (T1 = t1*M) and the training
/// phase (T2 = K*U*t2*floor(log_eta K)), chosen so T1 + T2 <= T_max.
struct CoordinatorPlan {
  double t_max_s = 0.0;
  long evaluations = 0;  // M
  int keep = 0;          // K
  int base_epochs = 2;   // U
  int eta = 2;
  int ratio = 30;
  double t1_s = 0.0;     // planned scoring time
  double t2_s = 0.0;     // planned training time
  PlanBranch branch = PlanBranch::Standard;
};

/// Picks the largest K >= 1 whose filtering-plus-refinement cost fits
/// T_max and sets M = ratio*K. When even K = 1 with a full ratio of
/// evaluations does not fit, the plan degrades: first to a single
/// refined candidate with however many evaluations the remaining budget
/// buys, then to filtering only. Throws when T_max cannot cover one
/// proxy evaluation.
CoordinatorPlan make_plan(double t1, double t2, double t_max_s, int ratio = 30,
                          int base_epochs = 2, int eta = 2);

struct AtlasOptions {
  double t_max_s = 60.0;
  ProxyKind kind = ProxyKind::ExpressFlow;
  ScoreConfig score;  // its seed is overwritten with `seed`
  int ratio = 30;
  int base_epochs = 2;  // U
  int eta = 2;
  int probe_count = 5;
  int workers = 1;
  std::uint64_t seed = 0;
  int train_batch_size = 64;
  double lr = 1e-3;
  double train_fraction = 0.8;
  int pool = 10;
  int sample_size = 3;

  /// Simulation: replay training curves from this benchmark instead of
  /// real training, with fixed per-evaluation / per-epoch costs charged
  /// to a simulated clock. Profiling is skipped; sim_t1/sim_t2 stand in
  /// for the measured times.
  const BenchFile* bench = nullptr;
  double sim_t1 = 0.0;
  double sim_t2 = 0.0;
};

struct AtlasReport {
  ProfileEstimate profile;
  CoordinatorPlan plan;
  ArchEncoding winner;
  double winner_val_auc = 0.0;  // measured by refinement; 0 when unrefined
  std::optional<double> winner_bench_auc;  // true best val AUC, bench runs only
  double profile_wall_s = 0.0;
  double filter_wall_s = 0.0;
  double refine_wall_s = 0.0;
  double total_wall_s = 0.0;
  bool within_budget = false;
  long explored = 0;
  std::vector<ScoredArch> shortlist;
  std::optional<RefineResult> refinement;
  std::vector<std::string> degradations;
};

/// End-to-end anytime search: profile, plan, filter, refine, all against
/// one clock with a hard deadline at T_max. Rounds that would cross the
/// deadline are skipped and the best architecture seen so far is
/// returned, so some valid winner comes back for any T_max >= t1.
AtlasReport run_atlas(const SearchSpaceSpec& space, const Dataset& dataset,
                      const AtlasOptions& opts, Clock* clock = nullptr);

}  // namespace atlas

#endif  // ATLAS_COORDINATOR_HPP_
