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

#ifndef ATLAS_REFINEMENT_HPP_
#define ATLAS_REFINEMENT_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atlas/bench.hpp"
#include "atlas/clock.hpp"
#include "atlas/dataset.hpp"
#include "atlas/mlp.hpp"
#include "atlas/search_space.hpp"

namespace atlas {

struct HalvingRound {
  int survivors = 0;      // candidates trained in this round
  int epochs_added = 0;   // additional epochs each one receives
};

/// Successive-halving plan for K candidates with elimination rate eta:
/// round r trains the surviving ceil(K / eta^r) candidates for
/// U * eta^r more epochs, r = 0 .. floor(log_eta K) - 1. A single
/// candidate gets one round of U epochs. `horizon` is the cosine-decay
/// span a finalist would cover, shared by every candidate so that
/// partially trained ones sit on the same schedule.
struct HalvingSchedule {
  int num_candidates = 0;
  int base_epochs = 0;
  int eta = 2;
  std::vector<HalvingRound> rounds;
  long total_epochs = 0;  // sum over rounds of survivors * epochs_added
  int horizon = 0;

  static HalvingSchedule make(int num_candidates, int base_epochs, int eta);
};

/// Trains architectures incrementally on demand. Implementations keep
/// per-architecture state between calls so training resumes rather than
/// restarts; `prepare` is called once, single-threaded, before any train
/// call, and `train` is only invoked concurrently for distinct
/// architectures.
class TrainBackend {
 public:
  virtual ~TrainBackend() = default;
  virtual void prepare(const std::vector<ArchEncoding>& candidates) = 0;
  virtual std::vector<EpochStats> train(const ArchEncoding& enc, int epochs,
                                        int start_epoch, int horizon) = 0;
};

/// Real SGD training. Each architecture owns a persistent model whose
/// optimizer state carries across rounds; the cosine schedule and batch
/// shuffling chain through (start_epoch, horizon), so training in
/// installments matches one uninterrupted run bitwise.
class RealTrainBackend : public TrainBackend {
 public:
  RealTrainBackend(const Dataset& train, const Dataset& val, int batch_size,
                   double lr, InitMode init, std::uint64_t seed);

  void prepare(const std::vector<ArchEncoding>& candidates) override;
  std::vector<EpochStats> train(const ArchEncoding& enc, int epochs,
                                int start_epoch, int horizon) override;

  /// The trained model for an architecture; throws if never prepared.
  const MlpModel& model(const ArchEncoding& enc) const;

 private:
  const Dataset& train_;
  const Dataset& val_;
  int batch_size_;
  double lr_;
  InitMode init_;
  std::uint64_t seed_;
  std::map<std::string, std::unique_ptr<MlpModel>> models_;
};

/// Replays recorded training curves instead of computing them, charging
/// a fixed per-epoch cost to the clock's simulated time. Requests past
/// the recorded horizon repeat the final epoch (the run has converged).
class SimTrainBackend : public TrainBackend {
 public:
  SimTrainBackend(const BenchFile& bench, double seconds_per_epoch,
                  Clock* clock);

  void prepare(const std::vector<ArchEncoding>& candidates) override;
  std::vector<EpochStats> train(const ArchEncoding& enc, int epochs,
                                int start_epoch, int horizon) override;

 private:
  const BenchFile& bench_;
  double seconds_per_epoch_;
  Clock* clock_;
};

struct RoundEntry {
  ArchEncoding enc;
  double val_auc = 0.0;
  double train_loss_drop = 0.0;  // first recorded train loss minus latest
  int cumulative_epochs = 0;
  bool diverged = false;
};

struct RefineRound {
  int index = 0;
  int epochs_added = 0;
  std::vector<RoundEntry> leaderboard;  // ranked best first
};

struct RefineResult {
  ArchEncoding winner;
  double winner_val_auc = 0.0;
  std::vector<RefineRound> rounds;
  long total_epochs = 0;
  double wall_time_s = 0.0;
  std::vector<std::string> warnings;
};

struct RefineOptions {
  int base_epochs = 2;  // U
  int eta = 2;
  int workers = 1;
  /// Clock deadline (same scale as clock->now()); a round whose
  /// projected cost would cross it is skipped along with everything
  /// after it, and the current leader is returned.
  std::optional<double> deadline;
  /// Prior estimate of seconds per epoch, used for the deadline check
  /// before any epochs have been measured.
  double epoch_seconds_hint = 0.0;
};

/// Successive halving over `candidates`. Ranking within a round: higher
/// validation AUC, then larger cumulative training-loss decrease, then
/// lexicographically smaller encoding; diverged candidates rank last.
RefineResult run_refinement(const std::vector<ArchEncoding>& candidates,
                            TrainBackend& backend, const RefineOptions& opts,
                            Clock* clock = nullptr);

}  // namespace atlas

#endif  // ATLAS_REFINEMENT_HPP_
