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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <thread>

#include "atlas/rng.hpp"

namespace atlas {
namespace {

struct CandidateState {
  ArchEncoding enc;
  int cumulative_epochs = 0;
  double first_train_loss = 0.0;
  double last_train_loss = 0.0;
  double last_val_auc = 0.0;
  bool has_history = false;
  bool diverged = false;
  std::string failure;

  double loss_drop() const {
    return has_history ? first_train_loss - last_train_loss : 0.0;
  }
};

bool ranks_before(const CandidateState& a, const CandidateState& b) {
  if (a.diverged != b.diverged) return !a.diverged;
  if (!a.diverged) {
    if (a.last_val_auc != b.last_val_auc) return a.last_val_auc > b.last_val_auc;
    if (a.loss_drop() != b.loss_drop()) return a.loss_drop() > b.loss_drop();
  }
  return a.enc < b.enc;
}

RoundEntry to_entry(const CandidateState& c) {
  RoundEntry e;
  e.enc = c.enc;
  e.val_auc = c.last_val_auc;
  e.train_loss_drop = c.loss_drop();
  e.cumulative_epochs = c.cumulative_epochs;
  e.diverged = c.diverged;
  return e;
}

}  // namespace

HalvingSchedule HalvingSchedule::make(int num_candidates, int base_epochs,
                                      int eta) {
  if (num_candidates < 1)
    throw std::invalid_argument("halving schedule: need at least 1 candidate");
  if (base_epochs < 1)
    throw std::invalid_argument("halving schedule: base epochs must be >= 1");
  if (eta < 2) throw std::invalid_argument("halving schedule: eta must be >= 2");

  HalvingSchedule s;
  s.num_candidates = num_candidates;
  s.base_epochs = base_epochs;
  s.eta = eta;

  if (num_candidates == 1) {
    s.rounds.push_back({1, base_epochs});
    s.total_epochs = base_epochs;
    s.horizon = base_epochs;
    return s;
  }

  int num_rounds = 0;
  long power = 1;
  while (power * eta <= num_candidates) {
    power *= eta;
    ++num_rounds;
  }

  long per_round_power = 1;
  for (int r = 0; r < num_rounds; ++r) {
    int survivors = static_cast<int>(
        (num_candidates + per_round_power - 1) / per_round_power);
    int epochs = static_cast<int>(base_epochs * per_round_power);
    s.rounds.push_back({survivors, epochs});
    s.total_epochs += static_cast<long>(survivors) * epochs;
    per_round_power *= eta;
  }
  s.horizon = static_cast<int>(base_epochs * per_round_power);
  return s;
}

RealTrainBackend::RealTrainBackend(const Dataset& train, const Dataset& val,
                                   int batch_size, double lr, InitMode init,
                                   std::uint64_t seed)
    : train_(train), val_(val), batch_size_(batch_size), lr_(lr), init_(init),
      seed_(seed) {
  if (batch_size_ < 2)
    throw std::invalid_argument("refinement: batch size must be >= 2");
  if (!(lr_ > 0.0)) throw std::invalid_argument("refinement: lr must be positive");
  if (train_.dim() != val_.dim())
    throw std::invalid_argument("refinement: train/val dimension mismatch");
}

void RealTrainBackend::prepare(const std::vector<ArchEncoding>& candidates) {
  for (const auto& enc : candidates) {
    std::string key = enc.to_string();
    if (models_.count(key)) continue;
    models_.emplace(key, std::make_unique<MlpModel>(enc.sizes, train_.dim(),
                                                    init_, arch_seed(seed_, enc)));
  }
}

std::vector<EpochStats> RealTrainBackend::train(const ArchEncoding& enc,
                                                int epochs, int start_epoch,
                                                int horizon) {
  auto it = models_.find(enc.to_string());
  if (it == models_.end())
    throw std::logic_error("refinement backend: train before prepare for '" +
                           enc.to_string() + "'");
  TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch_size_;
  opts.lr = lr_;
  opts.seed = arch_seed(seed_, enc);
  opts.horizon = horizon;
  opts.start_epoch = start_epoch;
  return train_epochs(*it->second, train_, val_, opts);
}

const MlpModel& RealTrainBackend::model(const ArchEncoding& enc) const {
  auto it = models_.find(enc.to_string());
  if (it == models_.end())
    throw std::invalid_argument("refinement backend: no model for '" +
                                enc.to_string() + "'");
  return *it->second;
}

SimTrainBackend::SimTrainBackend(const BenchFile& bench, double seconds_per_epoch,
                                 Clock* clock)
    : bench_(bench), seconds_per_epoch_(seconds_per_epoch), clock_(clock) {
  if (!(seconds_per_epoch_ >= 0.0))
    throw std::invalid_argument("simulation: seconds per epoch must be >= 0");
}

void SimTrainBackend::prepare(const std::vector<ArchEncoding>& candidates) {
  for (const auto& enc : candidates)
    if (bench_.find(enc.to_string()) == nullptr)
      throw std::invalid_argument("simulation: architecture '" + enc.to_string() +
                                  "' is not in the benchmark");
}

std::vector<EpochStats> SimTrainBackend::train(const ArchEncoding& enc,
                                               int epochs, int start_epoch,
                                               int /*horizon*/) {
  const BenchRecord* r = bench_.find(enc.to_string());
  if (r == nullptr)
    throw std::logic_error("simulation: train before prepare for '" +
                           enc.to_string() + "'");
  if (r->diverged) throw TrainingDiverged("recorded run diverged: " + r->arch);

  std::vector<EpochStats> stats;
  stats.reserve(static_cast<std::size_t>(epochs));
  int recorded = static_cast<int>(r->val_auc.size());
  for (int e = start_epoch; e < start_epoch + epochs; ++e) {
    int idx = std::min(e, recorded - 1);
    EpochStats s;
    s.train_loss = r->train_loss[idx];
    s.val_loss = r->val_loss[idx];
    s.train_auc = r->train_auc[idx];
    s.val_auc = r->val_auc[idx];
    s.wall_time_s = seconds_per_epoch_;
    stats.push_back(s);
  }
  if (clock_ != nullptr)
    clock_->charge(seconds_per_epoch_ * static_cast<double>(epochs));
  return stats;
}

RefineResult run_refinement(const std::vector<ArchEncoding>& candidates,
                            TrainBackend& backend, const RefineOptions& opts,
                            Clock* clock) {
  if (candidates.empty())
    throw std::invalid_argument("run_refinement: no candidates");
  if (opts.workers < 1)
    throw std::invalid_argument("run_refinement: workers must be >= 1");
  {
    std::set<ArchEncoding> uniq(candidates.begin(), candidates.end());
    if (uniq.size() != candidates.size())
      throw std::invalid_argument("run_refinement: duplicate candidates");
  }

  RealClock fallback;
  Clock* clk = clock != nullptr ? clock : &fallback;
  double start_time = clk->now();

  HalvingSchedule schedule = HalvingSchedule::make(
      static_cast<int>(candidates.size()), opts.base_epochs, opts.eta);
  backend.prepare(candidates);

  std::vector<CandidateState> state(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) state[i].enc = candidates[i];

  std::vector<std::size_t> alive(candidates.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;

  RefineResult result;
  double measured_epoch_seconds = 0.0;
  long measured_epochs = 0;

  for (std::size_t r = 0; r < schedule.rounds.size(); ++r) {
    const HalvingRound& round = schedule.rounds[r];

    if (opts.deadline.has_value()) {
      double per_epoch = measured_epochs > 0
                             ? measured_epoch_seconds /
                                   static_cast<double>(measured_epochs)
                             : opts.epoch_seconds_hint;
      double projected = static_cast<double>(round.survivors) *
                         static_cast<double>(round.epochs_added) * per_epoch;
      if (clk->now() + projected > *opts.deadline) {
        result.warnings.push_back(
            "skipping round " + std::to_string(r) + " and later; projected cost " +
            std::to_string(projected) + "s exceeds remaining budget");
        break;
      }
    }

    // Train every live, non-diverged candidate for this round's quota.
    std::vector<std::size_t> to_train;
    for (std::size_t i : alive)
      if (!state[i].diverged) to_train.push_back(i);

    std::atomic<std::size_t> cursor{0};
    std::vector<double> round_wall(to_train.size(), 0.0);
    std::vector<long> round_epochs(to_train.size(), 0);
    auto work = [&] {
      for (;;) {
        std::size_t slot = cursor.fetch_add(1);
        if (slot >= to_train.size()) return;
        CandidateState& c = state[to_train[slot]];
        try {
          auto stats = backend.train(c.enc, round.epochs_added,
                                     c.cumulative_epochs, schedule.horizon);
          for (const auto& s : stats) round_wall[slot] += s.wall_time_s;
          round_epochs[slot] = static_cast<long>(stats.size());
          if (!stats.empty()) {
            if (!c.has_history) {
              c.first_train_loss = stats.front().train_loss;
              c.has_history = true;
            }
            c.last_train_loss = stats.back().train_loss;
            c.last_val_auc = stats.back().val_auc;
          }
          c.cumulative_epochs += round.epochs_added;
        } catch (const std::exception& e) {
          c.diverged = true;
          c.failure = e.what();
        }
      }
    };

    int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(opts.workers),
                              std::max<std::size_t>(to_train.size(), 1)));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (std::size_t slot = 0; slot < to_train.size(); ++slot) {
      measured_epoch_seconds += round_wall[slot];
      measured_epochs += round_epochs[slot];
      const CandidateState& c = state[to_train[slot]];
      result.total_epochs +=
          c.diverged ? round_epochs[slot] : round.epochs_added;
      if (c.diverged && !c.failure.empty())
        result.warnings.push_back("candidate " + c.enc.to_string() +
                                  " dropped in round " + std::to_string(r) +
                                  ": " + c.failure);
    }

    std::sort(alive.begin(), alive.end(), [&](std::size_t a, std::size_t b) {
      return ranks_before(state[a], state[b]);
    });

    RefineRound report;
    report.index = static_cast<int>(r);
    report.epochs_added = round.epochs_added;
    for (std::size_t i : alive) report.leaderboard.push_back(to_entry(state[i]));
    result.rounds.push_back(std::move(report));

    if (r + 1 < schedule.rounds.size()) {
      auto keep = static_cast<std::size_t>(schedule.rounds[r + 1].survivors);
      if (alive.size() > keep) alive.resize(keep);
    }
  }

  if (!result.rounds.empty()) {
    const RoundEntry& top = result.rounds.back().leaderboard.front();
    result.winner = top.enc;
    result.winner_val_auc = top.val_auc;
  } else {
    // Budget gone before any round: fall back to the incoming leader.
    result.winner = candidates.front();
    result.winner_val_auc = 0.0;
    result.warnings.push_back(
        "no rounds completed; returning the incoming leader");
  }

  result.wall_time_s = std::max(clk->now() - start_time, 1e-9);
  return result;
}

}  // namespace atlas
