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

#ifndef ATLAS_FILTERING_HPP_
#define ATLAS_FILTERING_HPP_

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "atlas/clock.hpp"
#include "atlas/dataset.hpp"
#include "atlas/proxies.hpp"
#include "atlas/search_space.hpp"

namespace atlas {

struct ScoredArch {
  ArchEncoding enc;
  double score = 0.0;
  bool degenerate = false;
};

/// Higher score wins; degenerate scores rank below every finite score;
/// exact ties go to the lexicographically smaller encoding.
bool ranks_higher(const ScoredArch& a, const ScoredArch& b);

/// Aging pool used by regularized evolution: bounded FIFO of the most
/// recently scored members; the oldest is evicted once capacity is
/// reached. Single-owner, not thread-safe.
class Population {
 public:
  explicit Population(std::size_t capacity);

  void insert(ScoredArch member);
  std::size_t size() const { return members_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<ScoredArch>& members() const { return members_; }

 private:
  std::size_t capacity_;
  std::deque<ScoredArch> members_;
};

struct FilterOptions {
  int evaluations = 100;     // M
  int keep = 10;             // K, size of the returned leaderboard
  int pool = 10;             // N
  int sample_size = 3;       // tournament draws per parent
  int workers = 1;
  std::uint64_t seed = 0;
  bool adjacent_mutation = false;
  /// Simulated seconds added to the clock per completed evaluation.
  double charge_per_eval = 0.0;
  /// Clock-time cutoff: once reached, no further work is issued and the
  /// run returns what it has (with a warning).
  std::optional<double> deadline;
};

struct FilterResult {
  std::vector<ScoredArch> top_k;        // descending
  int explored = 0;
  double wall_time_s = 0.0;
  std::vector<double> score_history;    // best-so-far per evaluation
  std::vector<std::string> warnings;
};

/// Regularized evolution over `space` driven by proxy `kind`: seed the
/// pool with random architectures, then repeatedly score the mutation of
/// a tournament winner, inserting results and evicting the oldest. Every
/// evaluated encoding is unique; each model is initialized from a seed
/// derived from (cfg.seed, encoding) so a score does not depend on
/// discovery order or worker count. Single-worker runs are
/// bit-reproducible for a fixed (opts.seed, cfg).
///
/// `batch` feeds data-dependent proxies and may be null for data-free
/// configurations. `clock` defaults to wall time; a simulated clock plus
/// charge_per_eval makes budget cutoffs deterministic.
FilterResult run_filtering(const SearchSpaceSpec& space, ProxyKind kind,
                           const ScoreConfig& cfg, const DataBatch* batch,
                           const FilterOptions& opts, Clock* clock = nullptr);

}  // namespace atlas

#endif  // ATLAS_FILTERING_HPP_
