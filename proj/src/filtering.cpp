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

#include "atlas/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

#include "atlas/bounded_queue.hpp"
#include "atlas/mlp.hpp"
#include "atlas/rng.hpp"

namespace atlas {

bool ranks_higher(const ScoredArch& a, const ScoredArch& b) {
  if (a.degenerate != b.degenerate) return !a.degenerate;
  if (a.score != b.score && !a.degenerate) return a.score > b.score;
  return a.enc < b.enc;
}

Population::Population(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("Population: zero capacity");
}

void Population::insert(ScoredArch member) {
  members_.push_back(std::move(member));
  if (members_.size() > capacity_) members_.pop_front();
}

namespace {

constexpr int kDuplicateRedraws = 16;

ScoredArch evaluate(const ArchEncoding& enc, const SearchSpaceSpec& space,
                    ProxyKind kind, const ScoreConfig& cfg, const DataBatch* batch) {
  const MlpModel model(enc.sizes, space.input_dim, cfg.init,
                       arch_seed(cfg.seed, enc));
  static const DataBatch empty;
  try {
    const ProxyScore score = score_proxy(kind, model, batch ? *batch : empty, cfg);
    if (!std::isfinite(score.value) && !score.degenerate)
      return {enc, -std::numeric_limits<double>::infinity(), true};
    return {enc, score.value, score.degenerate};
  } catch (const std::exception&) {
    // One blown-up architecture must not abort a long search; it simply
    // ranks below everything that scored.
    return {enc, -std::numeric_limits<double>::infinity(), true};
  }
}

}  // namespace

FilterResult run_filtering(const SearchSpaceSpec& space, ProxyKind kind,
                           const ScoreConfig& cfg, const DataBatch* batch,
                           const FilterOptions& opts, Clock* clock) {
  space.validate();
  cfg.validate();
  if (opts.evaluations < 1)
    throw std::invalid_argument("run_filtering: evaluations must be >= 1");
  if (opts.keep < 1) throw std::invalid_argument("run_filtering: keep must be >= 1");
  if (opts.sample_size < 2)
    throw std::invalid_argument("run_filtering: sample_size must be >= 2");
  if (opts.pool < opts.sample_size)
    throw std::invalid_argument("run_filtering: pool must be >= sample_size");
  if (opts.workers < 1)
    throw std::invalid_argument("run_filtering: workers must be >= 1");
  if (proxy_needs_data(kind, cfg) && (batch == nullptr || batch->size() < 1))
    throw std::invalid_argument("run_filtering: proxy '" + to_string(kind) +
                                "' needs a data batch");

  RealClock fallback_clock;
  Clock& clk = clock != nullptr ? *clock : fallback_clock;
  const double start = clk.now();

  FilterResult result;
  int budget = opts.evaluations;
  const double space_size = space.arch_count();
  if (static_cast<double>(budget) > space_size) {
    budget = static_cast<int>(space_size);
    result.warnings.push_back("evaluation budget capped at the space size (" +
                              std::to_string(budget) + ")");
  }

  Rng rng(derive_seed(opts.seed, 0x66696C74ULL));
  std::set<ArchEncoding> issued;

  auto fresh_random = [&]() -> ArchEncoding {
    for (int t = 0; t < 64; ++t) {
      ArchEncoding enc = sample_arch(space, rng);
      if (!issued.contains(enc)) return enc;
    }
    // Rejection keeps missing: walk the (small) space deterministically.
    if (space_size <= 1e5) {
      for (const ArchEncoding& enc : enumerate_space(space))
        if (!issued.contains(enc)) return enc;
    }
    throw std::runtime_error("run_filtering: could not draw a fresh architecture");
  };

  Population population(static_cast<std::size_t>(opts.pool));
  const int warmup = std::min(opts.pool, budget);

  auto next_candidate = [&]() -> ArchEncoding {
    const int already = static_cast<int>(issued.size());
    if (already < warmup || population.size() == 0) return fresh_random();

    // Tournament: best of sample_size uniform draws (with replacement).
    const auto& members = population.members();
    const ScoredArch* parent = nullptr;
    for (int s = 0; s < opts.sample_size; ++s) {
      const auto& pick = members[static_cast<std::size_t>(rng.below(members.size()))];
      if (parent == nullptr || ranks_higher(pick, *parent)) parent = &pick;
    }
    for (int t = 0; t < kDuplicateRedraws; ++t) {
      ArchEncoding child = mutate_arch(parent->enc, space, rng, opts.adjacent_mutation);
      if (!issued.contains(child)) return child;
    }
    return fresh_random();
  };

  std::vector<ScoredArch> evaluated;
  evaluated.reserve(static_cast<std::size_t>(budget));
  double best = -std::numeric_limits<double>::infinity();
  bool best_valid = false;

  auto merge = [&](ScoredArch scored) {
    clk.charge(opts.charge_per_eval);
    if (!scored.degenerate && (!best_valid || scored.score > best)) {
      best = scored.score;
      best_valid = true;
    }
    result.score_history.push_back(best);
    population.insert(scored);
    evaluated.push_back(std::move(scored));
  };

  auto deadline_hit = [&] {
    return opts.deadline.has_value() && clk.now() >= *opts.deadline;
  };

  // The anytime contract: at least one architecture is scored even when
  // the deadline has already passed, so a caller always gets a winner.
  if (opts.workers == 1) {
    for (int i = 0; i < budget; ++i) {
      if (i > 0 && deadline_hit()) {
        result.warnings.push_back("deadline reached after " +
                                  std::to_string(i) + " evaluations");
        break;
      }
      const ArchEncoding enc = next_candidate();
      issued.insert(enc);
      merge(evaluate(enc, space, kind, cfg, batch));
    }
  } else {
    const auto capacity = static_cast<std::size_t>(2 * opts.workers);
    BoundedQueue<ArchEncoding> work(capacity);
    BoundedQueue<ScoredArch> results(capacity);

    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(opts.workers));
    for (int w = 0; w < opts.workers; ++w)
      workers.emplace_back([&] {
        while (auto enc = work.pop())
          results.push(evaluate(*enc, space, kind, cfg, batch));
      });

    int issued_count = 0, completed = 0, in_flight = 0;
    bool cut = false;
    {
      const ArchEncoding enc = next_candidate();
      issued.insert(enc);
      work.push(enc);
      ++issued_count;
      ++in_flight;
    }
    while (completed < budget && !(cut && in_flight == 0)) {
      if (!cut && deadline_hit()) {
        cut = true;
        result.warnings.push_back("deadline reached after " +
                                  std::to_string(completed) + " evaluations");
      }
      while (!cut && issued_count < budget &&
             in_flight < static_cast<int>(capacity)) {
        const ArchEncoding enc = next_candidate();
        issued.insert(enc);
        work.push(enc);
        ++issued_count;
        ++in_flight;
      }
      if (in_flight == 0) break;
      auto scored = results.pop();
      if (!scored.has_value()) break;
      merge(std::move(*scored));
      ++completed;
      --in_flight;
    }
    work.close();
    for (auto& t : workers) t.join();
  }

  result.explored = static_cast<int>(evaluated.size());
  std::sort(evaluated.begin(), evaluated.end(), ranks_higher);
  const auto take =
      std::min<std::size_t>(static_cast<std::size_t>(opts.keep), evaluated.size());
  result.top_k.assign(evaluated.begin(),
                      evaluated.begin() + static_cast<std::ptrdiff_t>(take));
  result.wall_time_s = std::max(clk.now() - start, 1e-9);
  return result;
}

}  // namespace atlas
