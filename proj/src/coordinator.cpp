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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atlas/mlp.hpp"
#include "atlas/rng.hpp"

namespace atlas {
namespace {

int floor_log(int value, int base) {
  int r = 0;
  long power = base;
  while (power <= value) {
    power *= base;
    ++r;
  }
  return r;
}

double refine_cost(int keep, int base_epochs, int eta, double t2) {
  return static_cast<double>(keep) * base_epochs * t2 * floor_log(keep, eta);
}

DataBatch scoring_batch(const Dataset& dataset, int batch_size) {
  DataBatch full = full_batch(dataset);
  int take = std::min<int>(batch_size, full.size());
  DataBatch b;
  b.x = full.x.topRows(take);
  b.y.assign(full.y.begin(), full.y.begin() + take);
  return b;
}

}  // namespace

std::string to_string(PlanBranch branch) {
  switch (branch) {
    case PlanBranch::Standard: return "standard";
    case PlanBranch::SingleCandidate: return "single-candidate";
    case PlanBranch::FilterOnly: return "filtering-only";
  }
  throw std::invalid_argument("unknown plan branch");
}

ProfileEstimate profile(const SearchSpaceSpec& space, const Dataset& dataset,
                        ProxyKind kind, const ScoreConfig& cfg, int probe_count,
                        std::uint64_t seed) {
  space.validate();
  cfg.validate();
  if (probe_count < 1)
    throw std::invalid_argument("profile: probe count must be >= 1");

  Rng rng(derive_seed(seed, 0x70726F62ULL));
  std::vector<ArchEncoding> probes;
  probes.reserve(static_cast<std::size_t>(probe_count));
  for (int i = 0; i < probe_count; ++i) probes.push_back(sample_arch(space, rng));

  DataBatch batch = scoring_batch(dataset, cfg.batch_size);
  auto [train, val] = split(dataset, {0.8, seed});

  ProfileEstimate est;
  est.probe_count = probe_count;

  double score_total = 0.0;
  for (const auto& enc : probes) {
    MlpModel m(enc.sizes, space.input_dim, cfg.init, arch_seed(cfg.seed, enc));
    ProxyScore s = score_proxy(kind, m, batch, cfg);
    score_total += s.wall_time_s;
  }
  est.t1 = std::max(score_total / probe_count, 1e-9);

  double train_total = 0.0;
  int trained = 0;
  for (const auto& enc : probes) {
    try {
      MlpModel m(enc.sizes, space.input_dim, cfg.init, arch_seed(cfg.seed, enc));
      TrainOptions topts;
      topts.epochs = 1;
      topts.seed = arch_seed(cfg.seed, enc);
      auto stats = train_epochs(m, train, val, topts);
      train_total += stats.front().wall_time_s;
      ++trained;
    } catch (const TrainingDiverged&) {
      est.warnings.push_back("profile: probe " + enc.to_string() + " diverged");
    }
  }
  if (trained == 0)
    throw std::runtime_error("profile: training failed on every probe");
  est.t2 = std::max(train_total / trained, 1e-9);

  if (est.t1 >= est.t2)
    est.warnings.push_back(
        "profile: proxy scoring is not faster than a training epoch");
  return est;
}

CoordinatorPlan make_plan(double t1, double t2, double t_max_s, int ratio,
                          int base_epochs, int eta) {
  if (!(t1 > 0.0) || !(t2 > 0.0))
    throw std::invalid_argument("plan: t1 and t2 must be positive");
  if (!(t_max_s > 0.0)) throw std::invalid_argument("plan: budget must be positive");
  if (ratio < 1 || base_epochs < 1 || eta < 2)
    throw std::invalid_argument("plan: bad ratio/base epochs/eta");
  if (t_max_s < t1)
    throw std::invalid_argument("plan: budget below one proxy evaluation");

  CoordinatorPlan plan;
  plan.t_max_s = t_max_s;
  plan.base_epochs = base_epochs;
  plan.eta = eta;
  plan.ratio = ratio;

  // Both cost terms grow with K, so the feasibility predicate is
  // monotone and a linear scan with early exit finds the largest K.
  int best_k = 0;
  for (int k = 1;; ++k) {
    double cost = t1 * ratio * static_cast<double>(k) +
                  refine_cost(k, base_epochs, eta, t2);
    if (cost > t_max_s) break;
    best_k = k;
    if (static_cast<double>(k) > t_max_s / (t1 * ratio) + 1.0) break;
  }

  if (best_k >= 1) {
    plan.keep = best_k;
    plan.evaluations = static_cast<long>(ratio) * best_k;
    plan.t1_s = t1 * static_cast<double>(plan.evaluations);
    plan.t2_s = refine_cost(best_k, base_epochs, eta, t2);
    plan.branch = PlanBranch::Standard;
    return plan;
  }

  double train_one = static_cast<double>(base_epochs) * t2;
  if (t_max_s >= train_one + t1) {
    plan.keep = 1;
    plan.evaluations =
        std::max<long>(1, static_cast<long>(std::floor((t_max_s - train_one) / t1)));
    plan.t1_s = t1 * static_cast<double>(plan.evaluations);
    plan.t2_s = train_one;
    plan.branch = PlanBranch::SingleCandidate;
    return plan;
  }

  plan.keep = 0;
  plan.evaluations = static_cast<long>(std::floor(t_max_s / t1));
  plan.t1_s = t1 * static_cast<double>(plan.evaluations);
  plan.t2_s = 0.0;
  plan.branch = PlanBranch::FilterOnly;
  return plan;
}

AtlasReport run_atlas(const SearchSpaceSpec& space, const Dataset& dataset,
                      const AtlasOptions& opts, Clock* clock) {
  space.validate();
  if (!(opts.t_max_s > 0.0))
    throw std::invalid_argument("run_atlas: budget must be positive");
  if (opts.workers < 1)
    throw std::invalid_argument("run_atlas: workers must be >= 1");
  bool simulated = opts.bench != nullptr;
  if (simulated && (!(opts.sim_t1 > 0.0) || !(opts.sim_t2 > 0.0)))
    throw std::invalid_argument("run_atlas: simulation needs sim_t1/sim_t2 > 0");

  RealClock fallback;
  Clock* clk = clock != nullptr ? clock : &fallback;
  double start = clk->now();
  double deadline = start + opts.t_max_s;

  ScoreConfig cfg = opts.score;
  cfg.seed = opts.seed;
  cfg.validate();

  AtlasReport report;

  double profile_start = clk->now();
  if (simulated) {
    report.profile.t1 = opts.sim_t1;
    report.profile.t2 = opts.sim_t2;
    report.profile.probe_count = 0;
  } else {
    report.profile = profile(space, dataset, opts.kind, cfg, opts.probe_count,
                             opts.seed);
    for (const auto& w : report.profile.warnings) report.degradations.push_back(w);
  }
  report.profile_wall_s = clk->now() - profile_start;

  double remaining = deadline - clk->now();
  if (remaining < report.profile.t1) {
    // Profiling ate the budget. Fall through with the minimum feasible
    // plan; filtering still scores one architecture, so a winner exists.
    report.degradations.push_back(
        "profiling consumed the budget; continuing with one evaluation");
    remaining = report.profile.t1;
  }
  report.plan = make_plan(report.profile.t1, report.profile.t2, remaining,
                          opts.ratio, opts.base_epochs, opts.eta);
  if (report.plan.branch != PlanBranch::Standard)
    report.degradations.push_back("plan degraded to " +
                                  to_string(report.plan.branch));

  DataBatch batch = scoring_batch(dataset, cfg.batch_size);

  FilterOptions fopts;
  fopts.evaluations = static_cast<int>(std::min<long>(
      report.plan.evaluations, std::numeric_limits<int>::max()));
  fopts.keep = std::max(report.plan.keep, 1);
  fopts.pool = opts.pool;
  fopts.sample_size = opts.sample_size;
  fopts.workers = opts.workers;
  fopts.seed = opts.seed;
  fopts.charge_per_eval = simulated ? opts.sim_t1 : 0.0;
  fopts.deadline = deadline;

  FilterResult filtered =
      run_filtering(space, opts.kind, cfg, &batch, fopts, clk);
  report.filter_wall_s = filtered.wall_time_s;
  report.explored = filtered.explored;
  report.shortlist = filtered.top_k;
  for (const auto& w : filtered.warnings)
    report.degradations.push_back("filtering: " + w);
  if (filtered.top_k.empty())
    throw std::runtime_error("run_atlas: filtering returned no architectures");

  report.winner = filtered.top_k.front().enc;

  if (report.plan.keep >= 1) {
    std::vector<ArchEncoding> candidates;
    candidates.reserve(filtered.top_k.size());
    for (const auto& s : filtered.top_k) candidates.push_back(s.enc);

    RefineOptions ropts;
    ropts.base_epochs = opts.base_epochs;
    ropts.eta = opts.eta;
    ropts.workers = opts.workers;
    ropts.deadline = deadline;
    ropts.epoch_seconds_hint = report.profile.t2;

    std::optional<RefineResult> refined;
    if (simulated) {
      SimTrainBackend backend(*opts.bench, opts.sim_t2, clk);
      refined = run_refinement(candidates, backend, ropts, clk);
    } else {
      auto [train, val] = split(dataset, {opts.train_fraction, opts.seed});
      RealTrainBackend backend(train, val, opts.train_batch_size, opts.lr,
                               cfg.init, opts.seed);
      refined = run_refinement(candidates, backend, ropts, clk);
    }
    report.refine_wall_s = refined->wall_time_s;
    for (const auto& w : refined->warnings)
      report.degradations.push_back("refinement: " + w);
    report.winner = refined->winner;
    report.winner_val_auc = refined->winner_val_auc;
    report.refinement = std::move(refined);
  }

  if (opts.bench != nullptr) {
    const BenchRecord* r = opts.bench->find(report.winner.to_string());
    if (r != nullptr) report.winner_bench_auc = best_val_auc(*r);
  }

  report.total_wall_s = clk->now() - start;
  report.within_budget = report.total_wall_s <= opts.t_max_s * (1.0 + 1e-9);
  if (!report.within_budget)
    report.degradations.push_back("completed after the budget deadline");
  return report;
}

}  // namespace atlas
