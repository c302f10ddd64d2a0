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

#ifndef ATLAS_BENCH_HPP_
#define ATLAS_BENCH_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "atlas/dataset.hpp"
#include "atlas/proxies.hpp"
#include "atlas/search_space.hpp"

namespace atlas {

/// Full training history of one architecture. Arrays always hold exactly
/// the configured epoch count; a diverged run is padded with its last
/// completed epoch (or chance-level sentinels) and flagged.
struct BenchRecord {
  std::string arch;
  long params = 0;
  std::vector<double> train_auc, val_auc, train_loss, val_loss, epoch_time_s;
  std::uint64_t seed = 0;
  bool diverged = false;
};

/// Persisted header fields, serialized as line 1 of the bench file.
struct BenchHeader {
  int num_layers = 0;
  std::vector<int> width_choices;
  std::string dataset_sha256;
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::string created;
};

/// One JSON-lines file: header line, then one record per architecture in
/// enumeration order.
class BenchFile {
 public:
  BenchHeader header;
  std::vector<BenchRecord> records;

  void rebuild_index();
  const BenchRecord* find(const std::string& key) const;
  std::size_t size() const { return records.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Canonical content fingerprint: SHA-256 over (rows, cols, row-major
/// feature doubles, label bytes), hex-encoded.
std::string dataset_sha256(const Dataset& ds);

struct BenchBuildOptions {
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 7;
  int workers = 1;
  double train_fraction = 0.8;
  /// Header timestamp; empty means "now". Fixed values keep rebuilt
  /// files byte-identical for the resumability contract.
  std::string created;
};

/// Trains every architecture in `space` on a seeded split of `dataset`
/// and streams records to `path` in enumeration order. Restartable: an
/// existing file's records are kept (after header validation) and only
/// the missing architectures are trained. Per-architecture seeds derive
/// from (opts.seed, encoding), so results do not depend on build order
/// or worker count. Returns the completed file.
BenchFile build_bench(const std::string& path, const SearchSpaceSpec& space,
                      const Dataset& dataset, const BenchBuildOptions& opts,
                      const std::function<void(int, int)>& progress = {});

BenchFile load_bench(const std::string& path);

/// One epoch's slice of a record; epoch == nullopt selects the epoch
/// with the highest validation AUC.
struct BenchQuery {
  std::string arch;
  long params = 0;
  int epoch = 0;
  double train_auc = 0, val_auc = 0, train_loss = 0, val_loss = 0, epoch_time_s = 0;
  bool diverged = false;
};

BenchQuery query(const BenchFile& bench, const ArchEncoding& enc,
                 std::optional<int> epoch);

double best_val_auc(const BenchRecord& record);

/// Spearman rank correlation: Pearson correlation of mid-ranks.
/// Throws on length mismatch, length < 2, or constant input.
double srcc(std::span<const double> xs, std::span<const double> ys);

struct ProxySrccEntry {
  ProxyKind kind = ProxyKind::ExpressFlow;
  std::optional<double> srcc;
  double mean_score_time_s = 0.0;
  int degenerate_count = 0;
  std::string error;
};

struct ProxySrccReport {
  std::vector<ProxySrccEntry> entries;
  int sample_count = 0;
};

/// Scores a sample of the bench's architectures with each proxy at a
/// fresh seeded initialization and correlates against best validation
/// AUC. Degenerate scores are assigned a shared value below every finite
/// score so they tie at the minimal rank. sample <= 0 means all records.
ProxySrccReport proxy_srcc_report(const BenchFile& bench,
                                  const std::vector<ProxyKind>& kinds,
                                  const ScoreConfig& cfg, const DataBatch* batch,
                                  int input_dim, int sample, std::uint64_t seed);

struct StatsReport {
  std::vector<std::pair<double, double>> train_ecdf;  // (best AUC, fraction <=)
  std::vector<std::pair<double, double>> val_ecdf;
  std::vector<std::pair<long, double>> params_vs_val;
  std::optional<double> params_srcc;
};

StatsReport stats_report(const BenchFile& bench);

}  // namespace atlas

#endif  // ATLAS_BENCH_HPP_
