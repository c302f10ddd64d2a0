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

#include "atlas/bench.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "atlas/mlp.hpp"
#include "atlas/rng.hpp"

namespace atlas {
namespace {

using json = nlohmann::json;

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json header_to_json(const BenchHeader& h) {
  json j;
  j["space"] = {{"L", h.num_layers}, {"H", h.width_choices}};
  j["dataset_sha256"] = h.dataset_sha256;
  j["epochs"] = h.epochs;
  j["B"] = h.batch_size;
  j["lr"] = h.lr;
  j["seed"] = h.seed;
  j["created"] = h.created;
  return j;
}

BenchHeader header_from_json(const json& j) {
  BenchHeader h;
  h.num_layers = j.at("space").at("L").get<int>();
  h.width_choices = j.at("space").at("H").get<std::vector<int>>();
  h.dataset_sha256 = j.at("dataset_sha256").get<std::string>();
  h.epochs = j.at("epochs").get<int>();
  h.batch_size = j.at("B").get<int>();
  h.lr = j.at("lr").get<double>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.created = j.at("created").get<std::string>();
  return h;
}

json record_to_json(const BenchRecord& r) {
  json j;
  j["arch"] = r.arch;
  j["params"] = r.params;
  j["train_auc"] = r.train_auc;
  j["val_auc"] = r.val_auc;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  j["epoch_time_s"] = r.epoch_time_s;
  j["seed"] = r.seed;
  j["diverged"] = r.diverged;
  return j;
}

BenchRecord record_from_json(const json& j) {
  BenchRecord r;
  r.arch = j.at("arch").get<std::string>();
  r.params = j.at("params").get<long>();
  r.train_auc = j.at("train_auc").get<std::vector<double>>();
  r.val_auc = j.at("val_auc").get<std::vector<double>>();
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.val_loss = j.at("val_loss").get<std::vector<double>>();
  r.epoch_time_s = j.at("epoch_time_s").get<std::vector<double>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.diverged = j.at("diverged").get<bool>();
  return r;
}

void validate_record_shape(const BenchRecord& r, int epochs) {
  auto n = static_cast<std::size_t>(epochs);
  if (r.train_auc.size() != n || r.val_auc.size() != n ||
      r.train_loss.size() != n || r.val_loss.size() != n ||
      r.epoch_time_s.size() != n)
    throw std::runtime_error("bench record '" + r.arch +
                             "': metric arrays must have length " +
                             std::to_string(epochs));
}

/// Trains one architecture from scratch and packages its full history.
/// A divergence mid-run keeps the completed epochs and pads the rest,
/// so array lengths stay uniform across the file.
BenchRecord train_one(const SearchSpaceSpec& space, const ArchEncoding& enc,
                      const Dataset& train, const Dataset& val,
                      const BenchBuildOptions& opts) {
  BenchRecord r;
  r.arch = enc.to_string();
  r.seed = arch_seed(opts.seed, enc);

  MlpModel m(enc.sizes, space.input_dim, InitMode::He, r.seed);
  r.params = m.param_count();

  std::vector<EpochStats> stats;
  try {
    TrainOptions topts;
    topts.epochs = opts.epochs;
    topts.batch_size = opts.batch_size;
    topts.lr = opts.lr;
    topts.seed = r.seed;
    stats = train_epochs(m, train, val, topts);
  } catch (const TrainingDiverged&) {
    r.diverged = true;
  }

  for (const auto& s : stats) {
    r.train_auc.push_back(s.train_auc);
    r.val_auc.push_back(s.val_auc);
    r.train_loss.push_back(s.train_loss);
    r.val_loss.push_back(s.val_loss);
    r.epoch_time_s.push_back(s.wall_time_s);
  }
  while (r.train_auc.size() < static_cast<std::size_t>(opts.epochs)) {
    bool empty = r.train_auc.empty();
    r.train_auc.push_back(empty ? 0.5 : r.train_auc.back());
    r.val_auc.push_back(empty ? 0.5 : r.val_auc.back());
    r.train_loss.push_back(empty ? 1e9 : r.train_loss.back());
    r.val_loss.push_back(empty ? 1e9 : r.val_loss.back());
    r.epoch_time_s.push_back(empty ? 0.0 : r.epoch_time_s.back());
  }
  return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  auto n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw std::invalid_argument("srcc: input has zero rank variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> mid_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double mid = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

std::vector<std::pair<double, double>> ecdf_points(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> pts;
  auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    pts.emplace_back(v[i], static_cast<double>(i + 1) / n);
  }
  return pts;
}

}  // namespace

void BenchFile::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!index_.emplace(records[i].arch, i).second)
      throw std::runtime_error("bench file: duplicate record for '" +
                               records[i].arch + "'");
  }
}

const BenchRecord* BenchFile::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &records[it->second];
}

std::string dataset_sha256(const Dataset& ds) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("dataset_sha256: EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);

  auto absorb = [&](const void* p, std::size_t n) { EVP_DigestUpdate(ctx, p, n); };
  std::int64_t rows = ds.rows(), cols = ds.dim();
  absorb(&rows, sizeof(rows));
  absorb(&cols, sizeof(cols));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      double v = ds.features(i, j);
      absorb(&v, sizeof(v));
    }
  for (int label : ds.labels) {
    auto b = static_cast<unsigned char>(label);
    absorb(&b, 1);
  }

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

BenchFile load_bench(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bench file '" + path + "'");

  BenchFile bench;
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::runtime_error("bench file '" + path + "': missing header line");
  try {
    bench.header = header_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw std::runtime_error("bench file '" + path + "': bad header: " + e.what());
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    BenchRecord r;
    try {
      r = record_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw std::runtime_error("bench file '" + path + "' line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    validate_record_shape(r, bench.header.epochs);
    bench.records.push_back(std::move(r));
  }
  bench.rebuild_index();
  return bench;
}

BenchFile build_bench(const std::string& path, const SearchSpaceSpec& space,
                      const Dataset& dataset, const BenchBuildOptions& opts,
                      const std::function<void(int, int)>& progress) {
  space.validate();
  if (opts.epochs < 1) throw std::invalid_argument("build_bench: epochs must be >= 1");
  if (opts.batch_size < 2)
    throw std::invalid_argument("build_bench: batch size must be >= 2");
  if (opts.workers < 1) throw std::invalid_argument("build_bench: workers must be >= 1");

  std::vector<ArchEncoding> all = enumerate_space(space);
  std::string fingerprint = dataset_sha256(dataset);

  BenchHeader header;
  header.num_layers = space.num_layers;
  header.width_choices = space.width_choices;
  header.dataset_sha256 = fingerprint;
  header.epochs = opts.epochs;
  header.batch_size = opts.batch_size;
  header.lr = opts.lr;
  header.seed = opts.seed;
  header.created = opts.created.empty() ? iso8601_now() : opts.created;

  // Resume: an existing file contributes its records, provided its header
  // matches the requested build in everything but the timestamp.
  std::map<std::string, BenchRecord> done;
  bool resuming = std::filesystem::exists(path);
  if (resuming) {
    BenchFile prior = load_bench(path);
    const BenchHeader& ph = prior.header;
    if (ph.num_layers != header.num_layers ||
        ph.width_choices != header.width_choices ||
        ph.dataset_sha256 != header.dataset_sha256 ||
        ph.epochs != header.epochs || ph.batch_size != header.batch_size ||
        ph.lr != header.lr || ph.seed != header.seed)
      throw std::runtime_error(
          "build_bench: existing file '" + path +
          "' was built with different settings; refusing to mix");
    header.created = ph.created;
    for (auto& r : prior.records) done.emplace(r.arch, std::move(r));
  }

  std::vector<const ArchEncoding*> missing;
  for (const auto& enc : all)
    if (!done.count(enc.to_string())) missing.push_back(&enc);

  auto [train, val] = split(dataset, {opts.train_fraction, opts.seed});

  int total = static_cast<int>(all.size());
  std::atomic<int> completed{total - static_cast<int>(missing.size())};
  if (progress) progress(completed.load(), total);

  std::mutex done_mu;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= missing.size()) return;
      BenchRecord r = train_one(space, *missing[i], train, val, opts);
      {
        std::lock_guard<std::mutex> lock(done_mu);
        done.emplace(r.arch, std::move(r));
      }
      int c = ++completed;
      if (progress) progress(c, total);
    }
  };

  int workers = std::min<int>(opts.workers, std::max<std::size_t>(missing.size(), 1));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  // Records are written in enumeration order regardless of completion
  // order, so a killed-and-resumed build converges to the same bytes as
  // an uninterrupted one.
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write bench file '" + tmp + "'");
    out << header_to_json(header).dump() << "\n";
    for (const auto& enc : all) {
      auto it = done.find(enc.to_string());
      if (it == done.end())
        throw std::logic_error("build_bench: missing record after training");
      out << record_to_json(it->second).dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, path);

  BenchFile bench;
  bench.header = std::move(header);
  for (const auto& enc : all) bench.records.push_back(done.at(enc.to_string()));
  bench.rebuild_index();
  return bench;
}

double best_val_auc(const BenchRecord& record) {
  return *std::max_element(record.val_auc.begin(), record.val_auc.end());
}

BenchQuery query(const BenchFile& bench, const ArchEncoding& enc,
                 std::optional<int> epoch) {
  std::string key = enc.to_string();
  const BenchRecord* r = bench.find(key);
  if (r == nullptr) {
    std::vector<std::string> keys;
    keys.reserve(bench.records.size());
    for (const auto& rec : bench.records) keys.push_back(rec.arch);
    std::sort(keys.begin(), keys.end());
    auto it = std::lower_bound(keys.begin(), keys.end(), key);
    std::string nearest;
    std::size_t lo = it == keys.begin() ? 0 : (it - keys.begin()) - 1;
    for (std::size_t i = lo; i < keys.size() && i < lo + 3; ++i)
      nearest += (nearest.empty() ? "" : ", ") + keys[i];
    throw std::invalid_argument("query: architecture '" + key +
                                "' is not in the benchmark; nearest keys: " +
                                nearest);
  }

  int e;
  if (epoch.has_value()) {
    e = *epoch;
    if (e < 0 || e >= bench.header.epochs)
      throw std::invalid_argument(
          "query: epoch " + std::to_string(e) + " outside [0, " +
          std::to_string(bench.header.epochs - 1) + "]");
  } else {
    e = static_cast<int>(std::max_element(r->val_auc.begin(), r->val_auc.end()) -
                         r->val_auc.begin());
  }

  BenchQuery q;
  q.arch = r->arch;
  q.params = r->params;
  q.epoch = e;
  q.train_auc = r->train_auc[e];
  q.val_auc = r->val_auc[e];
  q.train_loss = r->train_loss[e];
  q.val_loss = r->val_loss[e];
  q.epoch_time_s = r->epoch_time_s[e];
  q.diverged = r->diverged;
  return q;
}

double srcc(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("srcc: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("srcc: need at least 2 points");
  for (double v : xs)
    if (!std::isfinite(v)) throw std::invalid_argument("srcc: non-finite input");
  for (double v : ys)
    if (!std::isfinite(v)) throw std::invalid_argument("srcc: non-finite input");
  std::vector<double> rx = mid_ranks(xs), ry = mid_ranks(ys);
  return pearson(rx, ry);
}

ProxySrccReport proxy_srcc_report(const BenchFile& bench,
                                  const std::vector<ProxyKind>& kinds,
                                  const ScoreConfig& cfg, const DataBatch* batch,
                                  int input_dim, int sample, std::uint64_t seed) {
  cfg.validate();
  if (bench.records.size() < 2)
    throw std::invalid_argument("proxy_srcc_report: need at least 2 records");
  if (input_dim < 1)
    throw std::invalid_argument("proxy_srcc_report: input_dim must be >= 1");
  if (batch != nullptr && batch->x.cols() != input_dim)
    throw std::invalid_argument(
        "proxy_srcc_report: batch dimension does not match input_dim");

  std::vector<std::size_t> idx(bench.records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (sample > 0 && static_cast<std::size_t>(sample) < idx.size()) {
    Rng rng(derive_seed(seed, 0x62736D70ULL));
    for (std::size_t i = 0; i < static_cast<std::size_t>(sample); ++i) {
      auto j = i + static_cast<std::size_t>(
                       rng.below(static_cast<std::uint64_t>(idx.size() - i)));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(sample));
    std::sort(idx.begin(), idx.end());
  }

  std::vector<double> target;
  target.reserve(idx.size());
  for (std::size_t i : idx) target.push_back(best_val_auc(bench.records[i]));

  ProxySrccReport report;
  report.sample_count = static_cast<int>(idx.size());

  for (ProxyKind kind : kinds) {
    ProxySrccEntry entry;
    entry.kind = kind;
    std::vector<double> scores;
    std::vector<bool> degenerate;
    double total_time = 0.0;
    scores.reserve(idx.size());
    static const DataBatch kEmpty;
    try {
      for (std::size_t i : idx) {
        ArchEncoding enc = ArchEncoding::from_string(bench.records[i].arch);
        MlpModel m(enc.sizes, input_dim, cfg.init, arch_seed(cfg.seed, enc));
        ProxyScore s = score_proxy(kind, m, batch != nullptr ? *batch : kEmpty, cfg);
        scores.push_back(s.value);
        degenerate.push_back(s.degenerate);
        total_time += s.wall_time_s;
        if (s.degenerate) ++entry.degenerate_count;
      }
      // A degenerate score carries no ordering information; every such
      // architecture shares one value below the finite minimum so that
      // mid-ranking ties them at the bottom.
      double finite_min = 0.0;
      bool any_finite = false;
      for (std::size_t i = 0; i < scores.size(); ++i)
        if (!degenerate[i]) {
          finite_min = any_finite ? std::min(finite_min, scores[i]) : scores[i];
          any_finite = true;
        }
      double floor_value = any_finite ? finite_min - 1.0 : 0.0;
      for (std::size_t i = 0; i < scores.size(); ++i)
        if (degenerate[i]) scores[i] = floor_value;
      entry.srcc = srcc(scores, target);
    } catch (const std::exception& e) {
      entry.srcc.reset();
      entry.error = e.what();
    }
    entry.mean_score_time_s =
        idx.empty() ? 0.0 : total_time / static_cast<double>(idx.size());
    report.entries.push_back(std::move(entry));
  }
  return report;
}

StatsReport stats_report(const BenchFile& bench) {
  if (bench.records.empty())
    throw std::invalid_argument("stats_report: empty benchmark");

  std::vector<double> best_train, best_val;
  StatsReport report;
  for (const auto& r : bench.records) {
    double bt = *std::max_element(r.train_auc.begin(), r.train_auc.end());
    double bv = best_val_auc(r);
    best_train.push_back(bt);
    best_val.push_back(bv);
    report.params_vs_val.emplace_back(r.params, bv);
  }
  report.train_ecdf = ecdf_points(best_train);
  report.val_ecdf = ecdf_points(best_val);

  if (bench.records.size() >= 2) {
    std::vector<double> params;
    params.reserve(bench.records.size());
    for (const auto& r : bench.records) params.push_back(static_cast<double>(r.params));
    try {
      report.params_srcc = srcc(params, best_val);
    } catch (const std::invalid_argument&) {
      report.params_srcc.reset();
    }
  }
  return report;
}

}  // namespace atlas
