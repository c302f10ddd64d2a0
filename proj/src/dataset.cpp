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

#include "atlas/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "atlas/rng.hpp"

namespace atlas {

namespace {

constexpr int kMaxCategoricalCardinality = 64;

// RFC-4180 field splitting for one record. Quoted fields may contain
// commas and doubled quotes; embedded newlines are not supported here
// (one record per line).
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(cell, &consumed);
    while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed]))) ++consumed;
    if (consumed != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("load_csv: unparseable cell at row " + std::to_string(row) +
                             ", col " + std::to_string(col) + ": '" + cell + "'");
  }
}

void require_both_classes(const std::vector<int>& labels, const std::string& context) {
  bool has0 = false, has1 = false;
  for (int y : labels) (y == 0 ? has0 : has1) = true;
  if (!has0 || !has1) throw std::runtime_error(context + ": single-class labels");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> column_stats(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd mean = m.colwise().mean();
  Eigen::VectorXd std(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - mean(c)).square().mean();
    std(c) = std::sqrt(var);
  }
  return {mean, std};
}

}  // namespace

void normalize_columns(Eigen::MatrixXd& m, const Eigen::VectorXd& mean,
                       const Eigen::VectorXd& std) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (std(c) > 0.0) {
      m.col(c) = (m.col(c).array() - mean(c)) / std(c);
    } else {
      m.col(c).setZero();
    }
  }
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& categorical_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: missing file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw std::runtime_error("load_csv: label column absent: " + label_column);
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

  std::set<std::size_t> categorical_idx;
  for (const auto& name : categorical_columns) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("load_csv: categorical column absent: " + name);
    categorical_idx.insert(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<std::vector<std::string>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("load_csv: row " + std::to_string(row_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  // Category vocabularies, sorted for deterministic one-hot layout.
  std::map<std::size_t, std::vector<std::string>> vocab;
  for (std::size_t c : categorical_idx) {
    std::set<std::string> values;
    for (const auto& r : rows) values.insert(r[c]);
    if (values.size() > kMaxCategoricalCardinality)
      throw std::runtime_error("load_csv: categorical column '" + header[c] + "' has " +
                               std::to_string(values.size()) + " distinct values (limit 64)");
    vocab[c] = {values.begin(), values.end()};
  }

  Eigen::Index d = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    d += categorical_idx.count(c) ? static_cast<Eigen::Index>(vocab[c].size()) : 1;
  }

  Dataset ds;
  ds.name = path;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  ds.features.setZero();
  ds.labels.reserve(rows.size());

  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index out = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_idx) continue;
      if (categorical_idx.count(c)) {
        const auto& v = vocab[c];
        const auto it = std::lower_bound(v.begin(), v.end(), rows[r][c]);
        ds.features(static_cast<Eigen::Index>(r), out + (it - v.begin())) = 1.0;
        out += static_cast<Eigen::Index>(v.size());
      } else {
        ds.features(static_cast<Eigen::Index>(r), out++) = parse_number(rows[r][c], r + 2, c + 1);
      }
    }
    const double y = parse_number(rows[r][label_idx], r + 2, label_idx + 1);
    if (y != 0.0 && y != 1.0)
      throw std::runtime_error("load_csv: label not in {0,1} at row " + std::to_string(r + 2));
    ds.labels.push_back(static_cast<int>(y));
  }
  require_both_classes(ds.labels, "load_csv");

  const auto [mean, std] = column_stats(ds.features);
  normalize_columns(ds.features, mean, std);
  return ds;
}

Eigen::VectorXd synthetic_weights(int d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x77737461ULL));  // weight stream
  Eigen::VectorXd w(d);
  for (int i = 0; i < d; ++i) w(i) = rng.normal();
  w /= w.norm();
  return w;
}

double synthetic_latent_score(const Eigen::VectorXd& w_star, const Eigen::VectorXd& x) {
  return w_star.dot(x) + 0.5 * x(0) * x(1);
}

Dataset make_synthetic(int n, int d, double noise, std::uint64_t seed) {
  if (n < 100) throw std::invalid_argument("make_synthetic: n must be >= 100");
  if (d < 2) throw std::invalid_argument("make_synthetic: d must be >= 2");
  if (noise < 0.0 || noise >= 1.0)
    throw std::invalid_argument("make_synthetic: noise must be in [0, 1)");

  const Eigen::VectorXd w = synthetic_weights(d, seed);

  Dataset ds;
  ds.name = "synthetic(n=" + std::to_string(n) + ",d=" + std::to_string(d) + ")";
  ds.features.resize(n, d);
  Rng feat_rng(derive_seed(seed, 0x78ULL));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) ds.features(r, c) = feat_rng.normal();

  Eigen::VectorXd score(n);
  for (int r = 0; r < n; ++r)
    score(r) = synthetic_latent_score(w, ds.features.row(r).transpose());

  double threshold = 0.0;
  {
    const double balance = (score.array() > 0.0).cast<double>().mean();
    if (balance < 0.35 || balance > 0.65) {
      // Median shift keeps the rule deterministic and the classes balanced.
      std::vector<double> sorted(score.data(), score.data() + n);
      std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
      threshold = sorted[static_cast<std::size_t>(n / 2)];
    }
  }

  ds.labels.resize(n);
  Rng flip_rng(derive_seed(seed, 0x666CULL));
  for (int r = 0; r < n; ++r) {
    int y = score(r) > threshold ? 1 : 0;
    if (noise > 0.0 && flip_rng.uniform() < noise) y = 1 - y;
    ds.labels[static_cast<std::size_t>(r)] = y;
  }
  require_both_classes(ds.labels, "make_synthetic");
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("split: train_fraction must be in (0, 1)");

  const Eigen::Index n = ds.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(spec.seed, 0x73706C69ULL));
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  const auto n_train = static_cast<Eigen::Index>(
      std::llround(spec.train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n)
    throw std::runtime_error("split: degenerate split sizes");

  auto take = [&](Eigen::Index begin, Eigen::Index count, const std::string& tag) {
    Dataset out;
    out.name = ds.name + "/" + tag;
    out.features.resize(count, ds.features.cols());
    out.labels.resize(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index src = order[static_cast<std::size_t>(begin + i)];
      out.features.row(i) = ds.features.row(src);
      out.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    }
    return out;
  };

  Dataset train = take(0, n_train, "train");
  Dataset val = take(n_train, n - n_train, "val");
  require_both_classes(train.labels, "split(train)");
  require_both_classes(val.labels, "split(val)");

  const auto [mean, std] = column_stats(train.features);
  normalize_columns(train.features, mean, std);
  normalize_columns(val.features, mean, std);
  return {std::move(train), std::move(val)};
}

BatchIterator::BatchIterator(const Dataset& ds, int batch_size, std::uint64_t seed,
                             bool shuffle)
    : ds_(ds), batch_size_(batch_size) {
  if (batch_size <= 0) throw std::invalid_argument("batches: B must be >= 1");
  if (batch_size > ds.rows())
    throw std::invalid_argument("batches: B exceeds row count");
  order_.resize(static_cast<std::size_t>(ds.rows()));
  for (Eigen::Index i = 0; i < ds.rows(); ++i) order_[static_cast<std::size_t>(i)] = i;
  if (shuffle) {
    Rng rng(derive_seed(seed, 0x62617463ULL));
    for (Eigen::Index i = ds.rows() - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
    }
  }
}

std::optional<DataBatch> BatchIterator::next() {
  const auto n = static_cast<Eigen::Index>(order_.size());
  if (pos_ >= n) return std::nullopt;
  const Eigen::Index count = std::min<Eigen::Index>(batch_size_, n - pos_);
  DataBatch b;
  b.x.resize(count, ds_.features.cols());
  b.y.resize(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index src = order_[static_cast<std::size_t>(pos_ + i)];
    b.x.row(i) = ds_.features.row(src);
    b.y[static_cast<std::size_t>(i)] = ds_.labels[static_cast<std::size_t>(src)];
  }
  pos_ += count;
  return b;
}

void BatchIterator::reset() { pos_ = 0; }

BatchIterator batches(const Dataset& ds, int batch_size, std::uint64_t seed,
                      bool shuffle) {
  return BatchIterator(ds, batch_size, seed, shuffle);
}

DataBatch full_batch(const Dataset& ds) {
  DataBatch b;
  b.x = ds.features;
  b.y = ds.labels;
  return b;
}

}  // namespace atlas
