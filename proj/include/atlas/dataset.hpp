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

#ifndef ATLAS_DATASET_HPP_
#define ATLAS_DATASET_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace atlas {

/// Immutable after construction; safe to share across concurrent readers.
struct Dataset {
  Eigen::MatrixXd features;    // rows = samples, cols = input dimension d
  std::vector<int> labels;     // values in {0, 1}
  std::string name;

  Eigen::Index rows() const { return features.rows(); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct DataBatch {
  Eigen::MatrixXd x;       // B x d
  std::vector<int> y;      // length B
  int size() const { return static_cast<int>(x.rows()); }
};

struct SplitSpec {
  double train_fraction = 0.8;   // in (0, 1)
  std::uint64_t seed = 0;
};

/// Loads an RFC-4180 style CSV (header row, UTF-8). The label column must
/// parse to {0, 1}. Categorical columns are one-hot expanded (categories
/// sorted lexicographically, cardinality capped at 64); the remaining
/// columns are parsed as numbers and z-score normalized over all loaded
/// rows, which act as the training split until split() recomputes
/// statistics. Constant columns normalize to all zeros.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& categorical_columns = {});

/// Deterministic synthetic binary-classification generator. Features are
/// i.i.d. standard normal; the latent score is w*.x + 0.5*x0*x1 with w*
/// drawn from the seed, thresholded at zero (shifted to the sample median
/// if the class balance would leave [0.35, 0.65]); labels are flipped with
/// probability `noise`. Requires n >= 100 and d >= 2.
Dataset make_synthetic(int n, int d, double noise, std::uint64_t seed);

/// Latent score of the synthetic generating rule for one feature row,
/// before noise. Exposed so tests can evaluate the Bayes-optimal ranking.
double synthetic_latent_score(const Eigen::VectorXd& w_star,
                              const Eigen::VectorXd& x);

/// The w* drawn by make_synthetic for a given (d, seed).
Eigen::VectorXd synthetic_weights(int d, std::uint64_t seed);

/// Row-disjoint split covering all rows. Normalization statistics are
/// computed on the train rows only and applied to both splits. Errors if
/// either side ends up single-class.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// Single-consumer epoch iterator. Every row appears exactly once per
/// epoch; the last batch may be short; a seeded shuffle is deterministic.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, int batch_size, std::uint64_t seed, bool shuffle);

  std::optional<DataBatch> next();
  void reset();

 private:
  const Dataset& ds_;
  int batch_size_;
  std::vector<Eigen::Index> order_;
  Eigen::Index pos_ = 0;
};

BatchIterator batches(const Dataset& ds, int batch_size, std::uint64_t seed,
                      bool shuffle);

/// One full-dataset batch, rows in storage order.
DataBatch full_batch(const Dataset& ds);

/// Mean/population-std z-scoring applied column-wise in place. Columns
/// with zero variance become all zeros.
void normalize_columns(Eigen::MatrixXd& m, const Eigen::VectorXd& mean,
                       const Eigen::VectorXd& std);

}  // namespace atlas

#endif  // ATLAS_DATASET_HPP_
