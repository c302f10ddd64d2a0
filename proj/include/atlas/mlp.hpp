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

#ifndef ATLAS_MLP_HPP_
#define ATLAS_MLP_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "atlas/dataset.hpp"

namespace atlas {

enum class InitMode { LeCun, Xavier, He };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& s);

/// How batch normalization behaves in a forward pass. `BatchStats`
/// normalizes with the current batch's mean/variance (requires B >= 2);
/// `Bypass` treats every BN layer as the identity, which data-agnostic
/// scoring needs because constant inputs have zero batch variance.
enum class BnMode { BatchStats, Bypass };

enum class LossKind { Bce, SumOutput };

/// Fixed-backbone MLP: input d -> L hidden layers of
/// (linear, batch norm, ReLU) -> linear single-logit output.
///
/// Parameter layout per hidden layer l (1-based in doc comments):
///   W[l] is fan_out x fan_in, b[l] is fan_out, bn gamma/beta are fan_out.
/// The output layer has weights/bias only. All arithmetic is double.
class MlpModel {
 public:
  struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    std::vector<Eigen::VectorXd> mgamma, vgamma, mbeta, vbeta;
    long step = 0;
    bool initialized = false;
  };

  /// hidden_sizes may be empty (a bare linear model), used by small tests.
  MlpModel(std::vector<int> hidden_sizes, int input_dim, InitMode init,
           std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int num_hidden_layers() const { return static_cast<int>(hidden_sizes_.size()); }
  const std::vector<int>& hidden_sizes() const { return hidden_sizes_; }

  /// Linear layers, hidden first, output last (num_hidden_layers() + 1).
  std::vector<Eigen::MatrixXd>& weights() { return W_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  std::vector<Eigen::VectorXd>& bn_gamma() { return gamma_; }
  const std::vector<Eigen::VectorXd>& bn_gamma() const { return gamma_; }
  std::vector<Eigen::VectorXd>& bn_beta() { return beta_; }
  const std::vector<Eigen::VectorXd>& bn_beta() const { return beta_; }
  double bn_eps() const { return bn_eps_; }

  AdamState& adam_state() { return adam_; }

  long param_count() const;

  /// Copies parameters (not Adam state); used for scoring snapshots.
  MlpModel clone_parameters() const;

  /// Rewrites every weight matrix entry to its absolute value. Biases and
  /// BN parameters are left untouched.
  void make_weights_positive();

  /// Flat views over all trainable parameters in a fixed order:
  /// per hidden layer W, b, gamma, beta; then output W, b.
  Eigen::VectorXd flatten_parameters() const;
  void unflatten_parameters(const Eigen::VectorXd& theta);

  /// JSON checkpoint (layer sizes + parameter arrays, lossless doubles).
  std::string to_checkpoint_json() const;
  static MlpModel from_checkpoint_json(const std::string& json_text);

 private:
  MlpModel() = default;

  std::vector<int> hidden_sizes_;
  int input_dim_ = 0;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
  std::vector<Eigen::VectorXd> gamma_, beta_;
  double bn_eps_ = 1e-5;
  AdamState adam_;
};

/// Everything backward() needs, cached by forward().
struct ForwardTrace {
  BnMode bn_mode = BnMode::BatchStats;
  Eigen::MatrixXd input;                    // B x d
  std::vector<Eigen::MatrixXd> pre_act;     // linear outputs h^l, B x h_l
  std::vector<Eigen::MatrixXd> bn_out;      // post-BN pre-ReLU, B x h_l
  std::vector<Eigen::MatrixXd> post_act;    // z^l = ReLU(bn_out), B x h_l
  std::vector<Eigen::VectorXd> bn_mean;     // batch stats per hidden layer
  std::vector<Eigen::VectorXd> bn_var;
  Eigen::MatrixXd output;                   // B x 1 logits
};

/// Gradients mirroring the model's parameter layout. `dz` holds the
/// per-sample gradients with respect to post-activations z^l when
/// requested (one B x h_l matrix per hidden layer).
struct GradientSet {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  std::vector<Eigen::VectorXd> dgamma, dbeta;
  std::vector<Eigen::MatrixXd> dz;
  Eigen::MatrixXd doutput;                  // B x 1

  Eigen::VectorXd flatten(const MlpModel& m) const;
};

ForwardTrace forward(const MlpModel& m, const Eigen::MatrixXd& x, BnMode bn_mode);

/// Analytic backward pass. `loss` selects between mean binary
/// cross-entropy on the sigmoid of the logit (labels required) and the
/// label-free sum of the raw outputs over the batch.
GradientSet backward(const MlpModel& m, const ForwardTrace& trace, LossKind loss,
                     const std::vector<int>* labels,
                     bool want_activation_grads = false);

/// Backward seeded with an explicit dL/d(output) matrix; used to form
/// per-sample output Jacobians.
GradientSet backward_from_output(const MlpModel& m, const ForwardTrace& trace,
                                 const Eigen::MatrixXd& doutput,
                                 bool want_activation_grads = false);

/// Numerically stable mean BCE of logits against {0,1} labels.
double bce_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Mann-Whitney ROC-AUC with average-rank tie handling.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_auc = 0.0;
  double val_auc = 0.0;
  double wall_time_s = 0.0;
};

struct TrainOptions {
  int epochs = 1;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Cosine-decay horizon in epochs. Defaults to `epochs`; continuation
  /// calls set horizon to the combined run length and start_epoch to the
  /// number of epochs already taken so the schedule and batch seeds chain.
  int horizon = -1;
  int start_epoch = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam (beta1=0.9, beta2=0.999, eps=1e-8) with cosine-decayed learning
/// rate. Mutates the model in place; per-epoch metrics are evaluated on
/// the full train and validation splits after each epoch. Throws
/// TrainingDiverged on a non-finite loss.
std::vector<EpochStats> train_epochs(MlpModel& m, const Dataset& train,
                                     const Dataset& val, const TrainOptions& opts);

}  // namespace atlas

#endif  // ATLAS_MLP_HPP_
