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

#include "atlas/proxies.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace atlas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTrajectoryFloor = 1e-12;

class ScoreTimer {
 public:
  ScoreTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return dt > 0.0 ? dt : 1e-9;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

DataBatch take_rows(const DataBatch& batch, int n) {
  if (batch.size() <= n) return batch;
  DataBatch out;
  out.x = batch.x.topRows(n);
  out.y.assign(batch.y.begin(), batch.y.begin() + n);
  return out;
}

BnMode bn_mode_for(const Eigen::MatrixXd& x) {
  return x.rows() >= 2 ? BnMode::BatchStats : BnMode::Bypass;
}

const DataBatch& require_batch(const DataBatch& batch, ProxyKind kind) {
  if (batch.size() < 1)
    throw std::invalid_argument("score_proxy: " + to_string(kind) +
                                " needs a data batch");
  return batch;
}

/// Full parameter gradient (flattened) of the mean BCE loss on `batch`.
Eigen::VectorXd bce_gradient(const MlpModel& m, const DataBatch& batch) {
  const ForwardTrace t = forward(m, batch.x, bn_mode_for(batch.x));
  const GradientSet g = backward(m, t, LossKind::Bce, &batch.y);
  return g.flatten(m);
}

/// Per-sample output gradients: row i is the flattened gradient of
/// output_i with respect to all parameters, holding the rest of the
/// batch fixed (batch statistics couple the samples, and the one-hot
/// seeding keeps that coupling in the Jacobian).
Eigen::MatrixXd output_jacobian(const MlpModel& m, const DataBatch& batch) {
  const ForwardTrace t = forward(m, batch.x, bn_mode_for(batch.x));
  const Eigen::Index B = batch.x.rows();
  Eigen::MatrixXd J(B, m.param_count());
  for (Eigen::Index i = 0; i < B; ++i) {
    Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(B, 1);
    seed(i, 0) = 1.0;
    const GradientSet g = backward_from_output(m, t, seed);
    J.row(i) = g.flatten(m).transpose();
  }
  return J;
}

ProxyScore finish(ProxyKind kind, const ScoreConfig& cfg, const ScoreTimer& timer,
                  double value, bool degenerate = false) {
  ProxyScore s;
  s.value = value;
  s.kind = kind;
  s.config_fingerprint = cfg.fingerprint();
  s.wall_time_s = timer.seconds();
  s.degenerate = degenerate;
  return s;
}

double score_synflow(const MlpModel& m) {
  MlpModel copy = m.clone_parameters();
  copy.make_weights_positive();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, copy.input_dim());
  const ForwardTrace t = forward(copy, ones, BnMode::Bypass);
  const GradientSet g = backward(copy, t, LossKind::SumOutput, nullptr);
  return g.flatten(copy).dot(copy.flatten_parameters());
}

double score_snip(const MlpModel& m, const DataBatch& batch) {
  const Eigen::VectorXd g = bce_gradient(m, batch);
  const Eigen::VectorXd theta = m.flatten_parameters();
  return g.cwiseProduct(theta).cwiseAbs().sum();
}

double score_gradnorm(const MlpModel& m, const DataBatch& batch) {
  return bce_gradient(m, batch).norm();
}

double score_fisher(const MlpModel& m, const DataBatch& batch) {
  const ForwardTrace t = forward(m, batch.x, bn_mode_for(batch.x));
  const GradientSet g = backward(m, t, LossKind::Bce, &batch.y, true);
  double total = 0.0;
  for (std::size_t l = 0; l < g.dz.size(); ++l) {
    // Per neuron: square of the batch-summed activation saliency.
    const Eigen::ArrayXXd prod = g.dz[l].array() * t.post_act[l].array();
    const Eigen::ArrayXd per_neuron = prod.colwise().sum();
    total += per_neuron.square().sum();
  }
  return total;
}

double score_weightnorm(const MlpModel& m) { return m.flatten_parameters().norm(); }

std::pair<double, bool> score_naswot(const MlpModel& m, const DataBatch& batch) {
  const ForwardTrace t = forward(m, batch.x, bn_mode_for(batch.x));
  const Eigen::Index B = batch.x.rows();
  long total_units = 0;
  for (const auto& act : t.post_act) total_units += act.cols();
  if (total_units == 0) return {-kInf, true};

  // Binary activation codes, one row per sample.
  Eigen::MatrixXd codes(B, total_units);
  Eigen::Index at = 0;
  for (const auto& act : t.post_act) {
    codes.middleCols(at, act.cols()) =
        (act.array() > 0.0).cast<double>().matrix();
    at += act.cols();
  }

  Eigen::MatrixXd kernel(B, B);
  for (Eigen::Index i = 0; i < B; ++i)
    for (Eigen::Index j = 0; j < B; ++j) {
      const double hamming = (codes.row(i) - codes.row(j)).cwiseAbs().sum();
      kernel(i, j) = static_cast<double>(total_units) - hamming;
    }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda <= 1e-12) return {-kInf, true};
    log_det += std::log(lambda);
  }
  return {log_det, false};
}

double score_grasp(const MlpModel& m, const DataBatch& batch) {
  const Eigen::VectorXd g = bce_gradient(m, batch);
  const Eigen::VectorXd theta = m.flatten_parameters();
  const double theta_norm = theta.norm();
  const double g_norm = g.norm();
  if (g_norm < 1e-300 || theta_norm == 0.0) return 0.0;

  const double eps = 1e-3 * theta_norm / (g_norm + 1e-12);
  MlpModel probe = m.clone_parameters();
  probe.unflatten_parameters(theta + eps * g);
  const Eigen::VectorXd g_plus = bce_gradient(probe, batch);
  probe.unflatten_parameters(theta - eps * g);
  const Eigen::VectorXd g_minus = bce_gradient(probe, batch);
  const Eigen::VectorXd hg = (g_plus - g_minus) / (2.0 * eps);
  if (!hg.allFinite())
    throw std::runtime_error("grasp: non-finite Hessian-vector product");
  return -hg.dot(theta);
}

double score_ntk_trace(const MlpModel& m, const DataBatch& batch) {
  const Eigen::MatrixXd J = output_jacobian(m, batch);
  return J.array().square().sum();
}

std::pair<double, bool> score_ntk_cond(const MlpModel& m, const DataBatch& batch) {
  const Eigen::MatrixXd J = output_jacobian(m, batch);
  const Eigen::MatrixXd gram = J * J.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double lambda_max = es.eigenvalues().maxCoeff();
  if (lambda_min <= 1e-12) return {kInf, true};
  return {lambda_max / lambda_min, false};
}

}  // namespace

std::string to_string(ProxyKind kind) {
  switch (kind) {
    case ProxyKind::ExpressFlow: return "expressflow";
    case ProxyKind::SynFlow: return "synflow";
    case ProxyKind::Snip: return "snip";
    case ProxyKind::GradNorm: return "gradnorm";
    case ProxyKind::Fisher: return "fisher";
    case ProxyKind::Naswot: return "naswot";
    case ProxyKind::Grasp: return "grasp";
    case ProxyKind::NtkTrace: return "ntktrace";
    case ProxyKind::NtkCond: return "ntkcond";
    case ProxyKind::WeightNorm: return "weightnorm";
  }
  return "?";
}

ProxyKind proxy_kind_from_string(const std::string& s) {
  for (ProxyKind kind : all_proxy_kinds())
    if (to_string(kind) == s) return kind;
  throw std::invalid_argument("unknown proxy kind: " + s);
}

const std::vector<ProxyKind>& all_proxy_kinds() {
  static const std::vector<ProxyKind> kinds = {
      ProxyKind::ExpressFlow, ProxyKind::SynFlow,  ProxyKind::Snip,
      ProxyKind::GradNorm,    ProxyKind::Fisher,   ProxyKind::Naswot,
      ProxyKind::Grasp,       ProxyKind::NtkTrace, ProxyKind::NtkCond,
      ProxyKind::WeightNorm,
  };
  return kinds;
}

std::string to_string(DataMode mode) {
  return mode == DataMode::AllOnes ? "all-ones" : "real-batch";
}

std::string to_string(Recalibration r) {
  switch (r) {
    case Recalibration::Both: return "both";
    case Recalibration::WidthOnly: return "width-only";
    case Recalibration::DepthOnly: return "depth-only";
    case Recalibration::None: return "none";
  }
  return "?";
}

DataMode data_mode_from_string(const std::string& s) {
  if (s == "all-ones") return DataMode::AllOnes;
  if (s == "real-batch") return DataMode::RealBatch;
  throw std::invalid_argument("unknown data mode: " + s);
}

Recalibration recalibration_from_string(const std::string& s) {
  if (s == "both") return Recalibration::Both;
  if (s == "width-only") return Recalibration::WidthOnly;
  if (s == "depth-only") return Recalibration::DepthOnly;
  if (s == "none") return Recalibration::None;
  throw std::invalid_argument("unknown recalibration: " + s);
}

void ScoreConfig::validate() const {
  if (batch_size < 1)
    throw std::invalid_argument("score config: batch_size must be >= 1");
  if (trajectory_segments < 2)
    throw std::invalid_argument("score config: trajectory_segments must be >= 2");
}

std::string ScoreConfig::fingerprint() const {
  std::ostringstream out;
  out << "B=" << batch_size << ",init=" << atlas::to_string(init)
      << ",pos=" << (positivity ? 1 : 0) << ",data=" << atlas::to_string(data_mode)
      << ",recal=" << atlas::to_string(recalibration) << ",S=" << trajectory_segments
      << ",seed=" << seed << ",bce=" << (bce_variant ? 1 : 0);
  return out.str();
}

double trajectory_length(const MlpModel& m, int layer, int segments,
                         bool* degenerate) {
  if (layer < 1 || layer > m.num_hidden_layers())
    throw std::invalid_argument("trajectory_length: layer out of range");
  if (segments < 2)
    throw std::invalid_argument("trajectory_length: segments must be >= 2");
  if (degenerate != nullptr) *degenerate = false;

  // All S+1 sample points go through one bypassed forward pass.
  Eigen::MatrixXd points(segments + 1, m.input_dim());
  for (int k = 0; k <= segments; ++k)
    points.row(k).setConstant(static_cast<double>(k) / segments);
  const ForwardTrace t = forward(m, points, BnMode::Bypass);
  const Eigen::MatrixXd& z = t.post_act[static_cast<std::size_t>(layer - 1)];

  double length = 0.0;
  for (int k = 0; k < segments; ++k) length += (z.row(k + 1) - z.row(k)).norm();
  if (length < kTrajectoryFloor) {
    if (degenerate != nullptr) *degenerate = true;
    return kTrajectoryFloor;
  }
  return length;
}

ProxyScore score_expressflow(const MlpModel& m, const DataBatch* batch,
                             const ScoreConfig& cfg) {
  cfg.validate();
  const ScoreTimer timer;

  MlpModel copy = m.clone_parameters();
  if (cfg.positivity) copy.make_weights_positive();

  Eigen::MatrixXd x;
  BnMode bn = BnMode::Bypass;
  const std::vector<int>* labels = nullptr;
  std::vector<int> label_storage;
  if (cfg.data_mode == DataMode::AllOnes) {
    x = Eigen::MatrixXd::Ones(1, copy.input_dim());
  } else {
    if (batch == nullptr || batch->size() < 1)
      throw std::invalid_argument("score_expressflow: real-batch mode needs data");
    const DataBatch use = take_rows(*batch, cfg.batch_size);
    x = use.x;
    // Batch statistics would recentre pre-activations and defeat the
    // positive-weight structure the saliency relies on, so scoring
    // always treats batch norm as identity regardless of batch size.
    label_storage = use.y;
    labels = &label_storage;
  }

  const ForwardTrace trace = forward(copy, x, bn);
  const LossKind loss =
      (cfg.bce_variant && cfg.data_mode == DataMode::RealBatch) ? LossKind::Bce
                                                                : LossKind::SumOutput;
  const GradientSet g =
      backward(copy, trace, loss, loss == LossKind::Bce ? labels : nullptr, true);

  bool any_degenerate = false;
  double total = 0.0;
  for (int l = 1; l <= copy.num_hidden_layers(); ++l) {
    const auto lu = static_cast<std::size_t>(l - 1);
    const double saliency =
        (g.dz[lu].array().abs() * trace.post_act[lu].array()).sum();

    double r = 1.0;
    const double width = static_cast<double>(copy.hidden_sizes()[lu]);
    if (cfg.recalibration == Recalibration::Both ||
        cfg.recalibration == Recalibration::WidthOnly)
      r *= width;
    if (cfg.recalibration == Recalibration::Both ||
        cfg.recalibration == Recalibration::DepthOnly) {
      bool deg = false;
      r /= trajectory_length(copy, l, cfg.trajectory_segments, &deg);
      any_degenerate = any_degenerate || deg;
    }

    const double term = r * saliency;
    if (!std::isfinite(term))
      throw std::runtime_error(
          "score_expressflow: non-finite contribution at hidden layer " +
          std::to_string(l) + " (saliency=" + std::to_string(saliency) +
          ", weight=" + std::to_string(r) + ")");
    total += term;
  }
  return finish(ProxyKind::ExpressFlow, cfg, timer, total, any_degenerate);
}

ProxyScore score_proxy(ProxyKind kind, const MlpModel& m, const DataBatch& batch,
                       const ScoreConfig& cfg) {
  cfg.validate();
  const ScoreTimer timer;
  switch (kind) {
    case ProxyKind::ExpressFlow:
      return score_expressflow(m, &batch, cfg);
    case ProxyKind::SynFlow:
      return finish(kind, cfg, timer, score_synflow(m));
    case ProxyKind::Snip: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      return finish(kind, cfg, timer, score_snip(m, use));
    }
    case ProxyKind::GradNorm: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      return finish(kind, cfg, timer, score_gradnorm(m, use));
    }
    case ProxyKind::Fisher: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      return finish(kind, cfg, timer, score_fisher(m, use));
    }
    case ProxyKind::Naswot: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      const auto [value, degenerate] = score_naswot(m, use);
      return finish(kind, cfg, timer, value, degenerate);
    }
    case ProxyKind::Grasp: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      return finish(kind, cfg, timer, score_grasp(m, use));
    }
    case ProxyKind::NtkTrace: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      return finish(kind, cfg, timer, score_ntk_trace(m, use));
    }
    case ProxyKind::NtkCond: {
      const DataBatch use = take_rows(require_batch(batch, kind), cfg.batch_size);
      const auto [value, degenerate] = score_ntk_cond(m, use);
      return finish(kind, cfg, timer, value, degenerate);
    }
    case ProxyKind::WeightNorm:
      return finish(kind, cfg, timer, score_weightnorm(m));
  }
  throw std::logic_error("score_proxy: unhandled kind");
}

bool proxy_needs_data(ProxyKind kind, const ScoreConfig& cfg) {
  switch (kind) {
    case ProxyKind::SynFlow:
    case ProxyKind::WeightNorm:
      return false;
    case ProxyKind::ExpressFlow:
      return cfg.data_mode == DataMode::RealBatch;
    default:
      return true;
  }
}

SaliencyIdentityReport saliency_identity_check(const MlpModel& m) {
  MlpModel copy = m.clone_parameters();
  copy.make_weights_positive();
  for (auto& b : copy.biases()) b.setZero();

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, copy.input_dim());
  const ForwardTrace trace = forward(copy, ones, BnMode::Bypass);
  const GradientSet g = backward(copy, trace, LossKind::SumOutput, nullptr, true);

  auto rel_dev = [](double a, double b) {
    const double scale = std::max(std::max(std::abs(a), std::abs(b)), 1e-12);
    return std::abs(a - b) / scale;
  };

  SaliencyIdentityReport report;
  for (int l = 0; l < copy.num_hidden_layers(); ++l) {
    const auto lu = static_cast<std::size_t>(l);
    const int width = copy.hidden_sizes()[lu];
    for (int n = 0; n < width; ++n) {
      const double nu = std::abs(g.dz[lu](0, n)) * trace.post_act[lu](0, n);
      // Outgoing: neuron n feeds column n of the next linear layer.
      const double outgoing =
          std::abs(g.dW[lu + 1].col(n).dot(copy.weights()[lu + 1].col(n)));
      // Incoming: row n of this layer's weights.
      const double incoming =
          std::abs(g.dW[lu].row(n).dot(copy.weights()[lu].row(n)));
      const double dev = std::max(rel_dev(nu, outgoing), rel_dev(nu, incoming));
      ++report.neurons_checked;
      if (dev > report.max_rel_deviation) {
        report.max_rel_deviation = dev;
        report.worst_layer = l + 1;
        report.worst_neuron = n;
      }
    }
  }
  return report;
}

}  // namespace atlas
