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

#include "atlas/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "atlas/rng.hpp"

namespace atlas {

namespace {

using json = nlohmann::json;

double init_std(InitMode mode, int fan_in, int fan_out) {
  switch (mode) {
    case InitMode::LeCun:
      return std::sqrt(1.0 / fan_in);
    case InitMode::Xavier:
      return std::sqrt(2.0 / (fan_in + fan_out));
    case InitMode::He:
      return std::sqrt(2.0 / fan_in);
  }
  throw std::logic_error("unknown InitMode");
}

std::vector<double> json_doubles(const Eigen::MatrixXd& m) {
  return {m.data(), m.data() + m.size()};
}

}  // namespace

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::LeCun: return "lecun";
    case InitMode::Xavier: return "xavier";
    case InitMode::He: return "he";
  }
  return "?";
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "lecun") return InitMode::LeCun;
  if (s == "xavier") return InitMode::Xavier;
  if (s == "he") return InitMode::He;
  throw std::invalid_argument("unknown init mode: " + s);
}

MlpModel::MlpModel(std::vector<int> hidden_sizes, int input_dim, InitMode init,
                   std::uint64_t seed)
    : hidden_sizes_(std::move(hidden_sizes)), input_dim_(input_dim) {
  if (input_dim_ < 1) throw std::invalid_argument("MlpModel: input_dim must be >= 1");
  for (int h : hidden_sizes_)
    if (h < 1) throw std::invalid_argument("MlpModel: zero layer size");

  Rng rng(derive_seed(seed, 0x696E6974ULL));
  std::vector<int> sizes;
  sizes.push_back(input_dim_);
  sizes.insert(sizes.end(), hidden_sizes_.begin(), hidden_sizes_.end());
  sizes.push_back(1);

  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double sd = init_std(init, fan_in, fan_out);
    Eigen::MatrixXd W(fan_out, fan_in);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = sd * rng.normal();
    W_.push_back(std::move(W));
    b_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  for (int h : hidden_sizes_) {
    gamma_.push_back(Eigen::VectorXd::Ones(h));
    beta_.push_back(Eigen::VectorXd::Zero(h));
  }
}

long MlpModel::param_count() const {
  long count = 0;
  for (const auto& W : W_) count += static_cast<long>(W.size());
  for (const auto& b : b_) count += static_cast<long>(b.size());
  for (const auto& g : gamma_) count += static_cast<long>(g.size());
  for (const auto& bt : beta_) count += static_cast<long>(bt.size());
  return count;
}

MlpModel MlpModel::clone_parameters() const {
  MlpModel copy;
  copy.hidden_sizes_ = hidden_sizes_;
  copy.input_dim_ = input_dim_;
  copy.W_ = W_;
  copy.b_ = b_;
  copy.gamma_ = gamma_;
  copy.beta_ = beta_;
  copy.bn_eps_ = bn_eps_;
  return copy;
}

void MlpModel::make_weights_positive() {
  for (auto& W : W_) W = W.cwiseAbs();
}

Eigen::VectorXd MlpModel::flatten_parameters() const {
  Eigen::VectorXd theta(param_count());
  Eigen::Index at = 0;
  auto put = [&](const double* data, Eigen::Index n) {
    theta.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(data, n);
    at += n;
  };
  const auto L = static_cast<std::size_t>(num_hidden_layers());
  for (std::size_t l = 0; l < L; ++l) {
    put(W_[l].data(), W_[l].size());
    put(b_[l].data(), b_[l].size());
    put(gamma_[l].data(), gamma_[l].size());
    put(beta_[l].data(), beta_[l].size());
  }
  put(W_[L].data(), W_[L].size());
  put(b_[L].data(), b_[L].size());
  return theta;
}

void MlpModel::unflatten_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != param_count())
    throw std::invalid_argument("unflatten_parameters: size mismatch");
  Eigen::Index at = 0;
  auto get = [&](double* data, Eigen::Index n) {
    Eigen::Map<Eigen::VectorXd>(data, n) = theta.segment(at, n);
    at += n;
  };
  const auto L = static_cast<std::size_t>(num_hidden_layers());
  for (std::size_t l = 0; l < L; ++l) {
    get(W_[l].data(), W_[l].size());
    get(b_[l].data(), b_[l].size());
    get(gamma_[l].data(), gamma_[l].size());
    get(beta_[l].data(), beta_[l].size());
  }
  get(W_[L].data(), W_[L].size());
  get(b_[L].data(), b_[L].size());
}

std::string MlpModel::to_checkpoint_json() const {
  json j;
  j["format"] = "atlas-mlp-checkpoint-v1";
  j["input_dim"] = input_dim_;
  j["hidden_sizes"] = hidden_sizes_;
  j["bn_eps"] = bn_eps_;
  // Matrices are serialized column-major, matching Eigen storage.
  json weights = json::array(), biases = json::array();
  for (const auto& W : W_) weights.push_back(json_doubles(W));
  for (const auto& b : b_) biases.push_back(json_doubles(b));
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  json gam = json::array(), bet = json::array();
  for (const auto& g : gamma_) gam.push_back(json_doubles(g));
  for (const auto& bt : beta_) bet.push_back(json_doubles(bt));
  j["bn_gamma"] = std::move(gam);
  j["bn_beta"] = std::move(bet);
  return j.dump();
}

MlpModel MlpModel::from_checkpoint_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  if (j.at("format") != "atlas-mlp-checkpoint-v1")
    throw std::runtime_error("checkpoint: unknown format");
  MlpModel m(j.at("hidden_sizes").get<std::vector<int>>(),
             j.at("input_dim").get<int>(), InitMode::He, 0);
  m.bn_eps_ = j.at("bn_eps").get<double>();
  auto load = [](Eigen::MatrixXd& dst, const json& arr) {
    if (static_cast<Eigen::Index>(arr.size()) != dst.size())
      throw std::runtime_error("checkpoint: array size mismatch");
    for (Eigen::Index i = 0; i < dst.size(); ++i) dst.data()[i] = arr[static_cast<std::size_t>(i)].get<double>();
  };
  auto load_vec = [](Eigen::VectorXd& dst, const json& arr) {
    if (static_cast<Eigen::Index>(arr.size()) != dst.size())
      throw std::runtime_error("checkpoint: array size mismatch");
    for (Eigen::Index i = 0; i < dst.size(); ++i) dst(i) = arr[static_cast<std::size_t>(i)].get<double>();
  };
  const auto& jw = j.at("weights");
  const auto& jb = j.at("biases");
  for (std::size_t l = 0; l < m.W_.size(); ++l) load(m.W_[l], jw.at(l));
  for (std::size_t l = 0; l < m.b_.size(); ++l) load_vec(m.b_[l], jb.at(l));
  const auto& jg = j.at("bn_gamma");
  const auto& jbt = j.at("bn_beta");
  for (std::size_t l = 0; l < m.gamma_.size(); ++l) load_vec(m.gamma_[l], jg.at(l));
  for (std::size_t l = 0; l < m.beta_.size(); ++l) load_vec(m.beta_[l], jbt.at(l));
  return m;
}

ForwardTrace forward(const MlpModel& m, const Eigen::MatrixXd& x, BnMode bn_mode) {
  if (x.cols() != m.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " columns, model expects " + std::to_string(m.input_dim()));
  if (bn_mode == BnMode::BatchStats && x.rows() < 2 && m.num_hidden_layers() > 0)
    throw std::invalid_argument("forward: batch-stats BN needs B >= 2");

  ForwardTrace t;
  t.bn_mode = bn_mode;
  t.input = x;
  const int L = m.num_hidden_layers();
  t.pre_act.reserve(static_cast<std::size_t>(L));
  t.bn_out.reserve(static_cast<std::size_t>(L));
  t.post_act.reserve(static_cast<std::size_t>(L));

  Eigen::MatrixXd cur = x;
  for (int l = 0; l < L; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    Eigen::MatrixXd h = cur * m.weights()[lu].transpose();
    h.rowwise() += m.biases()[lu].transpose();
    t.pre_act.push_back(h);

    Eigen::MatrixXd bn;
    if (bn_mode == BnMode::BatchStats) {
      const Eigen::VectorXd mean = h.colwise().mean();
      Eigen::VectorXd var(h.cols());
      for (Eigen::Index c = 0; c < h.cols(); ++c)
        var(c) = (h.col(c).array() - mean(c)).square().mean();
      t.bn_mean.push_back(mean);
      t.bn_var.push_back(var);
      bn.resize(h.rows(), h.cols());
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        const double inv = 1.0 / std::sqrt(var(c) + m.bn_eps());
        bn.col(c) = m.bn_gamma()[lu](c) * ((h.col(c).array() - mean(c)) * inv) +
                    m.bn_beta()[lu](c);
      }
    } else {
      bn = h;
    }
    t.bn_out.push_back(bn);
    t.post_act.push_back(bn.cwiseMax(0.0));
    cur = t.post_act.back();
  }

  const auto Lout = static_cast<std::size_t>(L);
  t.output = cur * m.weights()[Lout].transpose();
  t.output.rowwise() += m.biases()[Lout].transpose();
  return t;
}

GradientSet backward_from_output(const MlpModel& m, const ForwardTrace& trace,
                                 const Eigen::MatrixXd& doutput,
                                 bool want_activation_grads) {
  const int L = m.num_hidden_layers();
  const auto Lout = static_cast<std::size_t>(L);
  if (doutput.rows() != trace.output.rows() || doutput.cols() != 1)
    throw std::invalid_argument("backward: doutput shape mismatch");

  GradientSet g;
  g.dW.resize(Lout + 1);
  g.db.resize(Lout + 1);
  g.dgamma.resize(Lout);
  g.dbeta.resize(Lout);
  if (want_activation_grads) g.dz.resize(Lout);
  g.doutput = doutput;

  const Eigen::MatrixXd& last_act = L > 0 ? trace.post_act.back() : trace.input;
  g.dW[Lout] = doutput.transpose() * last_act;
  g.db[Lout] = doutput.colwise().sum().transpose();
  Eigen::MatrixXd dz = doutput * m.weights()[Lout];

  for (int l = L - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    if (want_activation_grads) g.dz[lu] = dz;

    // ReLU: pass gradient where the pre-ReLU value is strictly positive.
    Eigen::MatrixXd dbn =
        (trace.bn_out[lu].array() > 0.0).select(dz, Eigen::MatrixXd::Zero(dz.rows(), dz.cols()));

    Eigen::MatrixXd dh;
    if (trace.bn_mode == BnMode::BatchStats) {
      const auto B = static_cast<double>(dbn.rows());
      dh.resize(dbn.rows(), dbn.cols());
      g.dgamma[lu].resize(dbn.cols());
      g.dbeta[lu].resize(dbn.cols());
      for (Eigen::Index c = 0; c < dbn.cols(); ++c) {
        const double inv = 1.0 / std::sqrt(trace.bn_var[lu](c) + m.bn_eps());
        const Eigen::ArrayXd xhat =
            (trace.pre_act[lu].col(c).array() - trace.bn_mean[lu](c)) * inv;
        const Eigen::ArrayXd dout = dbn.col(c).array();
        g.dgamma[lu](c) = (dout * xhat).sum();
        g.dbeta[lu](c) = dout.sum();
        const Eigen::ArrayXd dxhat = dout * m.bn_gamma()[lu](c);
        dh.col(c) =
            (inv / B) * (B * dxhat - dxhat.sum() - xhat * (dxhat * xhat).sum());
      }
    } else {
      dh = dbn;
      g.dgamma[lu] = Eigen::VectorXd::Zero(dbn.cols());
      g.dbeta[lu] = Eigen::VectorXd::Zero(dbn.cols());
    }

    const Eigen::MatrixXd& below = l > 0 ? trace.post_act[lu - 1] : trace.input;
    g.dW[lu] = dh.transpose() * below;
    g.db[lu] = dh.colwise().sum().transpose();
    dz = dh * m.weights()[lu];
  }
  return g;
}

GradientSet backward(const MlpModel& m, const ForwardTrace& trace, LossKind loss,
                     const std::vector<int>* labels, bool want_activation_grads) {
  const Eigen::Index B = trace.output.rows();
  Eigen::MatrixXd doutput(B, 1);
  switch (loss) {
    case LossKind::Bce: {
      if (labels == nullptr || static_cast<Eigen::Index>(labels->size()) != B)
        throw std::invalid_argument("backward: BCE loss requires labels");
      for (Eigen::Index i = 0; i < B; ++i) {
        const double z = trace.output(i, 0);
        const double p = 1.0 / (1.0 + std::exp(-z));
        doutput(i, 0) = (p - (*labels)[static_cast<std::size_t>(i)]) / static_cast<double>(B);
      }
      break;
    }
    case LossKind::SumOutput:
      doutput.setOnes();
      break;
  }
  return backward_from_output(m, trace, doutput, want_activation_grads);
}

Eigen::VectorXd GradientSet::flatten(const MlpModel& m) const {
  Eigen::VectorXd out(m.param_count());
  Eigen::Index at = 0;
  auto put = [&](const Eigen::MatrixXd& mat) {
    out.segment(at, mat.size()) = Eigen::Map<const Eigen::VectorXd>(mat.data(), mat.size());
    at += mat.size();
  };
  auto put_vec = [&](const Eigen::VectorXd& v) {
    out.segment(at, v.size()) = v;
    at += v.size();
  };
  const auto L = static_cast<std::size_t>(m.num_hidden_layers());
  for (std::size_t l = 0; l < L; ++l) {
    put(dW[l]);
    put_vec(db[l]);
    put_vec(dgamma[l]);
    put_vec(dbeta[l]);
  }
  put(dW[L]);
  put_vec(db[L]);
  return out;
}

double bce_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw std::invalid_argument("bce_loss: size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double z = logits(i, 0);
    const double y = labels[static_cast<std::size_t>(i)];
    // log(1 + e^z) - y z, evaluated stably.
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
  }
  return total / static_cast<double>(logits.rows());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: both classes must be present");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mid-rank assignment over tie groups.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]] == 1) pos_rank_sum += mid_rank;
    i = j + 1;
  }
  const double u = pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

void adam_init(MlpModel::AdamState& s, const MlpModel& m) {
  auto zeros_like_mats = [](const std::vector<Eigen::MatrixXd>& src) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(src.size());
    for (const auto& x : src) out.push_back(Eigen::MatrixXd::Zero(x.rows(), x.cols()));
    return out;
  };
  auto zeros_like_vecs = [](const std::vector<Eigen::VectorXd>& src) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(src.size());
    for (const auto& x : src) out.push_back(Eigen::VectorXd::Zero(x.size()));
    return out;
  };
  s.mW = zeros_like_mats(m.weights());
  s.vW = zeros_like_mats(m.weights());
  s.mb = zeros_like_vecs(m.biases());
  s.vb = zeros_like_vecs(m.biases());
  s.mgamma = zeros_like_vecs(m.bn_gamma());
  s.vgamma = zeros_like_vecs(m.bn_gamma());
  s.mbeta = zeros_like_vecs(m.bn_beta());
  s.vbeta = zeros_like_vecs(m.bn_beta());
  s.step = 0;
  s.initialized = true;
}

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_step(MlpModel& m, const GradientSet& g, double lr) {
  auto& s = m.adam_state();
  if (!s.initialized) adam_init(s, m);
  s.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(s.step));

  auto update = [&](auto& param, auto& mm, auto& vv, const auto& grad) {
    mm = kAdamBeta1 * mm + (1.0 - kAdamBeta1) * grad;
    vv = kAdamBeta2 * vv + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    param.array() -=
        lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + kAdamEps);
  };

  const auto L = static_cast<std::size_t>(m.num_hidden_layers());
  for (std::size_t l = 0; l <= L; ++l) {
    update(m.weights()[l], s.mW[l], s.vW[l], g.dW[l]);
    update(m.biases()[l], s.mb[l], s.vb[l], g.db[l]);
  }
  for (std::size_t l = 0; l < L; ++l) {
    update(m.bn_gamma()[l], s.mgamma[l], s.vgamma[l], g.dgamma[l]);
    update(m.bn_beta()[l], s.mbeta[l], s.vbeta[l], g.dbeta[l]);
  }
}

std::pair<double, double> evaluate_split(const MlpModel& m, const Dataset& ds) {
  const ForwardTrace t = forward(m, ds.features, BnMode::BatchStats);
  const double loss = bce_loss(t.output, ds.labels);
  std::vector<double> scores(t.output.data(), t.output.data() + t.output.rows());
  return {loss, auc(scores, ds.labels)};
}

}  // namespace

std::vector<EpochStats> train_epochs(MlpModel& m, const Dataset& train,
                                     const Dataset& val, const TrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("train_epochs: epochs must be >= 1");
  const int horizon = opts.horizon > 0 ? opts.horizon : opts.epochs;
  if (opts.start_epoch + opts.epochs > horizon)
    throw std::invalid_argument("train_epochs: epochs exceed schedule horizon");

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(opts.epochs));

  for (int e = 0; e < opts.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const int global_epoch = opts.start_epoch + e;
    const double lr =
        opts.lr * 0.5 *
        (1.0 + std::cos(std::numbers::pi * static_cast<double>(global_epoch) /
                        static_cast<double>(horizon)));

    BatchIterator it =
        batches(train, opts.batch_size,
                derive_seed(opts.seed, static_cast<std::uint64_t>(global_epoch)), true);
    int batch_no = 0;
    while (auto b = it.next()) {
      ++batch_no;
      // A trailing single-row batch cannot use batch statistics.
      const BnMode mode = b->x.rows() >= 2 ? BnMode::BatchStats : BnMode::Bypass;
      const ForwardTrace trace = forward(m, b->x, mode);
      const double loss = bce_loss(trace.output, b->y);
      if (!std::isfinite(loss))
        throw TrainingDiverged("train_epochs: non-finite loss at epoch " +
                               std::to_string(global_epoch) + ", batch " +
                               std::to_string(batch_no));
      const GradientSet g = backward(m, trace, LossKind::Bce, &b->y);
      adam_step(m, g, lr);
    }

    EpochStats stats;
    std::tie(stats.train_loss, stats.train_auc) = evaluate_split(m, train);
    std::tie(stats.val_loss, stats.val_auc) = evaluate_split(m, val);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
      throw TrainingDiverged("train_epochs: non-finite loss after epoch " +
                             std::to_string(global_epoch));
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(stats);
  }
  return history;
}

}  // namespace atlas
