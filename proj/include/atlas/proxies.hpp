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

#ifndef ATLAS_PROXIES_HPP_
#define ATLAS_PROXIES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "atlas/dataset.hpp"
#include "atlas/mlp.hpp"

namespace atlas {

/// Training-free architecture scores. Each maps (model at initialization,
/// batch, config) to one scalar whose ranking across architectures is the
/// point; absolute values are not comparable across kinds.
enum class ProxyKind {
  ExpressFlow,
  SynFlow,
  Snip,
  GradNorm,
  Fisher,
  Naswot,
  Grasp,
  NtkTrace,
  NtkCond,
  WeightNorm,
};

std::string to_string(ProxyKind kind);
ProxyKind proxy_kind_from_string(const std::string& s);
const std::vector<ProxyKind>& all_proxy_kinds();

enum class DataMode { AllOnes, RealBatch };
enum class Recalibration { Both, WidthOnly, DepthOnly, None };

std::string to_string(DataMode mode);
std::string to_string(Recalibration r);
DataMode data_mode_from_string(const std::string& s);
Recalibration recalibration_from_string(const std::string& s);

struct ScoreConfig {
  int batch_size = 4;
  InitMode init = InitMode::He;
  /// Replace every weight by its absolute value before scoring
  /// (ExpressFlow; SynFlow does this unconditionally).
  bool positivity = true;
  DataMode data_mode = DataMode::AllOnes;
  Recalibration recalibration = Recalibration::Both;
  int trajectory_segments = 16;
  std::uint64_t seed = 0;
  /// Ablation: ExpressFlow on a real batch with BCE instead of the
  /// default sum-output loss.
  bool bce_variant = false;

  void validate() const;
  std::string fingerprint() const;
};

struct ProxyScore {
  double value = 0.0;
  ProxyKind kind = ProxyKind::ExpressFlow;
  std::string config_fingerprint;
  double wall_time_s = 0.0;
  /// Set when the score is a sentinel: -inf for a singular activation
  /// kernel, +inf for a numerically singular tangent-kernel Gram matrix,
  /// or a floored trajectory length.
  bool degenerate = false;
};

/// Arc length of layer `layer`'s (1-based) post-activation image of the
/// straight input segment from the origin to the all-ones vector,
/// discretized with `segments` pieces and evaluated with BN bypassed.
/// An all-zero image returns the 1e-12 floor and sets *degenerate.
double trajectory_length(const MlpModel& m, int layer, int segments,
                         bool* degenerate = nullptr);

/// Weighted neuron-saliency score. Per neuron and sample,
/// nu = |dL/dz| * z on post-activations under a sum-of-outputs loss; per
/// layer the saliencies are aggregated with weight r_l built from the
/// layer width K_l and trajectory length l(z^l) per cfg.recalibration.
/// data_mode=all-ones scores a single all-ones row with BN bypassed;
/// real-batch scores `batch` (first cfg.batch_size rows) with batch
/// statistics. The input model is never mutated.
ProxyScore score_expressflow(const MlpModel& m, const DataBatch* batch,
                             const ScoreConfig& cfg);

/// Dispatch over every ProxyKind. Kinds that need labeled data (SNIP,
/// GradNorm, Fisher, GraSP, NASWOT, NTKTrace, NTKCond) read `batch`;
/// SynFlow and default-config ExpressFlow ignore it and may receive an
/// empty batch.
ProxyScore score_proxy(ProxyKind kind, const MlpModel& m, const DataBatch& batch,
                       const ScoreConfig& cfg);

/// Whether score_proxy(kind, ...) under `cfg` reads the data batch.
bool proxy_needs_data(ProxyKind kind, const ScoreConfig& cfg);

/// Verifies, neuron by neuron, that the saliency nu equals both the
/// absolute outgoing and incoming per-neuron synaptic-saliency sums on a
/// bias-free positive-weight rewrite of `m` (all-ones input, BN
/// bypassed, sum-output loss).
struct SaliencyIdentityReport {
  double max_rel_deviation = 0.0;
  int worst_layer = -1;   // 1-based hidden layer of the worst neuron
  int worst_neuron = -1;  // 0-based index within that layer
  int neurons_checked = 0;
};

SaliencyIdentityReport saliency_identity_check(const MlpModel& m);

}  // namespace atlas

#endif  // ATLAS_PROXIES_HPP_
