// include/prunekit/saliency.h

// Copyright 2026 The prunekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef PRUNEKIT_SALIENCY_H_
#define PRUNEKIT_SALIENCY_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "prunekit/corpus.h"
#include "prunekit/nn.h"

namespace prunekit {

enum class SaliencyMethod { kMbp, kObs, kMi };

std::string ToString(SaliencyMethod m);
/// Accepts "mbp"/"obs"/"mi" in any case.
SaliencyMethod SaliencyMethodFromString(const std::string &s);

/// Per-neuron scores of one hidden layer and the neuron indices sorted by
/// ascending score (ties go to the lower index).
struct SaliencyReport {
  std::size_t layer = 0;
  SaliencyMethod method = SaliencyMethod::kMbp;
  std::vector<double> scores;
  std::vector<std::size_t> ranking;

  std::size_t width() const { return scores.size(); }
  void Validate() const;
};

SaliencyReport MakeReport(std::size_t layer, SaliencyMethod method, std::vector<double> scores);
std::vector<std::size_t> RankAscending(std::span<const double> scores);

nlohmann::json ReportToJson(const SaliencyReport &r);
SaliencyReport ReportFromJson(const nlohmann::json &j);

/// Weight power: squared incoming weights plus squared bias, per neuron.
SaliencyReport MbpSaliency(const Network &net, std::size_t layer);

/// Diagonal of the Gauss-Newton approximation to the Hessian of the mean
/// loss for one layer's weights and biases. The output-space curvature is
/// diag(p) - p p^T for a softmax output (w.r.t. logits) and the identity
/// for any other output (half squared error against one-hot targets).
struct LayerCurvature {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};
LayerCurvature GaussNewtonDiagonal(const Network &net, std::size_t layer,
                                   const Eigen::MatrixXd &frames);

/// Brain-damage saliency of one parameter with weight w and curvature h.
inline double SecondOrderSaliency(double w, double h) { return 0.5 * w * w * h; }

/// Sum over a neuron's incoming weights and bias of w^2 * H_qq / 2.
SaliencyReport ObsSaliency(const Network &net, std::size_t layer, const FrameCorpus &calib);

struct MIConfig {
  int window_q = 10;
  /// 0 disables the cap.
  std::size_t max_frames = 0;
  void Validate() const;
};

/// Mean absolute cumulative cross-correlation between each neuron's output
/// and all of its inputs over a window of q frames,
///   r_n[t] = 1/N sum_p | sum_{k=-(q/2-1)}^{q/2} x_n[t] x_p[t+k] |,
/// averaged over every t whose window fits inside its segment.
/// `inputs` is T x N, `outputs` is T x width.
std::vector<double> CrossCorrelationScores(const Eigen::MatrixXd &inputs,
                                           const Eigen::MatrixXd &outputs,
                                           std::span<const Segment> segments, int window_q);

SaliencyReport MiSaliency(const Network &net, std::size_t layer, const FrameCorpus &calib,
                          const MIConfig &cfg);

SaliencyReport ComputeSaliency(SaliencyMethod method, const Network &net, std::size_t layer,
                               const FrameCorpus &calib, const MIConfig &mi = {});

/// round-half-up of pct% of width.
std::size_t PercentToCount(double pct, std::size_t width);

struct Bands {
  std::vector<std::size_t> hypo;
  std::vector<std::size_t> mid;
  std::vector<std::size_t> hyper;
};

/// Lowest-ranked hypo_pct% are hypo, highest-ranked hyper_pct% are hyper,
/// the rest mid. Each band lists neurons in ranking order.
Bands BandSelect(const SaliencyReport &report, double hypo_pct, double hyper_pct);

/// The round(pct% * width) neurons at the centre of the ranking.
std::vector<std::size_t> CentralBand(const SaliencyReport &report, double pct);

}  // namespace prunekit

#endif  // PRUNEKIT_SALIENCY_H_
