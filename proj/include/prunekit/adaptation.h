// include/prunekit/adaptation.h

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


#ifndef PRUNEKIT_ADAPTATION_H_
#define PRUNEKIT_ADAPTATION_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunekit/corpus.h"
#include "prunekit/nn.h"
#include "prunekit/pruning.h"
#include "prunekit/saliency.h"

namespace prunekit {

/// A: blind update on pseudo-labelled adaptation data.
/// B: update only the hyper and hypo neurons.
/// C: blind update of a Model B result on adaptation plus original data.
/// D: blind update of the baseline on adaptation plus original data.
enum class AdaptVariant { kModelA, kModelB, kModelC, kModelD };

std::string ToString(AdaptVariant v);
/// Accepts "A".."D" and "ModelA".."ModelD", case-insensitive.
AdaptVariant AdaptVariantFromString(const std::string &s);

/// Per-layer flags of neurons whose incoming weights and bias may change.
/// One vector per layer, output layer included (always all false).
struct NeuronSelection {
  std::vector<std::vector<bool>> update;

  static NeuronSelection None(const Network &net);
  static NeuronSelection All(const Network &net);
  /// Neurons a prune mask would remove.
  static NeuronSelection FromPruneMask(const PruneMask &mask);

  std::size_t count() const;
  void CheckShape(const Network &net) const;
};

struct AdaptConfig {
  double l2 = 0.001;
  double initial_lr = 0.004;
  int max_epochs = 10;
  int batch_size = 64;
  /// Fraction of the original training segments blended into the stream.
  double data_mix = 0.0;
  unsigned long long seed = 0;
  /// Overrides the saliency-derived selection of Model B.
  std::optional<NeuronSelection> update_mask;

  void Validate() const;
};

/// Variant plus the saliency decision that picks Model B's neurons.
/// Layers are 0-based hidden-layer indices.
struct AdaptationPlan {
  AdaptVariant variant = AdaptVariant::kModelA;
  SaliencyMethod method = SaliencyMethod::kMi;
  std::vector<std::size_t> layers{0, 1};
  double hypo_pct = 8.0;
  double hyper_pct = 4.0;
  MIConfig mi;

  /// Data-mix fraction the variant uses by default (0 or 0.5).
  double default_mix() const;
};

struct AdaptEpoch {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
};

struct AdaptResult {
  AdaptVariant variant = AdaptVariant::kModelA;
  Network net;
  std::vector<AdaptEpoch> history;
  /// Neurons that were allowed to change (all of them for blind variants).
  std::size_t updated_neurons = 0;
  std::size_t stream_frames = 0;
};

nlohmann::json HistoryToJson(const AdaptResult &r);

/// Relabels with the model's argmax class; ties go to the lowest index.
FrameCorpus PseudoLabel(const Network &model, const FrameCorpus &unlabeled);

/// w -= lr * (g + l2 * w) and b -= lr * g_b for the selected neurons only.
/// `gradients` carries the data term alone. Everything else is left
/// bit-identical; an empty selection is a no-op and logs a warning.
Network SelectiveUpdateStep(Network net, const Gradients &gradients,
                            const NeuronSelection &selection, double lr, double l2);

/// Model B's neurons: the plan's hypo and hyper bands of its layers.
NeuronSelection SelectiveNeurons(const Network &baseline, const FrameCorpus &calibration,
                                 const AdaptationPlan &plan);

/// Runs one adaptation variant. Labels for the adaptation corpus come from
/// `baseline` and stay frozen. Model C continues from `predecessor`, which
/// must be a Model B result; every other variant starts from `baseline`.
/// Epoch e uses initial_lr / 2^(e-1).
AdaptResult Adapt(const Network &baseline, const FrameCorpus &adaptation,
                  const FrameCorpus &original, const AdaptationPlan &plan,
                  const AdaptConfig &cfg, const AdaptResult *predecessor = nullptr);

}  // namespace prunekit

#endif  // PRUNEKIT_ADAPTATION_H_
