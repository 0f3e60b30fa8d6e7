// include/prunekit/pruning.h

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


#ifndef PRUNEKIT_PRUNING_H_
#define PRUNEKIT_PRUNING_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunekit/nn.h"
#include "prunekit/saliency.h"

namespace prunekit {

/// Which part of a layer's saliency ranking is removed. kBoth is hypo+hyper.
enum class Band { kHypo, kHyper, kMid, kBoth };

std::string ToString(Band b);
Band BandFromString(const std::string &s);

/// One planned layer. Only the percentages the band uses are read:
/// hypo_pct for kHypo, hyper_pct for kHyper, both for kBoth, mid_pct for kMid.
struct LayerPrune {
  std::size_t layer = 0;
  SaliencyMethod method = SaliencyMethod::kMi;
  Band band = Band::kHypo;
  double hypo_pct = 0.0;
  double hyper_pct = 0.0;
  double mid_pct = 0.0;
};

struct PrunePlan {
  std::vector<LayerPrune> layers;

  /// Hyper+hypo pruning of the given hidden layers: 8% hypo and 4% hyper per
  /// layer, except the pre-final hidden layer which gets 2% + 2%.
  static PrunePlan HyperHypo(SaliencyMethod method, std::span<const std::size_t> layers,
                             std::size_t num_hidden);
  /// Same band and percentages on every listed layer.
  static PrunePlan Uniform(SaliencyMethod method, Band band, double pct,
                           std::span<const std::size_t> layers);
};

struct LayerProvenance {
  LayerPrune source;
  std::size_t pruned = 0;
  std::size_t width = 0;
};

/// Per-layer keep vectors for every layer of a network (the output layer is
/// always fully kept) plus how each planned layer was derived.
struct PruneMask {
  std::vector<std::vector<bool>> keep;
  std::vector<LayerProvenance> provenance;

  static PruneMask AllKept(const Network &net);
  std::size_t pruned_in(std::size_t layer) const;
  std::size_t total_pruned() const;
  /// Pruned neurons as a fraction of all hidden neurons, in percent.
  double hidden_percent() const;
  bool all_kept() const { return total_pruned() == 0; }
  void CheckShape(const Network &net) const;
};

nlohmann::json MaskToJson(const PruneMask &mask);
PruneMask MaskFromJson(const nlohmann::json &j);

/// Neurons a single planned layer removes, taken from its report's ranking.
std::vector<std::size_t> SelectPruned(const SaliencyReport &report, const LayerPrune &entry);

/// One report per (layer, method) named by the plan is required.
PruneMask BuildMask(const Network &net, std::span<const SaliencyReport> reports,
                    const PrunePlan &plan);

/// Gates pruned neurons to zero output; parameters stay in place.
Network ApplyMask(Network net, const PruneMask &mask);

/// Removes pruned neurons: their rows in the layer and the matching columns
/// of the next layer.
Network StructuralPrune(const Network &net, const PruneMask &mask);

}  // namespace prunekit

#endif  // PRUNEKIT_PRUNING_H_
