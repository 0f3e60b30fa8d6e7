// src/pruning.cc

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


#include "prunekit/pruning.h"

#include <algorithm>

#include "prunekit/error.h"

namespace prunekit {

std::string ToString(Band b) {
  switch (b) {
    case Band::kHypo: return "hypo";
    case Band::kHyper: return "hyper";
    case Band::kMid: return "mid";
    case Band::kBoth: return "both";
  }
  return "?";
}

Band BandFromString(const std::string &s) {
  if (s == "hypo") return Band::kHypo;
  if (s == "hyper") return Band::kHyper;
  if (s == "mid") return Band::kMid;
  if (s == "both" || s == "hypo+hyper") return Band::kBoth;
  throw InvalidInput("unknown band '" + s + "'");
}

PrunePlan PrunePlan::HyperHypo(SaliencyMethod method, std::span<const std::size_t> layers,
                               std::size_t num_hidden) {
  PrunePlan plan;
  for (std::size_t l : layers) {
    const bool prefinal = num_hidden > 0 && l + 1 == num_hidden;
    plan.layers.push_back({l, method, Band::kBoth, prefinal ? 2.0 : 8.0, prefinal ? 2.0 : 4.0, 0.0});
  }
  return plan;
}

PrunePlan PrunePlan::Uniform(SaliencyMethod method, Band band, double pct,
                             std::span<const std::size_t> layers) {
  PrunePlan plan;
  for (std::size_t l : layers) {
    LayerPrune e{l, method, band, 0.0, 0.0, 0.0};
    switch (band) {
      case Band::kHypo: e.hypo_pct = pct; break;
      case Band::kHyper: e.hyper_pct = pct; break;
      case Band::kMid: e.mid_pct = pct; break;
      case Band::kBoth: e.hypo_pct = e.hyper_pct = pct; break;
    }
    plan.layers.push_back(e);
  }
  return plan;
}

PruneMask PruneMask::AllKept(const Network &net) {
  PruneMask m;
  for (const DenseLayer &l : net.layers()) m.keep.emplace_back(l.out_width(), true);
  return m;
}

std::size_t PruneMask::pruned_in(std::size_t layer) const {
  const auto &k = keep.at(layer);
  return static_cast<std::size_t>(std::count(k.begin(), k.end(), false));
}

std::size_t PruneMask::total_pruned() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) n += pruned_in(i);
  return n;
}

double PruneMask::hidden_percent() const {
  std::size_t hidden = 0;
  for (std::size_t i = 0; i + 1 < keep.size(); ++i) hidden += keep[i].size();
  return hidden == 0 ? 0.0 : 100.0 * static_cast<double>(total_pruned()) / static_cast<double>(hidden);
}

void PruneMask::CheckShape(const Network &net) const {
  if (keep.size() != net.num_layers()) throw InvalidInput("mask layer count does not match network");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i].size() != net.layer(i).out_width())
      throw InvalidInput("mask width mismatch at layer " + std::to_string(i));
    if (pruned_in(i) == keep[i].size())
      throw InvalidInput("mask removes every neuron of layer " + std::to_string(i));
  }
  if (pruned_in(keep.size() - 1) != 0) throw InvalidInput("mask prunes output neurons");
}

nlohmann::json MaskToJson(const PruneMask &mask) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < mask.keep.size(); ++i)
    layers.push_back({{"layer", i}, {"keep", mask.keep[i]}});
  nlohmann::json prov = nlohmann::json::array();
  for (const LayerProvenance &p : mask.provenance)
    prov.push_back({{"layer", p.source.layer},
                    {"method", ToString(p.source.method)},
                    {"band", ToString(p.source.band)},
                    {"hypo_pct", p.source.hypo_pct},
                    {"hyper_pct", p.source.hyper_pct},
                    {"mid_pct", p.source.mid_pct},
                    {"pruned", p.pruned},
                    {"width", p.width}});
  return {{"version", 1}, {"layers", layers}, {"provenance", prov},
          {"hidden_percent", mask.hidden_percent()}};
}

PruneMask MaskFromJson(const nlohmann::json &j) {
  try {
    PruneMask m;
    for (const auto &l : j.at("layers")) m.keep.push_back(l.at("keep").get<std::vector<bool>>());
    for (const auto &p : j.value("provenance", nlohmann::json::array())) {
      LayerProvenance lp;
      lp.source.layer = p.at("layer").get<std::size_t>();
      lp.source.method = SaliencyMethodFromString(p.at("method").get<std::string>());
      lp.source.band = BandFromString(p.at("band").get<std::string>());
      lp.source.hypo_pct = p.at("hypo_pct").get<double>();
      lp.source.hyper_pct = p.at("hyper_pct").get<double>();
      lp.source.mid_pct = p.at("mid_pct").get<double>();
      lp.pruned = p.at("pruned").get<std::size_t>();
      lp.width = p.at("width").get<std::size_t>();
      m.provenance.push_back(lp);
    }
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput(std::string("malformed mask: ") + e.what());
  }
}

std::vector<std::size_t> SelectPruned(const SaliencyReport &report, const LayerPrune &entry) {
  switch (entry.band) {
    case Band::kHypo:
      return BandSelect(report, entry.hypo_pct, 0.0).hypo;
    case Band::kHyper:
      return BandSelect(report, 0.0, entry.hyper_pct).hyper;
    case Band::kBoth: {
      Bands b = BandSelect(report, entry.hypo_pct, entry.hyper_pct);
      b.hypo.insert(b.hypo.end(), b.hyper.begin(), b.hyper.end());
      return b.hypo;
    }
    case Band::kMid:
      return CentralBand(report, entry.mid_pct);
  }
  return {};
}

PruneMask BuildMask(const Network &net, std::span<const SaliencyReport> reports,
                    const PrunePlan &plan) {
  PruneMask mask = PruneMask::AllKept(net);
  for (const LayerPrune &entry : plan.layers) {
    if (entry.layer >= net.num_hidden())
      throw InvalidInput("prune plan addresses layer " + std::to_string(entry.layer) +
                         ", which is not a hidden layer");
    const auto it = std::find_if(reports.begin(), reports.end(), [&](const SaliencyReport &r) {
      return r.layer == entry.layer && r.method == entry.method;
    });
    if (it == reports.end())
      throw InvalidInput("no " + ToString(entry.method) + " saliency report for layer " +
                         std::to_string(entry.layer));
    const std::size_t width = net.layer(entry.layer).out_width();
    if (it->width() != width) throw InvalidInput("saliency report width does not match the layer");
    const std::vector<std::size_t> pruned = SelectPruned(*it, entry);
    for (std::size_t n : pruned) mask.keep[entry.layer][n] = false;
    mask.provenance.push_back({entry, pruned.size(), width});
  }
  for (std::size_t i = 0; i < mask.keep.size(); ++i)
    if (mask.pruned_in(i) == mask.keep[i].size())
      throw InvalidInput("plan would prune every neuron of layer " + std::to_string(i));
  return mask;
}

Network ApplyMask(Network net, const PruneMask &mask) {
  mask.CheckShape(net);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    DenseLayer &l = net.mutable_layer(i);
    for (std::size_t n = 0; n < l.keep.size(); ++n) l.keep[n] = l.keep[n] && mask.keep[i][n];
    if (std::none_of(l.keep.begin(), l.keep.end(), [](bool k) { return k; }))
      throw InvalidInput("masking leaves layer " + std::to_string(i) + " without neurons");
  }
  return net;
}

Network StructuralPrune(const Network &net, const PruneMask &mask) {
  mask.CheckShape(net);
  std::vector<DenseLayer> layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (mask.pruned_in(i) == 0) continue;
    std::vector<Eigen::Index> kept;
    std::vector<bool> keep_flags;
    for (std::size_t n = 0; n < mask.keep[i].size(); ++n) {
      if (!mask.keep[i][n]) continue;
      kept.push_back(static_cast<Eigen::Index>(n));
      keep_flags.push_back(layers[i].keep[n]);
    }
    DenseLayer &cur = layers[i];
    Eigen::MatrixXd rows = cur.weights(kept, Eigen::all);
    Eigen::VectorXd biases = cur.biases(kept);
    cur.weights = std::move(rows);
    cur.biases = std::move(biases);
    cur.keep = std::move(keep_flags);
    DenseLayer &next = layers[i + 1];
    Eigen::MatrixXd cols = next.weights(Eigen::all, kept);
    next.weights = std::move(cols);
  }
  return Network(net.input_width(), std::move(layers));
}

}  // namespace prunekit
