// src/adaptation.cc

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


#include "prunekit/adaptation.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "prunekit/error.h"

namespace prunekit {

namespace {

// Keeps the mixing draw off the shuffle stream so that a zero mix leaves
// the update order untouched.
constexpr unsigned long long kMixSalt = 0xa5a5f00dULL;

bool IsBlind(AdaptVariant v) { return v != AdaptVariant::kModelB; }

}  // namespace

std::string ToString(AdaptVariant v) {
  switch (v) {
    case AdaptVariant::kModelA: return "ModelA";
    case AdaptVariant::kModelB: return "ModelB";
    case AdaptVariant::kModelC: return "ModelC";
    case AdaptVariant::kModelD: return "ModelD";
  }
  return "?";
}

AdaptVariant AdaptVariantFromString(const std::string &s) {
  std::string t;
  for (char c : s) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t.rfind("MODEL", 0) == 0) t = t.substr(5);
  if (t == "A") return AdaptVariant::kModelA;
  if (t == "B") return AdaptVariant::kModelB;
  if (t == "C") return AdaptVariant::kModelC;
  if (t == "D") return AdaptVariant::kModelD;
  throw InvalidInput("unknown adaptation variant '" + s + "'");
}

NeuronSelection NeuronSelection::None(const Network &net) {
  NeuronSelection s;
  for (const DenseLayer &l : net.layers()) s.update.emplace_back(l.out_width(), false);
  return s;
}

NeuronSelection NeuronSelection::All(const Network &net) {
  NeuronSelection s;
  for (const DenseLayer &l : net.layers()) s.update.emplace_back(l.out_width(), true);
  return s;
}

NeuronSelection NeuronSelection::FromPruneMask(const PruneMask &mask) {
  NeuronSelection s;
  for (const auto &keep : mask.keep) {
    std::vector<bool> u(keep.size());
    for (std::size_t n = 0; n < keep.size(); ++n) u[n] = !keep[n];
    s.update.push_back(std::move(u));
  }
  return s;
}

std::size_t NeuronSelection::count() const {
  std::size_t n = 0;
  for (const auto &u : update) n += static_cast<std::size_t>(std::count(u.begin(), u.end(), true));
  return n;
}

void NeuronSelection::CheckShape(const Network &net) const {
  if (update.size() != net.num_layers())
    throw InvalidInput("update mask has " + std::to_string(update.size()) +
                       " layers, network has " + std::to_string(net.num_layers()));
  for (std::size_t i = 0; i < update.size(); ++i)
    if (update[i].size() != net.layer(i).out_width())
      throw InvalidInput("update mask width mismatch in layer " + std::to_string(i));
}

void AdaptConfig::Validate() const {
  if (l2 < 0.0) throw InvalidInput("adapt: l2 must be non-negative");
  if (!(initial_lr > 0.0)) throw InvalidInput("adapt: initial_lr must be positive");
  if (max_epochs < 0) throw InvalidInput("adapt: max_epochs must be >= 0");
  if (batch_size < 1) throw InvalidInput("adapt: batch_size must be >= 1");
  if (!(data_mix >= 0.0 && data_mix <= 1.0)) throw InvalidInput("adapt: data_mix must lie in [0,1]");
}

double AdaptationPlan::default_mix() const {
  return variant == AdaptVariant::kModelC || variant == AdaptVariant::kModelD ? 0.5 : 0.0;
}

nlohmann::json HistoryToJson(const AdaptResult &r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const AdaptEpoch &e : r.history)
    epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss}});
  return {{"variant", ToString(r.variant)},
          {"updated_neurons", r.updated_neurons},
          {"stream_frames", r.stream_frames},
          {"epochs", epochs}};
}

FrameCorpus PseudoLabel(const Network &model, const FrameCorpus &unlabeled) {
  if (unlabeled.empty()) throw InvalidInput("pseudo_label: empty corpus");
  if (unlabeled.width() != model.input_width())
    throw InvalidInput("pseudo_label: corpus width " + std::to_string(unlabeled.width()) +
                       " does not match network input " + std::to_string(model.input_width()));
  return Relabel(unlabeled, ArgmaxRows(Predict(model, unlabeled.frames)));
}

Network SelectiveUpdateStep(Network net, const Gradients &gradients,
                            const NeuronSelection &selection, double lr, double l2) {
  if (!gradients.SameShape(net)) throw InvalidInput("selective_update_step: gradient shape mismatch");
  selection.CheckShape(net);
  if (selection.count() == 0) {
    std::clog << "warning: selective update with an empty selection is a no-op\n";
    return net;
  }
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    DenseLayer &l = net.mutable_layer(i);
    for (std::size_t n = 0; n < selection.update[i].size(); ++n) {
      if (!selection.update[i][n]) continue;
      const auto r = static_cast<Eigen::Index>(n);
      Eigen::RowVectorXd g = gradients.weights[i].row(r);
      if (l2 != 0.0) g += l2 * l.weights.row(r);
      l.weights.row(r) -= lr * g;
      l.biases(r) -= lr * gradients.biases[i](r);
    }
  }
  if (!net.AllFinite()) throw Divergence("selective_update_step produced a non-finite parameter");
  return net;
}

NeuronSelection SelectiveNeurons(const Network &baseline, const FrameCorpus &calibration,
                                 const AdaptationPlan &plan) {
  PrunePlan prune;
  std::vector<SaliencyReport> reports;
  for (std::size_t layer : plan.layers) {
    prune.layers.push_back({layer, plan.method, Band::kBoth, plan.hypo_pct, plan.hyper_pct, 0.0});
    reports.push_back(ComputeSaliency(plan.method, baseline, layer, calibration, plan.mi));
  }
  return NeuronSelection::FromPruneMask(BuildMask(baseline, reports, prune));
}

AdaptResult Adapt(const Network &baseline, const FrameCorpus &adaptation,
                  const FrameCorpus &original, const AdaptationPlan &plan,
                  const AdaptConfig &cfg, const AdaptResult *predecessor) {
  cfg.Validate();
  const AdaptVariant v = plan.variant;
  if (v == AdaptVariant::kModelC) {
    if (!predecessor || predecessor->variant != AdaptVariant::kModelB)
      throw InvalidInput("adapt: ModelC needs a ModelB result to start from");
  }
  if ((v == AdaptVariant::kModelA || v == AdaptVariant::kModelB) && cfg.data_mix != 0.0)
    throw InvalidInput("adapt: " + ToString(v) + " uses adaptation data only (data_mix must be 0)");
  if (v != AdaptVariant::kModelB && cfg.update_mask)
    throw InvalidInput("adapt: only ModelB takes an update mask");
  if (cfg.data_mix > 0.0 && original.empty())
    throw InvalidInput("adapt: data_mix > 0 needs the original training corpus");

  AdaptResult result;
  result.variant = v;
  result.net = v == AdaptVariant::kModelC ? predecessor->net : baseline;

  NeuronSelection selection = NeuronSelection::All(result.net);
  if (v == AdaptVariant::kModelB)
    selection = cfg.update_mask ? *cfg.update_mask : SelectiveNeurons(baseline, original, plan);
  selection.CheckShape(result.net);
  result.updated_neurons = selection.count();
  const bool frozen = !IsBlind(v) && result.updated_neurons == 0;
  if (frozen) std::clog << "warning: ModelB selection is empty, the model stays unchanged\n";

  FrameCorpus stream = PseudoLabel(baseline, adaptation);
  if (cfg.data_mix > 0.0)
    stream = Concatenate(stream, SampleSegments(original, cfg.data_mix, cfg.seed ^ kMixSalt));
  result.stream_frames = stream.size();

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(stream.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const bool blind = IsBlind(v);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = cfg.initial_lr / std::ldexp(1.0, epoch - 1);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t n = std::min(batch, order.size() - begin);
      std::span<const Eigen::Index> rows(order.data() + begin, n);
      Eigen::MatrixXd x = stream.frames(rows, Eigen::all);
      std::vector<int> y(n);
      for (std::size_t k = 0; k < n; ++k) y[k] = stream.labels[static_cast<std::size_t>(rows[k])];
      const double step = lr * static_cast<double>(n);
      if (blind) {
        BackwardResult bw = Backward(result.net, x, y, cfg.l2);
        result.net = SgdStep(std::move(result.net), bw.gradients, step);
        loss_sum += bw.loss * static_cast<double>(n);
      } else {
        BackwardResult bw = Backward(result.net, x, y, 0.0);
        if (!frozen)
          result.net = SelectiveUpdateStep(std::move(result.net), bw.gradients, selection, step,
                                           cfg.l2);
        loss_sum += bw.loss * static_cast<double>(n);
      }
    }
    result.history.push_back({epoch, lr, loss_sum / static_cast<double>(order.size())});
  }
  return result;
}

}  // namespace prunekit
