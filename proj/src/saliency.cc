// src/saliency.cc

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


#include "prunekit/saliency.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "prunekit/error.h"

namespace prunekit {

namespace {

constexpr Eigen::Index kCurvatureChunk = 2048;

void CheckHiddenLayer(const Network &net, std::size_t layer) {
  if (layer >= net.num_hidden())
    throw InvalidInput("layer " + std::to_string(layer) + " is not a hidden layer (network has " +
                       std::to_string(net.num_hidden()) + ")");
}

Eigen::MatrixXd Slope(Activation act, const Eigen::MatrixXd &a) {
  switch (act) {
    case Activation::kSigmoid:
      return (a.array() * (1.0 - a.array())).matrix();
    case Activation::kRelu:
      return (a.array() > 0.0).cast<double>().matrix();
    default:
      return Eigen::MatrixXd::Ones(a.rows(), a.cols());
  }
}

void Gate(const std::vector<bool> &keep, Eigen::MatrixXd *m) {
  for (std::size_t n = 0; n < keep.size(); ++n)
    if (!keep[n]) m->col(static_cast<Eigen::Index>(n)).setZero();
}

// Pulls a batch of output-space vectors (T x out) back to the pre-activations
// of `layer`.
Eigen::MatrixXd PullBack(const Network &net, std::size_t layer, const ActivationTrace &trace,
                         Eigen::MatrixXd d) {
  for (std::size_t i = net.num_layers() - 1; i > layer; --i) {
    const DenseLayer &below = net.layer(i - 1);
    d = (d * net.layer(i).weights).cwiseProduct(Slope(below.activation, trace.values[i]));
    Gate(below.keep, &d);
  }
  return d;
}

}  // namespace

std::string ToString(SaliencyMethod m) {
  switch (m) {
    case SaliencyMethod::kMbp: return "MBP";
    case SaliencyMethod::kObs: return "OBS";
    case SaliencyMethod::kMi: return "MI";
  }
  return "?";
}

SaliencyMethod SaliencyMethodFromString(const std::string &s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "MBP") return SaliencyMethod::kMbp;
  if (u == "OBS") return SaliencyMethod::kObs;
  if (u == "MI") return SaliencyMethod::kMi;
  throw InvalidInput("unknown saliency method '" + s + "'");
}

std::vector<std::size_t> RankAscending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

SaliencyReport MakeReport(std::size_t layer, SaliencyMethod method, std::vector<double> scores) {
  SaliencyReport r{layer, method, std::move(scores), {}};
  r.ranking = RankAscending(r.scores);
  return r;
}

void SaliencyReport::Validate() const {
  if (ranking.size() != scores.size()) throw InvalidInput("saliency ranking length mismatch");
  std::vector<bool> seen(scores.size(), false);
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const std::size_t n = ranking[i];
    if (n >= scores.size() || seen[n]) throw InvalidInput("saliency ranking is not a permutation");
    seen[n] = true;
    if (i > 0 && scores[ranking[i - 1]] > scores[n])
      throw InvalidInput("saliency ranking is not sorted by score");
  }
  for (double s : scores)
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("saliency scores must be finite and >= 0");
}

nlohmann::json ReportToJson(const SaliencyReport &r) {
  return {{"layer", r.layer}, {"method", ToString(r.method)}, {"scores", r.scores},
          {"ranking", r.ranking}};
}

SaliencyReport ReportFromJson(const nlohmann::json &j) {
  try {
    SaliencyReport r;
    r.layer = j.at("layer").get<std::size_t>();
    r.method = SaliencyMethodFromString(j.at("method").get<std::string>());
    r.scores = j.at("scores").get<std::vector<double>>();
    r.ranking = j.at("ranking").get<std::vector<std::size_t>>();
    r.Validate();
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput(std::string("malformed saliency report: ") + e.what());
  }
}

SaliencyReport MbpSaliency(const Network &net, std::size_t layer) {
  CheckHiddenLayer(net, layer);
  const DenseLayer &l = net.layer(layer);
  std::vector<double> scores(l.out_width());
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    scores[n] = l.weights.row(row).squaredNorm() + l.biases(row) * l.biases(row);
  }
  return MakeReport(layer, SaliencyMethod::kMbp, std::move(scores));
}

LayerCurvature GaussNewtonDiagonal(const Network &net, std::size_t layer,
                                   const Eigen::MatrixXd &frames) {
  if (layer >= net.num_layers()) throw InvalidInput("layer index out of range");
  if (frames.rows() == 0) throw InvalidInput("curvature: empty calibration set");
  const DenseLayer &target = net.layer(layer);
  const DenseLayer &last = net.layers().back();
  const bool softmax = last.activation == Activation::kSoftmax;
  const auto classes = static_cast<Eigen::Index>(net.output_width());

  LayerCurvature h{Eigen::MatrixXd::Zero(target.weights.rows(), target.weights.cols()),
                   Eigen::VectorXd::Zero(target.biases.size())};
  for (Eigen::Index begin = 0; begin < frames.rows(); begin += kCurvatureChunk) {
    const Eigen::Index n = std::min(kCurvatureChunk, frames.rows() - begin);
    const ForwardResult fwd = Forward(net, frames.middleRows(begin, n));
    const Eigen::MatrixXd &out = fwd.output;
    // Output curvature as a sum of rank-one terms v_m v_m^T, one per class.
    Eigen::MatrixXd energy = Eigen::MatrixXd::Zero(n, target.weights.rows());
    for (Eigen::Index m = 0; m < classes; ++m) {
      Eigen::MatrixXd v;
      if (softmax) {
        v = -out;
        v.col(m).array() += 1.0;
        v.array().colwise() *= out.col(m).array().sqrt();
      } else {
        v = Eigen::MatrixXd::Zero(n, classes);
        v.col(m).setOnes();
        v = v.cwiseProduct(Slope(last.activation, out));
      }
      Eigen::MatrixXd g = PullBack(net, layer, fwd.trace, std::move(v));
      energy += g.cwiseProduct(g);
    }
    const Eigen::MatrixXd in_sq = fwd.trace.input_of(layer).cwiseProduct(fwd.trace.input_of(layer));
    h.weights += energy.transpose() * in_sq;
    h.biases += energy.colwise().sum().transpose();
  }
  const double inv = 1.0 / static_cast<double>(frames.rows());
  h.weights *= inv;
  h.biases *= inv;
  return h;
}

SaliencyReport ObsSaliency(const Network &net, std::size_t layer, const FrameCorpus &calib) {
  CheckHiddenLayer(net, layer);
  if (calib.empty()) throw InvalidInput("obs saliency: empty calibration set");
  const LayerCurvature h = GaussNewtonDiagonal(net, layer, calib.frames);
  const DenseLayer &l = net.layer(layer);
  std::vector<double> scores(l.out_width(), 0.0);
  for (Eigen::Index n = 0; n < l.weights.rows(); ++n) {
    double s = SecondOrderSaliency(l.biases(n), h.biases(n));
    for (Eigen::Index j = 0; j < l.weights.cols(); ++j)
      s += SecondOrderSaliency(l.weights(n, j), h.weights(n, j));
    scores[static_cast<std::size_t>(n)] = s;
  }
  return MakeReport(layer, SaliencyMethod::kObs, std::move(scores));
}

void MIConfig::Validate() const {
  if (window_q < 2 || window_q % 2 != 0)
    throw InvalidInput("MI window q must be an even integer >= 2");
}

std::vector<double> CrossCorrelationScores(const Eigen::MatrixXd &inputs,
                                           const Eigen::MatrixXd &outputs,
                                           std::span<const Segment> segments, int window_q) {
  MIConfig{window_q, 0}.Validate();
  if (inputs.rows() != outputs.rows()) throw InvalidInput("MI: trace lengths differ");
  const auto width = static_cast<std::size_t>(outputs.cols());
  const Eigen::Index fan_in = inputs.cols();
  if (fan_in == 0) throw InvalidInput("MI: layer has no inputs");
  const int back = window_q / 2 - 1;  // k runs from -back to +window_q/2
  const int ahead = window_q / 2;

  std::vector<double> scores(width, 0.0);
  std::size_t valid = 0;
  Eigen::VectorXd window_sum(fan_in);
  for (const Segment &s : segments) {
    if (s.end > static_cast<std::size_t>(inputs.rows())) throw InvalidInput("MI: segment out of range");
    const auto first = static_cast<long>(s.begin) + back;
    const auto last = static_cast<long>(s.end) - 1 - ahead;
    for (long t = first; t <= last; ++t) {
      window_sum.setZero();
      for (long k = -back; k <= ahead; ++k) window_sum += inputs.row(t + k).transpose();
      const double mean_abs = window_sum.cwiseAbs().sum() / static_cast<double>(fan_in);
      for (std::size_t n = 0; n < width; ++n)
        scores[n] += std::abs(outputs(t, static_cast<Eigen::Index>(n))) * mean_abs;
      ++valid;
    }
  }
  if (valid == 0)
    throw InvalidInput("MI: no segment is long enough for a window of " +
                       std::to_string(window_q) + " frames");
  for (double &v : scores) v /= static_cast<double>(valid);
  return scores;
}

SaliencyReport MiSaliency(const Network &net, std::size_t layer, const FrameCorpus &calib,
                          const MIConfig &cfg) {
  CheckHiddenLayer(net, layer);
  cfg.Validate();
  if (calib.size() < static_cast<std::size_t>(cfg.window_q))
    throw InvalidInput("MI: calibration stream shorter than the window");

  std::vector<Segment> segments = calib.segments;
  std::size_t frames = calib.size();
  if (cfg.max_frames > 0 && frames > cfg.max_frames) {
    frames = cfg.max_frames;
    std::vector<Segment> capped;
    for (const Segment &s : segments) {
      if (s.begin >= frames) break;
      capped.push_back({s.begin, std::min(s.end, frames)});
    }
    segments = std::move(capped);
  }
  const ForwardResult fwd = Forward(net, calib.frames.topRows(static_cast<Eigen::Index>(frames)));
  std::vector<double> scores = CrossCorrelationScores(
      fwd.trace.input_of(layer), fwd.trace.output_of(layer), segments, cfg.window_q);
  return MakeReport(layer, SaliencyMethod::kMi, std::move(scores));
}

SaliencyReport ComputeSaliency(SaliencyMethod method, const Network &net, std::size_t layer,
                               const FrameCorpus &calib, const MIConfig &mi) {
  switch (method) {
    case SaliencyMethod::kMbp: return MbpSaliency(net, layer);
    case SaliencyMethod::kObs: return ObsSaliency(net, layer, calib);
    case SaliencyMethod::kMi: return MiSaliency(net, layer, calib, mi);
  }
  throw InvalidInput("unknown saliency method");
}

std::size_t PercentToCount(double pct, std::size_t width) {
  if (!(pct >= 0.0 && pct <= 100.0)) throw InvalidInput("percentage must lie in [0, 100]");
  return static_cast<std::size_t>(std::floor(pct * static_cast<double>(width) / 100.0 + 0.5));
}

Bands BandSelect(const SaliencyReport &report, double hypo_pct, double hyper_pct) {
  if (hypo_pct + hyper_pct > 100.0) throw InvalidInput("hypo + hyper percentages exceed 100");
  const std::size_t width = report.width();
  const std::size_t hypo = PercentToCount(hypo_pct, width);
  const std::size_t hyper = PercentToCount(hyper_pct, width);
  if (hypo + hyper > width)
    throw InvalidInput("hypo and hyper bands overlap (" + std::to_string(hypo) + " + " +
                       std::to_string(hyper) + " > " + std::to_string(width) + ")");
  const auto &rk = report.ranking;
  Bands b;
  b.hypo.assign(rk.begin(), rk.begin() + static_cast<long>(hypo));
  b.mid.assign(rk.begin() + static_cast<long>(hypo), rk.end() - static_cast<long>(hyper));
  b.hyper.assign(rk.end() - static_cast<long>(hyper), rk.end());
  return b;
}

std::vector<std::size_t> CentralBand(const SaliencyReport &report, double pct) {
  const std::size_t width = report.width();
  const std::size_t count = PercentToCount(pct, width);
  const std::size_t start = (width - count) / 2;
  return {report.ranking.begin() + static_cast<long>(start),
          report.ranking.begin() + static_cast<long>(start + count)};
}

}  // namespace prunekit
