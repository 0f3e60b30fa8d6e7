// src/nn.cc

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


#include "prunekit/nn.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "prunekit/error.h"

namespace prunekit {

namespace {

constexpr Eigen::Index kEvalChunk = 4096;

void ApplyActivation(Activation act, Eigen::MatrixXd *z) {
  switch (act) {
    case Activation::kSigmoid:
      *z = z->unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      break;
    case Activation::kRelu:
      *z = z->cwiseMax(0.0);
      break;
    case Activation::kLinear:
      break;
    case Activation::kSoftmax:
      for (Eigen::Index r = 0; r < z->rows(); ++r) {
        const double m = z->row(r).maxCoeff();
        z->row(r) = (z->row(r).array() - m).exp().matrix();
        z->row(r) /= z->row(r).sum();
      }
      break;
  }
}

// Derivative of the activation expressed through its output a = f(z).
Eigen::MatrixXd ActivationSlope(Activation act, const Eigen::MatrixXd &a) {
  switch (act) {
    case Activation::kSigmoid:
      return (a.array() * (1.0 - a.array())).matrix();
    case Activation::kRelu:
      return (a.array() > 0.0).cast<double>().matrix();
    default:
      return Eigen::MatrixXd::Ones(a.rows(), a.cols());
  }
}

void MaskColumns(const std::vector<bool> &keep, Eigen::MatrixXd *m) {
  for (std::size_t n = 0; n < keep.size(); ++n)
    if (!keep[n]) m->col(static_cast<Eigen::Index>(n)).setZero();
}

Eigen::MatrixXd LayerForward(const DenseLayer &layer, const Eigen::MatrixXd &in) {
  Eigen::MatrixXd z = in * layer.weights.transpose();
  z.rowwise() += layer.biases.transpose();
  ApplyActivation(layer.activation, &z);
  if (!layer.fully_kept()) MaskColumns(layer.keep, &z);
  return z;
}

void CheckInput(const Network &net, const Eigen::MatrixXd &frames) {
  if (static_cast<std::size_t>(frames.cols()) != net.input_width())
    throw InvalidInput("frames have " + std::to_string(frames.cols()) +
                       " columns, network expects " + std::to_string(net.input_width()));
}

}  // namespace

std::string ToString(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

Activation ActivationFromString(const std::string &s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  if (s == "softmax") return Activation::kSoftmax;
  throw InvalidInput("unknown activation '" + s + "'");
}

bool DenseLayer::fully_kept() const {
  return std::all_of(keep.begin(), keep.end(), [](bool k) { return k; });
}

Network::Network(std::size_t input_width, std::vector<DenseLayer> layers)
    : input_width_(input_width), layers_(std::move(layers)) {
  for (DenseLayer &l : layers_)
    if (l.keep.empty()) l.keep.assign(l.out_width(), true);
  Validate();
}

Network Network::Random(std::size_t input_width,
                        const std::vector<std::size_t> &hidden_widths,
                        std::size_t num_outputs, Activation hidden,
                        Activation output, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_width;
  auto make = [&](std::size_t fan_out, Activation act) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer l;
    l.weights.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = u(rng);
    l.biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    l.activation = act;
    layers.push_back(std::move(l));
    fan_in = fan_out;
  };
  for (std::size_t w : hidden_widths) make(w, hidden);
  make(num_outputs, output);
  return Network(input_width, std::move(layers));
}

std::size_t Network::output_width() const {
  return layers_.empty() ? input_width_ : layers_.back().out_width();
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer &l : layers_)
    n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

void Network::Validate() const {
  if (input_width_ == 0) throw InvalidInput("network input width must be positive");
  if (layers_.empty()) throw InvalidInput("network needs at least one layer");
  std::size_t width = input_width_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer &l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (l.out_width() == 0) throw InvalidInput(where + "zero width");
    if (l.in_width() != width)
      throw InvalidInput(where + "expects " + std::to_string(l.in_width()) +
                         " inputs but previous width is " + std::to_string(width));
    if (static_cast<std::size_t>(l.biases.size()) != l.out_width())
      throw InvalidInput(where + "bias length does not match width");
    if (l.keep.size() != l.out_width()) throw InvalidInput(where + "keep vector length mismatch");
    if (l.activation == Activation::kSoftmax && i + 1 != layers_.size())
      throw InvalidInput(where + "softmax is only allowed on the final layer");
    if (i + 1 == layers_.size() && !l.fully_kept())
      throw InvalidInput(where + "output neurons cannot be masked");
    if (!l.weights.allFinite() || !l.biases.allFinite())
      throw InvalidInput(where + "non-finite parameter");
    width = l.out_width();
  }
}

bool Network::AllFinite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer &l) {
    return l.weights.allFinite() && l.biases.allFinite();
  });
}

bool Network::operator==(const Network &other) const {
  if (input_width_ != other.input_width_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer &a = layers_[i];
    const DenseLayer &b = other.layers_[i];
    if (a.activation != b.activation || a.keep != b.keep ||
        a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.weights != b.weights || a.biases != b.biases)
      return false;
  }
  return true;
}

ForwardResult Forward(const Network &net, const Eigen::MatrixXd &frames) {
  CheckInput(net, frames);
  ForwardResult r;
  r.trace.values.reserve(net.num_layers() + 1);
  r.trace.values.push_back(frames);
  for (const DenseLayer &l : net.layers())
    r.trace.values.push_back(LayerForward(l, r.trace.values.back()));
  r.output = r.trace.values.back();
  return r;
}

Eigen::MatrixXd Predict(const Network &net, const Eigen::MatrixXd &frames) {
  CheckInput(net, frames);
  Eigen::MatrixXd out(frames.rows(), static_cast<Eigen::Index>(net.output_width()));
  for (Eigen::Index begin = 0; begin < frames.rows(); begin += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, frames.rows() - begin);
    Eigen::MatrixXd a = frames.middleRows(begin, n);
    for (const DenseLayer &l : net.layers()) a = LayerForward(l, a);
    out.middleRows(begin, n) = a;
  }
  return out;
}

Gradients Gradients::ZerosLike(const Network &net) {
  Gradients g;
  for (const DenseLayer &l : net.layers()) {
    g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(l.biases.size()));
  }
  return g;
}

bool Gradients::SameShape(const Network &net) const {
  if (weights.size() != net.num_layers() || biases.size() != net.num_layers()) return false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const DenseLayer &l = net.layer(i);
    if (weights[i].rows() != l.weights.rows() || weights[i].cols() != l.weights.cols() ||
        biases[i].size() != l.biases.size())
      return false;
  }
  return true;
}

BackwardResult Backward(const Network &net, const Eigen::MatrixXd &frames,
                        std::span<const int> labels, double l2) {
  CheckInput(net, frames);
  if (labels.empty()) throw InvalidInput("backward: empty batch");
  if (static_cast<std::size_t>(frames.rows()) != labels.size())
    throw InvalidInput("backward: frame/label count mismatch");
  const auto classes = static_cast<int>(net.output_width());
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw InvalidInput("backward: label " + std::to_string(y) + " outside [0," +
                         std::to_string(classes) + ")");

  const ForwardResult fwd = Forward(net, frames);
  const auto &acts = fwd.trace.values;
  const Eigen::Index batch = frames.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const DenseLayer &last = net.layers().back();

  BackwardResult result;
  Eigen::MatrixXd delta = fwd.output;
  if (last.activation == Activation::kSoftmax) {
    double loss = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
      const int y = labels[static_cast<std::size_t>(r)];
      loss -= std::log(std::max(fwd.output(r, y), std::numeric_limits<double>::min()));
      delta(r, y) -= 1.0;
    }
    result.loss = loss * inv_batch;
    delta *= inv_batch;
  } else {
    for (Eigen::Index r = 0; r < batch; ++r) delta(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    result.loss = 0.5 * delta.squaredNorm() * inv_batch;
    delta = (delta * inv_batch).cwiseProduct(ActivationSlope(last.activation, fwd.output));
  }

  Gradients &g = result.gradients;
  g.weights.resize(net.num_layers());
  g.biases.resize(net.num_layers());
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    const DenseLayer &l = net.layer(i);
    g.weights[i] = delta.transpose() * acts[i];
    if (l2 != 0.0) g.weights[i] += l2 * l.weights;
    g.biases[i] = delta.colwise().sum().transpose();
    if (i == 0) break;
    const DenseLayer &below = net.layer(i - 1);
    delta = (delta * l.weights).cwiseProduct(ActivationSlope(below.activation, acts[i]));
    if (!below.fully_kept()) MaskColumns(below.keep, &delta);
  }
  return result;
}

Network SgdStep(Network net, const Gradients &gradients, double lr) {
  if (!gradients.SameShape(net)) throw InvalidInput("sgd_step: gradient shape mismatch");
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    DenseLayer &l = net.mutable_layer(i);
    l.weights -= lr * gradients.weights[i];
    l.biases -= lr * gradients.biases[i];
  }
  if (!net.AllFinite()) throw Divergence("sgd_step produced a non-finite parameter");
  return net;
}

void TrainConfig::Validate() const {
  if (!(initial_lr > 0.0)) throw InvalidInput("initial_lr must be positive");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (max_epochs < 0) throw InvalidInput("max_epochs must be >= 0");
  if (constant_epochs < 0) throw InvalidInput("constant_epochs must be >= 0");
  if (patience < 1) throw InvalidInput("patience must be >= 1");
  if (l2 < 0.0) throw InvalidInput("l2 must be non-negative");
}

LearningRateSchedule::LearningRateSchedule(double initial_lr, int constant_epochs, int patience)
    : initial_lr_(initial_lr), constant_epochs_(constant_epochs), patience_(patience),
      lr_(initial_lr) {}

void LearningRateSchedule::Start(double initial_cv_error) {
  lr_ = initial_lr_;
  previous_ = best_ = initial_cv_error;
  since_best_ = 0;
  completed_ = 0;
  started_ = true;
}

void LearningRateSchedule::Record(double cv_error) {
  if (!started_) Start(cv_error);
  ++completed_;
  if (completed_ >= constant_epochs_ && !(cv_error < previous_)) lr_ *= 0.5;
  if (cv_error < best_) {
    best_ = cv_error;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  previous_ = cv_error;
}

bool LearningRateSchedule::ShouldStop() const {
  return completed_ >= constant_epochs_ && since_best_ >= patience_;
}

TrainResult Train(Network net, const FrameCorpus &train, const FrameCorpus &cv,
                  const TrainConfig &cfg) {
  cfg.Validate();
  if (cv.empty()) throw InvalidInput("train: cross-validation corpus is empty");
  if (train.empty()) throw InvalidInput("train: training corpus is empty");
  CheckInput(net, train.frames);
  CheckInput(net, cv.frames);

  TrainResult result{net, {}};
  LearningRateSchedule schedule(cfg.initial_lr, cfg.constant_epochs, cfg.patience);
  result.history.initial_cv_error = Evaluate(net, cv);
  schedule.Start(result.history.initial_cv_error);
  double best_error = result.history.initial_cv_error;

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = schedule.NextRate();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t n = std::min(batch, order.size() - begin);
      std::span<const Eigen::Index> rows(order.data() + begin, n);
      Eigen::MatrixXd x = train.frames(rows, Eigen::all);
      std::vector<int> y(n);
      for (std::size_t k = 0; k < n; ++k) y[k] = train.labels[static_cast<std::size_t>(rows[k])];
      BackwardResult bw = Backward(net, x, y, cfg.l2);
      if (!std::isfinite(bw.loss))
        throw Divergence("train: loss became non-finite in epoch " + std::to_string(epoch));
      net = SgdStep(std::move(net), bw.gradients, lr * static_cast<double>(n));
      loss_sum += bw.loss * static_cast<double>(n);
    }
    const double cv_error = Evaluate(net, cv);
    result.history.epochs.push_back(
        {epoch, lr, loss_sum / static_cast<double>(order.size()), cv_error});
    if (cv_error < best_error) {
      best_error = cv_error;
      result.net = net;
      result.history.best_epoch = epoch;
    }
    schedule.Record(cv_error);
    if (schedule.ShouldStop()) break;
  }
  return result;
}

std::vector<int> ArgmaxRows(const Eigen::MatrixXd &scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double FrameErrorRate(const Network &net, const Eigen::MatrixXd &frames,
                      std::span<const int> labels) {
  if (labels.empty()) throw InvalidInput("evaluate: empty corpus");
  if (static_cast<std::size_t>(frames.rows()) != labels.size())
    throw InvalidInput("evaluate: frame/label count mismatch");
  const std::vector<int> predicted = ArgmaxRows(Predict(net, frames));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predicted[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double Evaluate(const Network &net, const FrameCorpus &corpus) {
  return FrameErrorRate(net, corpus.frames, corpus.labels);
}

}  // namespace prunekit
