// include/prunekit/nn.h

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


#ifndef PRUNEKIT_NN_H_
#define PRUNEKIT_NN_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prunekit/corpus.h"

namespace prunekit {

enum class Activation { kSigmoid, kRelu, kLinear, kSoftmax };

std::string ToString(Activation a);
Activation ActivationFromString(const std::string &s);

/// One fully connected layer. `weights` is [out_width x in_width].
///
/// `keep` gates the layer's outputs: a neuron with keep[n] == false emits 0
/// after its activation, whatever its incoming parameters are.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
  Activation activation = Activation::kSigmoid;
  std::vector<bool> keep;

  std::size_t in_width() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_width() const { return static_cast<std::size_t>(weights.rows()); }
  bool fully_kept() const;
};

class Network {
 public:
  Network() = default;
  /// Validates shapes, finiteness and activation placement; fills missing
  /// keep vectors with all-true.
  Network(std::size_t input_width, std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases. `hidden_widths` may be empty.
  static Network Random(std::size_t input_width,
                        const std::vector<std::size_t> &hidden_widths,
                        std::size_t num_outputs, Activation hidden,
                        Activation output, unsigned long long seed);

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const;
  std::size_t num_layers() const { return layers_.size(); }
  /// Every layer except the last one.
  std::size_t num_hidden() const { return layers_.empty() ? 0 : layers_.size() - 1; }
  std::size_t parameter_count() const;

  const std::vector<DenseLayer> &layers() const { return layers_; }
  const DenseLayer &layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access; call Validate() after structural edits.
  DenseLayer &mutable_layer(std::size_t i) { return layers_.at(i); }

  void Validate() const;
  bool AllFinite() const;

  bool operator==(const Network &other) const;

 private:
  std::size_t input_width_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Post-activation values for a presented frame stream. values[0] is the
/// input itself; values[l + 1] is the (masked) output of layer l.
struct ActivationTrace {
  std::vector<Eigen::MatrixXd> values;

  std::size_t frame_count() const {
    return values.empty() ? 0 : static_cast<std::size_t>(values.front().rows());
  }
  const Eigen::MatrixXd &input_of(std::size_t layer) const { return values.at(layer); }
  const Eigen::MatrixXd &output_of(std::size_t layer) const { return values.at(layer + 1); }
};

struct ForwardResult {
  Eigen::MatrixXd output;
  ActivationTrace trace;
};

/// Output of the last layer (posteriors when it is softmax) plus the
/// full activation trace.
ForwardResult Forward(const Network &net, const Eigen::MatrixXd &frames);

/// Output only; no trace is kept.
Eigen::MatrixXd Predict(const Network &net, const Eigen::MatrixXd &frames);

/// Parameter-shaped container, also used for Hessian diagonals.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients ZerosLike(const Network &net);
  bool SameShape(const Network &net) const;
};

struct BackwardResult {
  Gradients gradients;
  double loss = 0.0;  // data term only, without the L2 penalty
};

/// Gradient of the mean per-frame loss plus (l2 / 2) * sum of squared
/// weights (biases are not penalised). The loss is softmax cross-entropy
/// when the last layer is softmax and half squared error against one-hot
/// targets otherwise.
BackwardResult Backward(const Network &net, const Eigen::MatrixXd &frames,
                        std::span<const int> labels, double l2);

/// w <- w - lr * g for every weight and bias. Throws Divergence if any
/// parameter becomes non-finite.
Network SgdStep(Network net, const Gradients &gradients, double lr);

struct TrainConfig {
  /// Per-frame learning rate: a minibatch step moves the parameters by
  /// initial_lr * batch_rows times the mean-loss gradient.
  double initial_lr = 0.008;
  int constant_epochs = 4;
  int batch_size = 64;
  int max_epochs = 20;
  /// Consecutive epochs without a strict CV improvement before stopping.
  int patience = 2;
  double l2 = 0.0;
  unsigned long long seed = 0;

  void Validate() const;
};

/// Learning-rate schedule driven by cross-validation error: constant for the
/// first `constant_epochs`, then halved after every epoch whose CV error did
/// not strictly improve on the previous one.
class LearningRateSchedule {
 public:
  LearningRateSchedule(double initial_lr, int constant_epochs, int patience);

  /// CV error measured before the first epoch.
  void Start(double initial_cv_error);
  /// Learning rate for the next epoch (1-based epoch = completed() + 1).
  double NextRate() const { return lr_; }
  /// Reports the CV error of the epoch that just finished.
  void Record(double cv_error);
  bool ShouldStop() const;
  int completed() const { return completed_; }
  double best_error() const { return best_; }

 private:
  double initial_lr_;
  int constant_epochs_;
  int patience_;
  double lr_;
  double previous_ = 0.0;
  double best_ = 0.0;
  int since_best_ = 0;
  int completed_ = 0;
  bool started_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double cv_error = 0.0;
};

struct TrainHistory {
  double initial_cv_error = 0.0;
  std::vector<EpochRecord> epochs;
  /// 1-based epoch whose parameters were returned; 0 means the input net.
  int best_epoch = 0;
};

struct TrainResult {
  Network net;
  TrainHistory history;
};

/// Minibatch SGD under LearningRateSchedule. Returns the parameters of the
/// epoch with the lowest CV error.
TrainResult Train(Network net, const FrameCorpus &train, const FrameCorpus &cv,
                  const TrainConfig &cfg);

/// Fraction of misclassified frames.
double FrameErrorRate(const Network &net, const Eigen::MatrixXd &frames,
                      std::span<const int> labels);
double Evaluate(const Network &net, const FrameCorpus &corpus);

/// Row-wise argmax, ties resolved to the lowest index.
std::vector<int> ArgmaxRows(const Eigen::MatrixXd &scores);

}  // namespace prunekit

#endif  // PRUNEKIT_NN_H_
