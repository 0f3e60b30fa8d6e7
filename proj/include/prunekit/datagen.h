// include/prunekit/datagen.h

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


#ifndef PRUNEKIT_DATAGEN_H_
#define PRUNEKIT_DATAGEN_H_

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "prunekit/corpus.h"

namespace prunekit {

/// Parameters of the synthetic frame-classification corpus.
///
/// Each class owns a smooth log-spectral envelope over `feature_dim`
/// channels; the envelopes are drawn from `inventory_seed`, so corpora made
/// with different seeds share one class inventory. Labels follow a Markov
/// chain that stays put with probability `markov_stay_prob`.
struct GeneratorSpec {
  int num_classes = 8;
  std::size_t feature_dim = 40;
  double markov_stay_prob = 0.9;
  double snr_db_min = 0.0;
  double snr_db_max = 15.0;
  /// Reverberation time range in seconds; one value is drawn per segment.
  double reverb_min = 0.1;
  double reverb_max = 0.8;
  double frame_shift = 0.01;
  double root_compress = 15.0;
  std::size_t context = 8;
  std::size_t segment_length = 200;
  /// Std-dev of the class envelope bumps (log-power units).
  double envelope_spread = 1.2;
  /// Depth of the quasi-periodic log-power modulation.
  double periodic_depth = 0.6;
  /// Per-frame log-power jitter.
  double jitter = 0.35;
  /// AR(1) coefficient smoothing the envelope across label changes.
  double coarticulation = 0.5;
  /// Std-dev of the per-segment log gain.
  double gain_spread = 0.7;
  /// Per-segment level normalisation of the compressed features.
  bool level_norm = true;
  unsigned long long inventory_seed = 20190;

  void Validate() const;
  FeatureLayout layout() const { return {feature_dim, context, root_compress, level_norm}; }
};

void to_json(nlohmann::json &j, const GeneratorSpec &s);
void from_json(const nlohmann::json &j, GeneratorSpec &s);

/// Class envelopes (num_classes x feature_dim, log-power).
Eigen::MatrixXd ClassEnvelopes(const GeneratorSpec &spec);

/// Box-Cox root compression r * (p^(1/r) - 1) of every channel, minus the
/// segment's mean level when layout.level_norm is set, then each frame
/// stacked with `context` neighbours per side, clamped to its segment.
Eigen::MatrixXd BuildFrames(const Eigen::MatrixXd &power, const std::vector<Segment> &segments,
                            const FeatureLayout &layout);

/// In-domain clean corpus of `length` frames.
FrameCorpus GenerateClean(const GeneratorSpec &spec, std::size_t length,
                          unsigned long long seed);

/// Adds coloured noise in the power domain so that every frame has exactly
/// the requested SNR. +inf leaves the corpus unchanged.
FrameCorpus DegradeNoise(const FrameCorpus &corpus, double snr_db, unsigned long long seed);
/// One SNR per segment, uniform in [snr_min, snr_max].
FrameCorpus DegradeNoise(const FrameCorpus &corpus, double snr_min, double snr_max,
                         unsigned long long seed);

/// Causal exponential decay reaching -60 dB after `rt60` seconds.
/// rt60 == 0 gives the identity kernel {1}.
std::vector<double> ReverbKernel(double rt60, double frame_shift);

/// Convolves every channel of every segment with ReverbKernel(rt60).
/// The result is tagged out-of-domain.
FrameCorpus DegradeReverb(const FrameCorpus &corpus, double rt60, double frame_shift,
                          unsigned long long seed);
/// One reverberation time per segment, uniform in [rt_min, rt_max].
FrameCorpus DegradeReverb(const FrameCorpus &corpus, double rt_min, double rt_max,
                          double frame_shift, unsigned long long seed);

/// Corpus file: {version, spec, layout, domain_tag, labels, segments, power}
/// with frames rebuilt on load, or {..., frames} when no power is stored.
nlohmann::json CorpusToJson(const FrameCorpus &corpus, const GeneratorSpec &spec);
FrameCorpus CorpusFromJson(const nlohmann::json &j, GeneratorSpec *spec = nullptr);
void SaveCorpus(const FrameCorpus &corpus, const GeneratorSpec &spec, const std::string &path);
FrameCorpus LoadCorpus(const std::string &path, GeneratorSpec *spec = nullptr);

}  // namespace prunekit

#endif  // PRUNEKIT_DATAGEN_H_
