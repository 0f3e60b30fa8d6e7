// include/prunekit/corpus.h

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


#ifndef PRUNEKIT_CORPUS_H_
#define PRUNEKIT_CORPUS_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prunekit {

enum class Domain { kInDomain, kOutOfDomain };

std::string ToString(Domain d);
Domain DomainFromString(const std::string &s);

/// Half-open frame range [begin, end) of one utterance-like segment.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
  bool operator==(const Segment &) const = default;
};

/// How `frames` is derived from `power`: Box-Cox root compression of each
/// channel followed by stacking `context` frames on either side.
struct FeatureLayout {
  std::size_t feature_dim = 0;
  std::size_t context = 0;
  double root = 15.0;
  /// Subtract each segment's mean compressed level before stacking.
  bool level_norm = false;
  std::size_t stacked_dim() const { return feature_dim * (2 * context + 1); }
  bool operator==(const FeatureLayout &) const = default;
};

/// Time-ordered frames with labels, domain tag and segment boundaries.
///
/// `power` holds the uncompressed per-channel energies the frames were built
/// from; degradations operate on it and rebuild `frames`. Corpora that were
/// not produced by the generator may leave `power` empty.
struct FrameCorpus {
  Eigen::MatrixXd frames;
  std::vector<int> labels;
  Domain domain = Domain::kInDomain;
  std::vector<Segment> segments;
  FeatureLayout layout;
  Eigen::MatrixXd power;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t width() const { return static_cast<std::size_t>(frames.cols()); }

  /// Throws InvalidInput when labels, frames and segments disagree.
  void Validate() const;
};

/// Copies the listed segments (in the given order) into a new corpus.
FrameCorpus SelectSegments(const FrameCorpus &corpus,
                           std::span<const std::size_t> segment_ids);

/// Appends `b` after `a`. Layouts must match; the result carries a's domain.
FrameCorpus Concatenate(const FrameCorpus &a, const FrameCorpus &b);

/// Same frames and segments, new labels.
FrameCorpus Relabel(const FrameCorpus &corpus, std::vector<int> labels);

/// Seeded sample of round(fraction * #segments) whole segments, kept in
/// their original order. At least one segment is returned for fraction > 0.
FrameCorpus SampleSegments(const FrameCorpus &corpus, double fraction,
                           unsigned long long seed);

}  // namespace prunekit

#endif  // PRUNEKIT_CORPUS_H_
