// src/corpus.cc

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


#include "prunekit/corpus.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prunekit/error.h"

namespace prunekit {

std::string ToString(Domain d) {
  return d == Domain::kInDomain ? "in_domain" : "out_of_domain";
}

Domain DomainFromString(const std::string &s) {
  if (s == "in_domain") return Domain::kInDomain;
  if (s == "out_of_domain") return Domain::kOutOfDomain;
  throw InvalidInput("unknown domain tag '" + s + "'");
}

void FrameCorpus::Validate() const {
  if (static_cast<std::size_t>(frames.rows()) != labels.size())
    throw InvalidInput("corpus has " + std::to_string(frames.rows()) +
                       " frames but " + std::to_string(labels.size()) + " labels");
  if (power.size() != 0 && power.rows() != frames.rows())
    throw InvalidInput("corpus power matrix does not match frame count");
  std::size_t expected = 0;
  for (const Segment &s : segments) {
    if (s.begin != expected || s.end <= s.begin)
      throw InvalidInput("corpus segments must tile the frame range");
    expected = s.end;
  }
  if (expected != labels.size())
    throw InvalidInput("corpus segments do not cover every frame");
  for (int y : labels)
    if (y < 0) throw InvalidInput("negative label in corpus");
}

FrameCorpus SelectSegments(const FrameCorpus &corpus,
                           std::span<const std::size_t> segment_ids) {
  std::size_t total = 0;
  for (std::size_t id : segment_ids) {
    if (id >= corpus.segments.size()) throw InvalidInput("segment index out of range");
    total += corpus.segments[id].length();
  }
  FrameCorpus out;
  out.domain = corpus.domain;
  out.layout = corpus.layout;
  out.frames.resize(static_cast<Eigen::Index>(total), corpus.frames.cols());
  const bool has_power = corpus.power.size() != 0;
  if (has_power) out.power.resize(static_cast<Eigen::Index>(total), corpus.power.cols());
  out.labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t id : segment_ids) {
    const Segment &s = corpus.segments[id];
    const auto n = static_cast<Eigen::Index>(s.length());
    const auto b = static_cast<Eigen::Index>(s.begin);
    out.frames.middleRows(static_cast<Eigen::Index>(row), n) = corpus.frames.middleRows(b, n);
    if (has_power)
      out.power.middleRows(static_cast<Eigen::Index>(row), n) = corpus.power.middleRows(b, n);
    out.labels.insert(out.labels.end(), corpus.labels.begin() + static_cast<long>(s.begin),
                      corpus.labels.begin() + static_cast<long>(s.end));
    out.segments.push_back({row, row + s.length()});
    row += s.length();
  }
  return out;
}

FrameCorpus Concatenate(const FrameCorpus &a, const FrameCorpus &b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.frames.cols() != b.frames.cols())
    throw InvalidInput("cannot concatenate corpora of different frame width");
  FrameCorpus out;
  out.domain = a.domain;
  out.layout = a.layout;
  out.frames.resize(a.frames.rows() + b.frames.rows(), a.frames.cols());
  out.frames << a.frames, b.frames;
  if (a.power.size() != 0 && b.power.size() != 0 && a.power.cols() == b.power.cols()) {
    out.power.resize(a.power.rows() + b.power.rows(), a.power.cols());
    out.power << a.power, b.power;
  }
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.segments = a.segments;
  const std::size_t offset = a.size();
  for (const Segment &s : b.segments) out.segments.push_back({s.begin + offset, s.end + offset});
  return out;
}

FrameCorpus Relabel(const FrameCorpus &corpus, std::vector<int> labels) {
  if (labels.size() != corpus.size()) throw InvalidInput("relabel: label count mismatch");
  FrameCorpus out = corpus;
  out.labels = std::move(labels);
  return out;
}

FrameCorpus SampleSegments(const FrameCorpus &corpus, double fraction,
                           unsigned long long seed) {
  if (fraction < 0.0 || fraction > 1.0) throw InvalidInput("sample fraction must lie in [0,1]");
  const std::size_t n = corpus.segments.size();
  auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  if (fraction > 0.0) count = std::max<std::size_t>(count, 1);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(count, n));
  std::sort(ids.begin(), ids.end());
  return SelectSegments(corpus, ids);
}

}  // namespace prunekit
