// src/datagen.cc

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


#include "prunekit/datagen.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "prunekit/checkpoint.h"
#include "prunekit/error.h"

namespace prunekit {

namespace {

constexpr int kNoiseTypes = 6;

FrameCorpus RequirePower(const FrameCorpus &corpus, const char *op) {
  if (corpus.power.size() == 0)
    throw InvalidInput(std::string(op) + ": corpus carries no power features to degrade");
  return corpus;
}

// Unit-sum spectral shapes of the additive noise types.
Eigen::MatrixXd NoiseShapes(std::size_t dim, unsigned long long seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd shapes(kNoiseTypes, static_cast<Eigen::Index>(dim));
  for (int k = 0; k < kNoiseTypes; ++k) {
    const double tilt = n(rng);
    const double ripple = 0.5 * n(rng);
    const double phase = 2.0 * std::numbers::pi * std::abs(n(rng));
    for (std::size_t d = 0; d < dim; ++d) {
      const double x = static_cast<double>(d) / static_cast<double>(dim);
      shapes(k, static_cast<Eigen::Index>(d)) =
          std::exp(tilt * (x - 0.5) + ripple * std::sin(2.0 * std::numbers::pi * 3.0 * x + phase));
    }
    shapes.row(k) /= shapes.row(k).sum();
  }
  return shapes;
}

FrameCorpus AddNoise(const FrameCorpus &corpus, const std::vector<double> &segment_snr,
                     unsigned long long seed) {
  FrameCorpus out = RequirePower(corpus, "degrade_noise");
  const auto dim = static_cast<std::size_t>(out.power.cols());
  const Eigen::MatrixXd shapes = NoiseShapes(dim, out.layout.feature_dim * 7919ULL + dim);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> type(0, kNoiseTypes - 1);
  std::normal_distribution<double> flutter(0.0, 0.3);
  Eigen::RowVectorXd noise(static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < out.segments.size(); ++s) {
    const int k = type(rng);
    const double snr = segment_snr[s];
    for (std::size_t t = out.segments[s].begin; t < out.segments[s].end; ++t) {
      for (Eigen::Index d = 0; d < noise.size(); ++d)
        noise(d) = shapes(k, d) * std::exp(flutter(rng));
      if (std::isinf(snr) && snr > 0) continue;
      const auto row = static_cast<Eigen::Index>(t);
      const double signal = out.power.row(row).sum();
      const double scale = signal / (std::pow(10.0, snr / 10.0) * noise.sum());
      out.power.row(row) += scale * noise;
    }
  }
  out.frames = BuildFrames(out.power, out.segments, out.layout);
  return out;
}

FrameCorpus Reverberate(const FrameCorpus &corpus, const std::vector<double> &segment_rt,
                        double frame_shift) {
  FrameCorpus out = RequirePower(corpus, "degrade_reverb");
  for (std::size_t s = 0; s < out.segments.size(); ++s) {
    const std::vector<double> h = ReverbKernel(segment_rt[s], frame_shift);
    const Segment seg = out.segments[s];
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      const std::size_t taps = std::min(h.size(), t - seg.begin + 1);
      auto row = out.power.row(static_cast<Eigen::Index>(t));
      row.setZero();
      for (std::size_t k = 0; k < taps; ++k)
        row += h[k] * corpus.power.row(static_cast<Eigen::Index>(t - k));
    }
  }
  out.domain = Domain::kOutOfDomain;
  out.frames = BuildFrames(out.power, out.segments, out.layout);
  return out;
}

}  // namespace

void GeneratorSpec::Validate() const {
  if (num_classes < 2) throw InvalidInput("generator needs at least 2 classes");
  if (feature_dim == 0) throw InvalidInput("generator feature_dim must be positive");
  if (!(markov_stay_prob > 0.0 && markov_stay_prob < 1.0))
    throw InvalidInput("markov_stay_prob must lie in (0, 1)");
  if (snr_db_min > snr_db_max) throw InvalidInput("empty SNR range");
  if (reverb_min < 0.0 || reverb_min > reverb_max) throw InvalidInput("bad reverberation range");
  if (!(frame_shift > 0.0)) throw InvalidInput("frame_shift must be positive");
  if (!(root_compress >= 1.0)) throw InvalidInput("root_compress must be >= 1");
  if (segment_length == 0) throw InvalidInput("segment_length must be positive");
  if (coarticulation < 0.0 || coarticulation >= 1.0)
    throw InvalidInput("coarticulation must lie in [0, 1)");
}

void to_json(nlohmann::json &j, const GeneratorSpec &s) {
  j = {{"num_classes", s.num_classes},       {"feature_dim", s.feature_dim},
       {"markov_stay_prob", s.markov_stay_prob}, {"snr_db_min", s.snr_db_min},
       {"snr_db_max", s.snr_db_max},         {"reverb_min", s.reverb_min},
       {"reverb_max", s.reverb_max},         {"frame_shift", s.frame_shift},
       {"root_compress", s.root_compress},   {"context", s.context},
       {"segment_length", s.segment_length}, {"envelope_spread", s.envelope_spread},
       {"periodic_depth", s.periodic_depth}, {"jitter", s.jitter},
       {"coarticulation", s.coarticulation}, {"gain_spread", s.gain_spread},
       {"level_norm", s.level_norm},         {"inventory_seed", s.inventory_seed}};
}

void from_json(const nlohmann::json &j, GeneratorSpec &s) {
  const GeneratorSpec d;
  s.num_classes = j.value("num_classes", d.num_classes);
  s.feature_dim = j.value("feature_dim", d.feature_dim);
  s.markov_stay_prob = j.value("markov_stay_prob", d.markov_stay_prob);
  s.snr_db_min = j.value("snr_db_min", d.snr_db_min);
  s.snr_db_max = j.value("snr_db_max", d.snr_db_max);
  s.reverb_min = j.value("reverb_min", d.reverb_min);
  s.reverb_max = j.value("reverb_max", d.reverb_max);
  s.frame_shift = j.value("frame_shift", d.frame_shift);
  s.root_compress = j.value("root_compress", d.root_compress);
  s.context = j.value("context", d.context);
  s.segment_length = j.value("segment_length", d.segment_length);
  s.envelope_spread = j.value("envelope_spread", d.envelope_spread);
  s.periodic_depth = j.value("periodic_depth", d.periodic_depth);
  s.jitter = j.value("jitter", d.jitter);
  s.coarticulation = j.value("coarticulation", d.coarticulation);
  s.gain_spread = j.value("gain_spread", d.gain_spread);
  s.level_norm = j.value("level_norm", d.level_norm);
  s.inventory_seed = j.value("inventory_seed", d.inventory_seed);
}

Eigen::MatrixXd ClassEnvelopes(const GeneratorSpec &spec) {
  std::mt19937_64 rng(spec.inventory_seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto dim = static_cast<double>(spec.feature_dim);
  Eigen::MatrixXd env = Eigen::MatrixXd::Zero(spec.num_classes, static_cast<Eigen::Index>(spec.feature_dim));
  for (int c = 0; c < spec.num_classes; ++c) {
    const double tilt = 0.5 * spec.envelope_spread * n(rng);
    for (int bump = 0; bump < 3; ++bump) {
      const double centre = u(rng) * dim;
      const double width = 2.0 + 4.0 * u(rng);
      const double amp = spec.envelope_spread * n(rng);
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        const double x = static_cast<double>(d) - centre;
        env(c, static_cast<Eigen::Index>(d)) += amp * std::exp(-x * x / (2.0 * width * width));
      }
    }
    for (std::size_t d = 0; d < spec.feature_dim; ++d)
      env(c, static_cast<Eigen::Index>(d)) += tilt * (static_cast<double>(d) / dim - 0.5);
  }
  return env;
}

Eigen::MatrixXd BuildFrames(const Eigen::MatrixXd &power, const std::vector<Segment> &segments,
                            const FeatureLayout &layout) {
  const auto dim = static_cast<Eigen::Index>(layout.feature_dim);
  if (power.cols() != dim) throw InvalidInput("power width does not match the feature layout");
  const double r = layout.root;
  Eigen::MatrixXd compressed = (r * (power.array().pow(1.0 / r) - 1.0)).matrix();
  if (layout.level_norm)
    for (const Segment &s : segments) {
      auto block = compressed.middleRows(static_cast<Eigen::Index>(s.begin),
                                         static_cast<Eigen::Index>(s.end - s.begin));
      block.array() -= block.mean();
    }
  const auto ctx = static_cast<long>(layout.context);
  Eigen::MatrixXd frames(power.rows(), static_cast<Eigen::Index>(layout.stacked_dim()));
  for (const Segment &s : segments) {
    const auto b = static_cast<long>(s.begin);
    const auto e = static_cast<long>(s.end);
    for (long t = b; t < e; ++t)
      for (long o = -ctx; o <= ctx; ++o) {
        const long src = std::clamp(t + o, b, e - 1);
        frames.block(t, (o + ctx) * dim, 1, dim) = compressed.row(src);
      }
  }
  return frames;
}

FrameCorpus GenerateClean(const GeneratorSpec &spec, std::size_t length,
                          unsigned long long seed) {
  spec.Validate();
  if (length <= 2 * spec.context)
    throw InvalidInput("corpus length must exceed twice the context width");
  const Eigen::MatrixXd env = ClassEnvelopes(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> first(0, spec.num_classes - 1);
  std::uniform_int_distribution<int> other(0, spec.num_classes - 2);

  FrameCorpus c;
  c.domain = Domain::kInDomain;
  c.layout = spec.layout();
  c.labels.resize(length);
  int label = first(rng);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0 && u(rng) >= spec.markov_stay_prob) {
      const int next = other(rng);
      label = next >= label ? next + 1 : next;
    }
    c.labels[t] = label;
  }
  for (std::size_t b = 0; b < length; b += spec.segment_length)
    c.segments.push_back({b, std::min(length, b + spec.segment_length)});

  const auto dim = static_cast<Eigen::Index>(spec.feature_dim);
  c.power.resize(static_cast<Eigen::Index>(length), dim);
  Eigen::RowVectorXd harmonic(dim);
  Eigen::RowVectorXd smoothed(dim);
  for (const Segment &s : c.segments) {
    const double gain = spec.gain_spread * n(rng);
    const double f0 = 0.03 + 0.09 * u(rng);
    const double phase = 2.0 * std::numbers::pi * u(rng);
    const double shift = 2.0 * std::numbers::pi * u(rng);
    for (Eigen::Index d = 0; d < dim; ++d)
      harmonic(d) = std::sin(4.0 * std::numbers::pi * static_cast<double>(d) /
                                 static_cast<double>(dim) + shift);
    smoothed = env.row(c.labels[s.begin]);
    for (std::size_t t = s.begin; t < s.end; ++t) {
      smoothed = spec.coarticulation * smoothed +
                 (1.0 - spec.coarticulation) * env.row(c.labels[t]);
      const double wave =
          spec.periodic_depth *
          std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(t - s.begin) + phase);
      auto row = c.power.row(static_cast<Eigen::Index>(t));
      for (Eigen::Index d = 0; d < dim; ++d)
        row(d) = std::exp(smoothed(d) + wave * harmonic(d) + gain + spec.jitter * n(rng));
    }
  }
  c.frames = BuildFrames(c.power, c.segments, c.layout);
  return c;
}

FrameCorpus DegradeNoise(const FrameCorpus &corpus, double snr_db, unsigned long long seed) {
  if (std::isinf(snr_db) && snr_db > 0) return corpus;
  return AddNoise(corpus, std::vector<double>(corpus.segments.size(), snr_db), seed);
}

FrameCorpus DegradeNoise(const FrameCorpus &corpus, double snr_min, double snr_max,
                         unsigned long long seed) {
  if (snr_min > snr_max) throw InvalidInput("empty SNR range");
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(snr_min, snr_max);
  std::vector<double> snr(corpus.segments.size());
  for (double &v : snr) v = u(rng);
  return AddNoise(corpus, snr, seed);
}

std::vector<double> ReverbKernel(double rt60, double frame_shift) {
  if (rt60 < 0.0) throw InvalidInput("reverberation time must be non-negative");
  if (!(frame_shift > 0.0)) throw InvalidInput("frame_shift must be positive");
  const auto taps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(rt60 / frame_shift)));
  std::vector<double> h(taps);
  for (std::size_t k = 0; k < taps; ++k)
    h[k] = std::pow(10.0, -6.0 * static_cast<double>(k) * frame_shift / rt60);
  if (taps == 1) h[0] = 1.0;
  return h;
}

FrameCorpus DegradeReverb(const FrameCorpus &corpus, double rt60, double frame_shift,
                          unsigned long long /*seed*/) {
  return Reverberate(corpus, std::vector<double>(corpus.segments.size(), rt60), frame_shift);
}

FrameCorpus DegradeReverb(const FrameCorpus &corpus, double rt_min, double rt_max,
                          double frame_shift, unsigned long long seed) {
  if (rt_min < 0.0 || rt_min > rt_max) throw InvalidInput("bad reverberation range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(rt_min, rt_max);
  std::vector<double> rt(corpus.segments.size());
  for (double &v : rt) v = u(rng);
  return Reverberate(corpus, rt, frame_shift);
}

nlohmann::json CorpusToJson(const FrameCorpus &corpus, const GeneratorSpec &spec) {
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment &s : corpus.segments) segs.push_back({s.begin, s.end});
  nlohmann::json j = {{"version", 1},
                      {"spec", spec},
                      {"layout",
                       {{"feature_dim", corpus.layout.feature_dim},
                        {"context", corpus.layout.context},
                        {"root", corpus.layout.root},
                        {"level_norm", corpus.layout.level_norm}}},
                      {"domain_tag", ToString(corpus.domain)},
                      {"labels", corpus.labels},
                      {"segments", segs}};
  const Eigen::MatrixXd &m = corpus.power.size() != 0 ? corpus.power : corpus.frames;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  j[corpus.power.size() != 0 ? "power" : "frames"] = {{"cols", m.cols()}, {"data", flat}};
  return j;
}

FrameCorpus CorpusFromJson(const nlohmann::json &j, GeneratorSpec *spec) {
  try {
    FrameCorpus c;
    if (spec) *spec = j.at("spec").get<GeneratorSpec>();
    const auto &l = j.at("layout");
    c.layout = {l.at("feature_dim").get<std::size_t>(), l.at("context").get<std::size_t>(),
                l.at("root").get<double>(), l.value("level_norm", false)};
    c.domain = DomainFromString(j.at("domain_tag").get<std::string>());
    c.labels = j.at("labels").get<std::vector<int>>();
    for (const auto &s : j.at("segments"))
      c.segments.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    const bool has_power = j.contains("power");
    const auto &block = has_power ? j.at("power") : j.at("frames");
    const auto cols = block.at("cols").get<Eigen::Index>();
    const auto data = block.at("data").get<std::vector<double>>();
    if (cols <= 0 || data.size() != c.labels.size() * static_cast<std::size_t>(cols))
      throw InvalidInput("corpus matrix size does not match the label count");
    Eigen::MatrixXd m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>(
        data.data(), static_cast<Eigen::Index>(c.labels.size()), cols);
    if (has_power) {
      c.power = std::move(m);
      c.frames = BuildFrames(c.power, c.segments, c.layout);
    } else {
      c.frames = std::move(m);
    }
    c.Validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput(std::string("malformed corpus file: ") + e.what());
  }
}

void SaveCorpus(const FrameCorpus &corpus, const GeneratorSpec &spec, const std::string &path) {
  WriteJsonFile(CorpusToJson(corpus, spec), path);
}

FrameCorpus LoadCorpus(const std::string &path, GeneratorSpec *spec) {
  return CorpusFromJson(ReadJsonFile(path), spec);
}

}  // namespace prunekit
