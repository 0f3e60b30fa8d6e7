// include/prunekit/harness.h

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


#ifndef PRUNEKIT_HARNESS_H_
#define PRUNEKIT_HARNESS_H_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prunekit/adaptation.h"
#include "prunekit/corpus.h"
#include "prunekit/datagen.h"
#include "prunekit/nn.h"
#include "prunekit/pruning.h"
#include "prunekit/saliency.h"

namespace prunekit {

/// Frame counts of the per-seed splits.
struct DataSizes {
  std::size_t train_clean = 10000;
  std::size_t train_noisy = 10000;
  std::size_t cv = 4000;
  std::size_t eval_clean = 5000;
  std::size_t eval_noisy = 5000;
  std::size_t adapt = 10000;
  std::size_t eval_out = 10000;
};

struct ModelShape {
  std::vector<std::size_t> hidden{128, 128, 128};
  Activation hidden_activation = Activation::kSigmoid;
};

/// One pruning cell. Layers are 0-based here and 1-based in config files.
struct PruneCell {
  std::string id;
  SaliencyMethod method = SaliencyMethod::kMi;
  Band band = Band::kHypo;
  std::vector<std::size_t> layers;
  double hypo_pct = 0.0;
  double hyper_pct = 0.0;
  double mid_pct = 0.0;

  /// Percentage reported in the table: the band's own share, hypo + hyper for kBoth.
  double pct() const;
  PrunePlan plan() const;
};

/// Cartesian product methods x bands x layer sets x {from, from+step, .., to}.
/// kBoth prunes pct from each end.
struct PruneSweep {
  std::vector<SaliencyMethod> methods;
  std::vector<Band> bands;
  std::vector<std::vector<std::size_t>> layer_sets;
  double from = 2.0;
  double to = 12.0;
  double step = 2.0;

  std::vector<double> percentages() const;
};

struct AdaptCell {
  std::string id;
  AdaptationPlan plan;
  /// Negative means the variant's default.
  double data_mix = -1.0;
  /// Id of the Model B cell a Model C cell continues from.
  std::string from;

  double mix() const { return data_mix < 0.0 ? plan.default_mix() : data_mix; }
};

struct ExperimentConfig {
  std::string name = "experiment";
  GeneratorSpec generator;
  DataSizes data;
  ModelShape model;
  TrainConfig train;
  MIConfig mi{10, 4000};
  AdaptConfig adapt;
  std::vector<PruneCell> prune;
  std::vector<PruneSweep> sweeps;
  std::vector<AdaptCell> adaptations;
  std::vector<unsigned long long> seeds{1, 2, 3};
  std::string csv_path;
  std::string text_path;

  void Validate() const;
  /// Explicit cells followed by the sweeps, with ids filled in.
  std::vector<PruneCell> PruneCells() const;
};

void to_json(nlohmann::json &j, const ExperimentConfig &c);
void from_json(const nlohmann::json &j, ExperimentConfig &c);
ExperimentConfig LoadExperimentConfig(const std::string &path);

/// Derives an independent stream seed from an experiment seed.
unsigned long long DeriveSeed(unsigned long long seed, unsigned long long stream);

struct SeedData {
  FrameCorpus train;     // clean + noisy, labelled
  FrameCorpus cv;        // noisy, labelled; also the saliency calibration set
  FrameCorpus eval_in;   // clean + noisy
  FrameCorpus adapt;     // reverberated; labels are never used for training
  FrameCorpus eval_out;  // reverberated
};

SeedData MakeSeedData(const ExperimentConfig &cfg, unsigned long long seed);
Network TrainBaseline(const ExperimentConfig &cfg, const SeedData &data,
                      unsigned long long seed);

/// One (cell, seed) evaluation.
struct CellOutcome {
  std::string id;
  unsigned long long seed = 0;
  bool ok = false;
  std::string error;
  double in_error = 0.0;
  double out_error = 0.0;
  double hidden_pct = 0.0;
};

struct ResultRow {
  std::string id;
  std::string kind;    // baseline | prune | adapt
  std::string method;  // MBP | OBS | MI | ModelA.. | -
  std::string band;    // hypo | hyper | mid | both | -
  std::string layers;  // 1-based, '+'-joined; "all" or "-"
  double pct = 0.0;
  double hidden_pct = 0.0;
  std::size_t seeds = 0;
  std::size_t failures = 0;
  double in_mean = 0.0;
  double in_std = 0.0;
  double out_mean = 0.0;
  double out_std = 0.0;
};

/// Error columns hold frame error rates in [0, 1].
struct ResultTable {
  std::vector<ResultRow> rows;

  const ResultRow *find(const std::string &id) const;
  /// NaN cells compare equal to NaN.
  bool operator==(const ResultTable &other) const;
};

struct ExperimentResult {
  ResultTable table;
  std::vector<CellOutcome> cells;

  std::size_t failed() const;
  const CellOutcome *find(const std::string &id, unsigned long long seed) const;
};

/// Mean and sample standard deviation (n - 1; 0 for a single value).
std::pair<double, double> MeanStd(std::span<const double> values);

/// PRUNEKIT_WORKERS when set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t WorkersFromEnv();

/// Trains one baseline per seed, evaluates every cell against a private
/// copy of it and aggregates over seeds. A failing cell is recorded and the
/// run continues. Writes csv_path / text_path when set.
ExperimentResult RunExperiment(const ExperimentConfig &cfg, std::size_t workers);

std::string RenderCsv(const ResultTable &table);
ResultTable ParseCsv(const std::string &csv);
std::string RenderText(const ResultTable &table, const std::string &title = "");
/// format is "csv" or "text".
std::string Render(const ResultTable &table, const std::string &format);

/// Shortest representation that parses back to the same double.
std::string FormatDouble(double v);

}  // namespace prunekit

#endif  // PRUNEKIT_HARNESS_H_
