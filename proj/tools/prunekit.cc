// tools/prunekit.cc

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


// Command-line front end. Every subcommand reads its tunables from the
// optional --config experiment file; flags override single values.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prunekit/adaptation.h"
#include "prunekit/checkpoint.h"
#include "prunekit/datagen.h"
#include "prunekit/error.h"
#include "prunekit/harness.h"
#include "prunekit/nn.h"
#include "prunekit/pruning.h"
#include "prunekit/saliency.h"

using namespace prunekit;

namespace {

std::vector<std::size_t> ZeroBased(const std::vector<int> &layers) {
  std::vector<std::size_t> out;
  for (int l : layers) {
    if (l < 1) throw InvalidInput("layer numbers are 1-based");
    out.push_back(static_cast<std::size_t>(l - 1));
  }
  return out;
}

std::string ReadText(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot read " + path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

FrameCorpus LoadAll(const std::vector<std::string> &paths) {
  FrameCorpus out;
  for (const std::string &p : paths) out = Concatenate(out, LoadCorpus(p));
  return out;
}

std::vector<SaliencyReport> Reports(SaliencyMethod method, const Network &net,
                                    const std::vector<std::size_t> &layers,
                                    const std::string &calib_path, const MIConfig &mi) {
  FrameCorpus calib;
  if (method != SaliencyMethod::kMbp) {
    if (calib_path.empty()) throw InvalidInput(ToString(method) + " needs --calib");
    calib = LoadCorpus(calib_path);
  }
  std::vector<SaliencyReport> out;
  for (std::size_t l : layers) out.push_back(ComputeSaliency(method, net, l, calib, mi));
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Saliency-based pruning and selective adaptation of feed-forward acoustic models"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Experiment JSON supplying default settings")
      ->check(CLI::ExistingFile);

  // generate-data
  auto *gen = app.add_subcommand("generate-data", "Synthesize a labelled frame corpus");
  unsigned long long gen_seed = 1;
  std::string condition = "clean", gen_out;
  std::size_t frames = 10000;
  double snr = std::numeric_limits<double>::quiet_NaN(), rt60 = snr;
  gen->add_option("--seed", gen_seed);
  gen->add_option("--condition", condition)->check(CLI::IsMember({"clean", "noisy", "reverb"}));
  gen->add_option("--frames", frames);
  gen->add_option("--snr", snr, "Fixed SNR in dB (default: drawn per segment)");
  gen->add_option("--rt60", rt60, "Fixed reverberation time in s (default: drawn per segment)");
  gen->add_option("--out", gen_out)->required();

  // train
  auto *train = app.add_subcommand("train", "Train a baseline network");
  std::vector<std::string> train_paths;
  std::string cv_path, train_out;
  unsigned long long train_seed = 1;
  train->add_option("--train", train_paths, "Training corpora, concatenated")->required();
  train->add_option("--cv", cv_path)->required();
  train->add_option("--seed", train_seed);
  train->add_option("--out", train_out)->required();

  // saliency
  auto *sal = app.add_subcommand("saliency", "Score hidden neurons");
  std::string model_path, method_name = "MI", calib_path, sal_out;
  std::vector<int> layers{1};
  sal->add_option("--model", model_path)->required();
  sal->add_option("--method", method_name);
  sal->add_option("--layers", layers)->delimiter(',');
  sal->add_option("--calib", calib_path, "Calibration corpus (OBS and MI)");
  sal->add_option("--out", sal_out, "JSON output (default: stdout)");

  // prune
  auto *prune = app.add_subcommand("prune", "Remove a saliency band from hidden layers");
  std::string band_name = "hypo", prune_out, mask_out;
  double hypo = 0.0, hyper = 0.0, mid = 0.0;
  bool structural = false;
  prune->add_option("--model", model_path)->required();
  prune->add_option("--method", method_name);
  prune->add_option("--layers", layers)->delimiter(',');
  prune->add_option("--band", band_name);
  prune->add_option("--hypo", hypo, "Percent pruned from the low-saliency end");
  prune->add_option("--hyper", hyper, "Percent pruned from the high-saliency end");
  prune->add_option("--mid", mid, "Percent pruned around the median");
  prune->add_option("--calib", calib_path);
  prune->add_flag("--structural", structural, "Drop pruned neurons instead of zeroing them");
  prune->add_option("--out", prune_out)->required();
  prune->add_option("--mask-out", mask_out);

  // adapt
  auto *adapt = app.add_subcommand("adapt", "Adapt a baseline to unlabelled out-of-domain data");
  std::string variant_name = "A", adapt_path, original_path, mask_from, from_path, adapt_out;
  double mix = -1.0;
  int epochs = -1;
  unsigned long long adapt_seed = 1;
  adapt->add_option("--model", model_path, "Baseline network")->required();
  adapt->add_option("--variant", variant_name);
  adapt->add_option("--data", adapt_path, "Adaptation corpus")->required();
  adapt->add_option("--original", original_path, "Original training corpus for mixing");
  adapt->add_option("--mask-from", mask_from, "Prune mask JSON whose pruned neurons are updated (B)");
  adapt->add_option("--calib", calib_path, "Calibration corpus for the B selection");
  adapt->add_option("--from", from_path, "Model B network that C continues from");
  adapt->add_option("--mix", mix, "Fraction of original data blended in");
  adapt->add_option("--epochs", epochs);
  adapt->add_option("--seed", adapt_seed);
  adapt->add_option("--out", adapt_out)->required();

  // evaluate
  auto *eval = app.add_subcommand("evaluate", "Frame error rate of a network");
  std::vector<std::string> eval_paths;
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", eval_paths)->required();

  // experiment
  auto *exp = app.add_subcommand("experiment", "Run a configured grid over seeds");
  std::size_t workers = 0;
  std::string csv_out, text_out;
  exp->add_option("--workers", workers, "Parallel cells (default: PRUNEKIT_WORKERS or cores)");
  exp->add_option("--csv", csv_out);
  exp->add_option("--text", text_out);

  // report
  auto *report = app.add_subcommand("report", "Render a results CSV");
  std::string results_path, format = "text";
  report->add_option("--results", results_path)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"text", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = LoadExperimentConfig(config_path);

    if (*gen) {
      const GeneratorSpec &g = cfg.generator;
      FrameCorpus c = GenerateClean(g, frames, DeriveSeed(gen_seed, 1));
      if (condition == "noisy")
        c = std::isnan(snr) ? DegradeNoise(c, g.snr_db_min, g.snr_db_max, DeriveSeed(gen_seed, 2))
                            : DegradeNoise(c, snr, DeriveSeed(gen_seed, 2));
      else if (condition == "reverb")
        c = std::isnan(rt60)
                ? DegradeReverb(c, g.reverb_min, g.reverb_max, g.frame_shift, DeriveSeed(gen_seed, 2))
                : DegradeReverb(c, rt60, g.frame_shift, DeriveSeed(gen_seed, 2));
      SaveCorpus(c, g, gen_out);
      std::cout << gen_out << ": " << c.size() << " frames, width " << c.width() << ", "
                << ToString(c.domain) << "\n";
    } else if (*train) {
      const FrameCorpus tr = LoadAll(train_paths);
      const FrameCorpus cv = LoadCorpus(cv_path);
      const int classes = 1 + *std::max_element(tr.labels.begin(), tr.labels.end());
      const Network init = Network::Random(
          tr.width(), cfg.model.hidden,
          static_cast<std::size_t>(std::max(classes, cfg.generator.num_classes)),
          cfg.model.hidden_activation, Activation::kSoftmax, DeriveSeed(train_seed, 20));
      TrainConfig t = cfg.train;
      t.seed = DeriveSeed(train_seed, 21);
      const TrainResult r = Train(init, tr, cv, t);
      SaveNetwork(r.net, train_out);
      std::cout << train_out << ": cv frame error rate " << Evaluate(r.net, cv) << "\n";
    } else if (*sal) {
      const Network net = LoadNetwork(model_path);
      nlohmann::json out = nlohmann::json::array();
      for (const SaliencyReport &r : Reports(SaliencyMethodFromString(method_name), net,
                                             ZeroBased(layers), calib_path, cfg.mi))
        out.push_back(ReportToJson(r));
      if (sal_out.empty()) std::cout << out.dump(2) << "\n";
      else WriteJsonFile(out, sal_out);
    } else if (*prune) {
      const Network net = LoadNetwork(model_path);
      const SaliencyMethod method = SaliencyMethodFromString(method_name);
      const Band band = BandFromString(band_name);
      const auto ls = ZeroBased(layers);
      PrunePlan plan;
      for (std::size_t l : ls) plan.layers.push_back({l, method, band, hypo, hyper, mid});
      const PruneMask mask = BuildMask(net, Reports(method, net, ls, calib_path, cfg.mi), plan);
      SaveNetwork(structural ? StructuralPrune(net, mask) : ApplyMask(net, mask), prune_out);
      if (!mask_out.empty()) WriteJsonFile(MaskToJson(mask), mask_out);
      std::cout << prune_out << ": pruned " << mask.total_pruned() << " neurons ("
                << mask.hidden_percent() << "% of hidden)\n";
    } else if (*adapt) {
      const Network baseline = LoadNetwork(model_path);
      AdaptationPlan plan = cfg.adaptations.empty() ? AdaptationPlan{} : cfg.adaptations[0].plan;
      plan.variant = AdaptVariantFromString(variant_name);
      plan.mi = cfg.mi;
      AdaptConfig ac = cfg.adapt;
      ac.seed = DeriveSeed(adapt_seed, 30);
      ac.data_mix = mix >= 0.0 ? mix : plan.default_mix();
      if (epochs >= 0) ac.max_epochs = epochs;
      const FrameCorpus data = LoadCorpus(adapt_path);
      const FrameCorpus original = original_path.empty() ? FrameCorpus{} : LoadCorpus(original_path);
      std::optional<AdaptResult> predecessor;
      if (plan.variant == AdaptVariant::kModelB) {
        if (!mask_from.empty())
          ac.update_mask = NeuronSelection::FromPruneMask(MaskFromJson(ReadJsonFile(mask_from)));
        else if (!calib_path.empty())
          ac.update_mask = SelectiveNeurons(baseline, LoadCorpus(calib_path), plan);
        else
          throw InvalidInput("ModelB needs --mask-from or --calib");
      } else if (plan.variant == AdaptVariant::kModelC) {
        if (from_path.empty()) throw InvalidInput("ModelC needs --from <ModelB network>");
        predecessor.emplace();
        predecessor->variant = AdaptVariant::kModelB;
        predecessor->net = LoadNetwork(from_path);
      }
      const AdaptResult r =
          Adapt(baseline, data, original, plan, ac, predecessor ? &*predecessor : nullptr);
      SaveNetwork(r.net, adapt_out);
      std::cout << HistoryToJson(r).dump(2) << "\n";
    } else if (*eval) {
      const Network net = LoadNetwork(model_path);
      for (const std::string &p : eval_paths)
        std::cout << p << "\t" << Evaluate(net, LoadCorpus(p)) << "\n";
    } else if (*exp) {
      if (config_path.empty()) throw InvalidInput("experiment needs --config");
      if (!csv_out.empty()) cfg.csv_path = csv_out;
      if (!text_out.empty()) cfg.text_path = text_out;
      const ExperimentResult r = RunExperiment(cfg, workers > 0 ? workers : WorkersFromEnv());
      std::cout << RenderText(r.table, cfg.name);
      for (const CellOutcome &c : r.cells)
        if (!c.ok) std::cerr << "FAILED " << c.id << " seed " << c.seed << ": " << c.error << "\n";
      return r.failed() == 0 ? 0 : 1;
    } else if (*report) {
      std::cout << Render(ParseCsv(ReadText(results_path)), format);
    }
  } catch (const std::exception &e) {
    std::cerr << "prunekit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
