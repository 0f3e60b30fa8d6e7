// src/harness.cc

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


#include "prunekit/harness.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "prunekit/checkpoint.h"
#include "prunekit/error.h"

namespace prunekit {

namespace {

constexpr const char *kCsvHeader =
    "id,kind,method,band,layers,pct,hidden_pct,seeds,failures,"
    "in_fer_mean,in_fer_std,out_fer_mean,out_fer_std";

std::string JoinLayers(std::span<const std::size_t> layers) {
  std::string s;
  for (std::size_t l : layers) s += (s.empty() ? "" : "+") + std::to_string(l + 1);
  return s;
}

std::string PctLabel(double pct) {
  if (pct == std::floor(pct) && pct >= 0.0 && pct < 100.0) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(pct));
    return buf;
  }
  return FormatDouble(pct);
}

std::vector<std::size_t> LayersFromJson(const nlohmann::json &j) {
  std::vector<std::size_t> out;
  for (const auto &v : j) {
    const int l = v.get<int>();
    if (l < 1) throw InvalidInput("layer numbers in configs are 1-based");
    out.push_back(static_cast<std::size_t>(l - 1));
  }
  return out;
}

nlohmann::json LayersToJson(std::span<const std::size_t> layers) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t l : layers) j.push_back(l + 1);
  return j;
}

void CheckId(const std::string &id) {
  if (id.empty()) throw InvalidInput("cell ids must be non-empty");
  if (id.find_first_of(",\"\n\r") != std::string::npos)
    throw InvalidInput("cell id '" + id + "' contains a comma, quote or newline");
}

// Runs fn(0..n-1) on up to `workers` threads. fn must not throw.
void ParallelFor(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

template <class F>
std::string Guard(F &&f) {
  try {
    f();
    return {};
  } catch (const std::exception &e) {
    std::string msg = e.what();
    return msg.empty() ? "unknown error" : msg;
  } catch (...) {
    return "unknown error";
  }
}

bool SameDouble(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

double ParseDouble(const std::string &s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw InvalidInput("csv: '" + s + "' is not a number");
  return v;
}

std::size_t ParseCount(const std::string &s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw InvalidInput("csv: '" + s + "' is not a count");
  return v;
}

FrameCorpus Clean(const GeneratorSpec &g, std::size_t n, unsigned long long seed) {
  return n == 0 ? FrameCorpus{} : GenerateClean(g, n, seed);
}

}  // namespace

double PruneCell::pct() const {
  switch (band) {
    case Band::kHypo: return hypo_pct;
    case Band::kHyper: return hyper_pct;
    case Band::kMid: return mid_pct;
    case Band::kBoth: return hypo_pct + hyper_pct;
  }
  return 0.0;
}

PrunePlan PruneCell::plan() const {
  PrunePlan p;
  for (std::size_t l : layers) p.layers.push_back({l, method, band, hypo_pct, hyper_pct, mid_pct});
  return p;
}

std::vector<double> PruneSweep::percentages() const {
  if (!(step > 0.0) || !(from > 0.0) || !(to < 100.0) || from > to)
    throw InvalidInput("sweep needs 0 < from <= to < 100 and step > 0");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) out.push_back(from + static_cast<double>(i) * step);
  return out;
}

void ExperimentConfig::Validate() const {
  if (seeds.empty()) throw InvalidInput("experiment needs at least one seed");
  if (std::set(seeds.begin(), seeds.end()).size() != seeds.size())
    throw InvalidInput("experiment seeds must be distinct");
  generator.Validate();
  train.Validate();
  mi.Validate();
  adapt.Validate();
  if (model.hidden.empty()) throw InvalidInput("model needs at least one hidden layer");
  for (std::size_t w : model.hidden)
    if (w == 0) throw InvalidInput("hidden widths must be positive");
  if (model.hidden_activation == Activation::kSoftmax)
    throw InvalidInput("softmax is only allowed on the output layer");
  if (data.train_clean + data.train_noisy == 0 || data.cv == 0 || data.adapt == 0 ||
      data.eval_clean + data.eval_noisy == 0 || data.eval_out == 0)
    throw InvalidInput("every data split needs frames");

  std::set<std::string> ids{"baseline"};
  for (const PruneCell &c : PruneCells()) {
    CheckId(c.id);
    if (c.layers.empty()) throw InvalidInput("prune cell '" + c.id + "' names no layers");
    for (double p : {c.hypo_pct, c.hyper_pct, c.mid_pct})
      if (!(p >= 0.0 && p < 100.0))
        throw InvalidInput("prune cell '" + c.id + "' has a percentage outside [0, 100)");
    if (!ids.insert(c.id).second) throw InvalidInput("duplicate cell id '" + c.id + "'");
  }
  std::map<std::string, AdaptVariant> variants;
  for (const AdaptCell &a : adaptations) {
    CheckId(a.id);
    if (!ids.insert(a.id).second) throw InvalidInput("duplicate cell id '" + a.id + "'");
    variants[a.id] = a.plan.variant;
    if (!(a.mix() >= 0.0 && a.mix() <= 1.0))
      throw InvalidInput("adapt cell '" + a.id + "' has data_mix outside [0, 1]");
  }
  for (const AdaptCell &a : adaptations) {
    if (a.plan.variant == AdaptVariant::kModelC) {
      const auto it = variants.find(a.from);
      if (it == variants.end() || it->second != AdaptVariant::kModelB)
        throw InvalidInput("ModelC cell '" + a.id + "' must name a ModelB cell in 'from'");
    } else if (!a.from.empty()) {
      throw InvalidInput("only ModelC cells take 'from'");
    }
  }
}

std::vector<PruneCell> ExperimentConfig::PruneCells() const {
  std::vector<PruneCell> cells;
  auto auto_id = [](PruneCell &c) {
    if (!c.id.empty()) return;
    const std::string pct = c.band == Band::kBoth
                                ? PctLabel(c.hypo_pct) + "+" + PctLabel(c.hyper_pct)
                                : PctLabel(c.pct());
    c.id = "prune/" + ToString(c.method) + "/" + ToString(c.band) + "/L" + JoinLayers(c.layers) +
           "/" + pct;
  };
  for (PruneCell c : prune) {
    auto_id(c);
    cells.push_back(std::move(c));
  }
  for (const PruneSweep &s : sweeps)
    for (SaliencyMethod m : s.methods)
      for (Band b : s.bands)
        for (const auto &layers : s.layer_sets)
          for (double p : s.percentages()) {
            PruneCell c;
            c.method = m;
            c.band = b;
            c.layers = layers;
            if (b == Band::kHypo || b == Band::kBoth) c.hypo_pct = p;
            if (b == Band::kHyper || b == Band::kBoth) c.hyper_pct = p;
            if (b == Band::kMid) c.mid_pct = p;
            auto_id(c);
            cells.push_back(std::move(c));
          }
  return cells;
}

void to_json(nlohmann::json &j, const ExperimentConfig &c) {
  nlohmann::json prune = nlohmann::json::array();
  for (const PruneCell &p : c.prune)
    prune.push_back({{"id", p.id},
                     {"method", ToString(p.method)},
                     {"band", ToString(p.band)},
                     {"layers", LayersToJson(p.layers)},
                     {"hypo", p.hypo_pct},
                     {"hyper", p.hyper_pct},
                     {"mid", p.mid_pct}});
  nlohmann::json sweeps = nlohmann::json::array();
  for (const PruneSweep &s : c.sweeps) {
    nlohmann::json methods = nlohmann::json::array(), bands = nlohmann::json::array(),
                   sets = nlohmann::json::array();
    for (SaliencyMethod m : s.methods) methods.push_back(ToString(m));
    for (Band b : s.bands) bands.push_back(ToString(b));
    for (const auto &l : s.layer_sets) sets.push_back(LayersToJson(l));
    sweeps.push_back({{"methods", methods}, {"bands", bands}, {"layer_sets", sets},
                      {"from", s.from}, {"to", s.to}, {"step", s.step}});
  }
  nlohmann::json adaptations = nlohmann::json::array();
  for (const AdaptCell &a : c.adaptations) {
    nlohmann::json e = {{"id", a.id},
                        {"variant", ToString(a.plan.variant)},
                        {"method", ToString(a.plan.method)},
                        {"layers", LayersToJson(a.plan.layers)},
                        {"hypo", a.plan.hypo_pct},
                        {"hyper", a.plan.hyper_pct}};
    if (a.data_mix >= 0.0) e["mix"] = a.data_mix;
    if (!a.from.empty()) e["from"] = a.from;
    adaptations.push_back(e);
  }
  j = {{"name", c.name},
       {"seeds", c.seeds},
       {"generator", c.generator},
       {"data",
        {{"train_clean", c.data.train_clean},
         {"train_noisy", c.data.train_noisy},
         {"cv", c.data.cv},
         {"eval_clean", c.data.eval_clean},
         {"eval_noisy", c.data.eval_noisy},
         {"adapt", c.data.adapt},
         {"eval_out", c.data.eval_out}}},
       {"model",
        {{"hidden", c.model.hidden}, {"hidden_activation", ToString(c.model.hidden_activation)}}},
       {"train",
        {{"initial_lr", c.train.initial_lr},
         {"constant_epochs", c.train.constant_epochs},
         {"batch_size", c.train.batch_size},
         {"max_epochs", c.train.max_epochs},
         {"patience", c.train.patience},
         {"l2", c.train.l2}}},
       {"saliency", {{"mi_window", c.mi.window_q}, {"mi_max_frames", c.mi.max_frames}}},
       {"adapt",
        {{"l2", c.adapt.l2},
         {"initial_lr", c.adapt.initial_lr},
         {"max_epochs", c.adapt.max_epochs},
         {"batch_size", c.adapt.batch_size}}},
       {"prune", prune},
       {"sweeps", sweeps},
       {"adaptations", adaptations},
       {"output", {{"csv", c.csv_path}, {"text", c.text_path}}}};
}

void from_json(const nlohmann::json &j, ExperimentConfig &c) {
  static const std::set<std::string> known{"name",  "seeds",    "generator", "data",
                                           "model", "train",    "saliency",  "adapt",
                                           "prune", "sweeps",   "adaptations", "output"};
  for (const auto &[key, value] : j.items())
    if (!known.contains(key)) throw InvalidInput("unknown experiment config key '" + key + "'");
  c = ExperimentConfig{};
  c.name = j.value("name", c.name);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<unsigned long long>>();
  if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorSpec>();
  if (j.contains("data")) {
    const auto &d = j.at("data");
    c.data.train_clean = d.value("train_clean", c.data.train_clean);
    c.data.train_noisy = d.value("train_noisy", c.data.train_noisy);
    c.data.cv = d.value("cv", c.data.cv);
    c.data.eval_clean = d.value("eval_clean", c.data.eval_clean);
    c.data.eval_noisy = d.value("eval_noisy", c.data.eval_noisy);
    c.data.adapt = d.value("adapt", c.data.adapt);
    c.data.eval_out = d.value("eval_out", c.data.eval_out);
  }
  if (j.contains("model")) {
    const auto &m = j.at("model");
    if (m.contains("hidden")) c.model.hidden = m.at("hidden").get<std::vector<std::size_t>>();
    if (m.contains("hidden_activation"))
      c.model.hidden_activation = ActivationFromString(m.at("hidden_activation").get<std::string>());
  }
  if (j.contains("train")) {
    const auto &t = j.at("train");
    c.train.initial_lr = t.value("initial_lr", c.train.initial_lr);
    c.train.constant_epochs = t.value("constant_epochs", c.train.constant_epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.patience = t.value("patience", c.train.patience);
    c.train.l2 = t.value("l2", c.train.l2);
  }
  if (j.contains("saliency")) {
    const auto &s = j.at("saliency");
    c.mi.window_q = s.value("mi_window", c.mi.window_q);
    c.mi.max_frames = s.value("mi_max_frames", c.mi.max_frames);
  }
  if (j.contains("adapt")) {
    const auto &a = j.at("adapt");
    c.adapt.l2 = a.value("l2", c.adapt.l2);
    c.adapt.initial_lr = a.value("initial_lr", c.adapt.initial_lr);
    c.adapt.max_epochs = a.value("max_epochs", c.adapt.max_epochs);
    c.adapt.batch_size = a.value("batch_size", c.adapt.batch_size);
  }
  for (const auto &p : j.value("prune", nlohmann::json::array())) {
    PruneCell cell;
    cell.id = p.value("id", "");
    cell.method = SaliencyMethodFromString(p.at("method").get<std::string>());
    cell.band = BandFromString(p.at("band").get<std::string>());
    cell.layers = LayersFromJson(p.at("layers"));
    if (p.contains("pct")) {
      const double pct = p.at("pct").get<double>();
      if (cell.band == Band::kHypo || cell.band == Band::kBoth) cell.hypo_pct = pct;
      if (cell.band == Band::kHyper || cell.band == Band::kBoth) cell.hyper_pct = pct;
      if (cell.band == Band::kMid) cell.mid_pct = pct;
    }
    cell.hypo_pct = p.value("hypo", cell.hypo_pct);
    cell.hyper_pct = p.value("hyper", cell.hyper_pct);
    cell.mid_pct = p.value("mid", cell.mid_pct);
    c.prune.push_back(std::move(cell));
  }
  for (const auto &s : j.value("sweeps", nlohmann::json::array())) {
    PruneSweep sweep;
    for (const auto &m : s.at("methods")) sweep.methods.push_back(SaliencyMethodFromString(m.get<std::string>()));
    for (const auto &b : s.at("bands")) sweep.bands.push_back(BandFromString(b.get<std::string>()));
    for (const auto &l : s.at("layer_sets")) sweep.layer_sets.push_back(LayersFromJson(l));
    sweep.from = s.value("from", sweep.from);
    sweep.to = s.value("to", sweep.to);
    sweep.step = s.value("step", sweep.step);
    c.sweeps.push_back(std::move(sweep));
  }
  for (const auto &a : j.value("adaptations", nlohmann::json::array())) {
    AdaptCell cell;
    cell.plan.variant = AdaptVariantFromString(a.at("variant").get<std::string>());
    cell.id = a.value("id", "adapt/" + ToString(cell.plan.variant));
    if (a.contains("method"))
      cell.plan.method = SaliencyMethodFromString(a.at("method").get<std::string>());
    if (a.contains("layers")) cell.plan.layers = LayersFromJson(a.at("layers"));
    cell.plan.hypo_pct = a.value("hypo", cell.plan.hypo_pct);
    cell.plan.hyper_pct = a.value("hyper", cell.plan.hyper_pct);
    cell.data_mix = a.value("mix", -1.0);
    cell.from = a.value("from", "");
    c.adaptations.push_back(std::move(cell));
  }
  if (j.contains("output")) {
    c.csv_path = j.at("output").value("csv", "");
    c.text_path = j.at("output").value("text", "");
  }
}

ExperimentConfig LoadExperimentConfig(const std::string &path) {
  const nlohmann::json j = ReadJsonFile(path);
  try {
    ExperimentConfig c = j.get<ExperimentConfig>();
    c.Validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput("malformed experiment config " + path + ": " + e.what());
  }
}

unsigned long long DeriveSeed(unsigned long long seed, unsigned long long stream) {
  // splitmix64 finaliser over (seed, stream).
  unsigned long long z = seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeedData MakeSeedData(const ExperimentConfig &cfg, unsigned long long seed) {
  const GeneratorSpec &g = cfg.generator;
  const DataSizes &n = cfg.data;
  auto noisy = [&](std::size_t frames, unsigned long long a, unsigned long long b) {
    return frames == 0 ? FrameCorpus{}
                       : DegradeNoise(GenerateClean(g, frames, DeriveSeed(seed, a)), g.snr_db_min,
                                      g.snr_db_max, DeriveSeed(seed, b));
  };
  auto reverberant = [&](std::size_t frames, unsigned long long a, unsigned long long b) {
    return DegradeReverb(GenerateClean(g, frames, DeriveSeed(seed, a)), g.reverb_min,
                         g.reverb_max, g.frame_shift, DeriveSeed(seed, b));
  };
  SeedData d;
  d.train = Concatenate(Clean(g, n.train_clean, DeriveSeed(seed, 1)), noisy(n.train_noisy, 2, 3));
  d.cv = noisy(n.cv, 4, 5);
  d.eval_in = Concatenate(Clean(g, n.eval_clean, DeriveSeed(seed, 6)), noisy(n.eval_noisy, 7, 8));
  d.adapt = reverberant(n.adapt, 9, 10);
  d.eval_out = reverberant(n.eval_out, 11, 12);
  return d;
}

Network TrainBaseline(const ExperimentConfig &cfg, const SeedData &data,
                      unsigned long long seed) {
  const Network init = Network::Random(data.train.width(), cfg.model.hidden,
                                       static_cast<std::size_t>(cfg.generator.num_classes),
                                       cfg.model.hidden_activation, Activation::kSoftmax,
                                       DeriveSeed(seed, 20));
  TrainConfig t = cfg.train;
  t.seed = DeriveSeed(seed, 21);
  return Train(init, data.train, data.cv, t).net;
}

const ResultRow *ResultTable::find(const std::string &id) const {
  for (const ResultRow &r : rows)
    if (r.id == id) return &r;
  return nullptr;
}

bool ResultTable::operator==(const ResultTable &other) const {
  if (rows.size() != other.rows.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ResultRow &a = rows[i];
    const ResultRow &b = other.rows[i];
    if (a.id != b.id || a.kind != b.kind || a.method != b.method || a.band != b.band ||
        a.layers != b.layers || a.seeds != b.seeds || a.failures != b.failures)
      return false;
    for (auto [x, y] : {std::pair{a.pct, b.pct}, {a.hidden_pct, b.hidden_pct},
                        {a.in_mean, b.in_mean}, {a.in_std, b.in_std},
                        {a.out_mean, b.out_mean}, {a.out_std, b.out_std}})
      if (!SameDouble(x, y)) return false;
  }
  return true;
}

std::size_t ExperimentResult::failed() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const CellOutcome &c) { return !c.ok; }));
}

const CellOutcome *ExperimentResult::find(const std::string &id, unsigned long long seed) const {
  for (const CellOutcome &c : cells)
    if (c.id == id && c.seed == seed) return &c;
  return nullptr;
}

std::pair<double, double> MeanStd(std::span<const double> values) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (values.empty()) return {nan, nan};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::size_t WorkersFromEnv() {
  if (const char *env = std::getenv("PRUNEKIT_WORKERS")) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult RunExperiment(const ExperimentConfig &cfg, std::size_t workers) {
  cfg.Validate();
  const std::vector<PruneCell> prune = cfg.PruneCells();
  const std::size_t n_seeds = cfg.seeds.size();

  struct SeedState {
    std::string error;
    SeedData data;
    Network baseline;
    std::map<std::pair<SaliencyMethod, std::size_t>, SaliencyReport> reports;
    std::map<std::pair<SaliencyMethod, std::size_t>, std::string> report_errors;
    std::map<std::string, AdaptResult> adapted;
  };
  std::vector<SeedState> state(n_seeds);
  std::vector<CellOutcome> baseline_cells(n_seeds);

  ParallelFor(n_seeds, workers, [&](std::size_t s) {
    const unsigned long long seed = cfg.seeds[s];
    CellOutcome &out = baseline_cells[s];
    out.id = "baseline";
    out.seed = seed;
    state[s].error = Guard([&] {
      state[s].data = MakeSeedData(cfg, seed);
      state[s].baseline = TrainBaseline(cfg, state[s].data, seed);
      out.in_error = Evaluate(state[s].baseline, state[s].data.eval_in);
      out.out_error = Evaluate(state[s].baseline, state[s].data.eval_out);
    });
    out.ok = state[s].error.empty();
    out.error = state[s].error;
  });

  std::set<std::pair<SaliencyMethod, std::size_t>> keys;
  for (const PruneCell &c : prune)
    for (std::size_t l : c.layers) keys.insert({c.method, l});
  for (const AdaptCell &a : cfg.adaptations)
    if (a.plan.variant == AdaptVariant::kModelB)
      for (std::size_t l : a.plan.layers) keys.insert({a.plan.method, l});
  const std::vector<std::pair<SaliencyMethod, std::size_t>> key_list(keys.begin(), keys.end());
  std::vector<std::optional<SaliencyReport>> reports(n_seeds * key_list.size());
  std::vector<std::string> report_errors(reports.size());
  ParallelFor(reports.size(), workers, [&](std::size_t i) {
    const std::size_t s = i / key_list.size();
    if (!state[s].error.empty()) return;
    const auto [method, layer] = key_list[i % key_list.size()];
    report_errors[i] = Guard([&] {
      reports[i] = ComputeSaliency(method, state[s].baseline, layer, state[s].data.cv, cfg.mi);
    });
  });
  for (std::size_t i = 0; i < reports.size(); ++i) {
    SeedState &st = state[i / key_list.size()];
    const auto key = key_list[i % key_list.size()];
    if (reports[i]) st.reports.emplace(key, std::move(*reports[i]));
    else if (!report_errors[i].empty()) st.report_errors.emplace(key, report_errors[i]);
  }

  auto reports_for = [](const SeedState &st, SaliencyMethod method,
                        std::span<const std::size_t> layers) {
    std::vector<SaliencyReport> out;
    for (std::size_t l : layers) {
      if (l + 1 >= st.baseline.num_layers())
        throw InvalidInput("layer " + std::to_string(l + 1) + " is not a hidden layer (network has " +
                           std::to_string(st.baseline.num_layers() - 1) + ")");
      const auto key = std::pair{method, l};
      if (const auto e = st.report_errors.find(key); e != st.report_errors.end())
        throw InvalidInput("saliency " + ToString(method) + " for layer " + std::to_string(l + 1) +
                           " failed: " + e->second);
      out.push_back(st.reports.at(key));
    }
    return out;
  };

  auto run_adapt = [&](SeedState &st, const AdaptCell &cell, unsigned long long seed,
                       CellOutcome &out) -> std::optional<AdaptResult> {
    std::optional<AdaptResult> result;
    out.error = Guard([&] {
      if (!st.error.empty()) throw InvalidInput("baseline failed: " + st.error);
      AdaptConfig ac = cfg.adapt;
      ac.seed = DeriveSeed(seed, 30);
      ac.data_mix = cell.mix();
      const AdaptResult *predecessor = nullptr;
      if (cell.plan.variant == AdaptVariant::kModelB) {
        PrunePlan plan;
        for (std::size_t l : cell.plan.layers)
          plan.layers.push_back({l, cell.plan.method, Band::kBoth, cell.plan.hypo_pct,
                                 cell.plan.hyper_pct, 0.0});
        const PruneMask mask =
            BuildMask(st.baseline, reports_for(st, cell.plan.method, cell.plan.layers), plan);
        ac.update_mask = NeuronSelection::FromPruneMask(mask);
        out.hidden_pct = mask.hidden_percent();
      } else if (cell.plan.variant == AdaptVariant::kModelC) {
        const auto it = st.adapted.find(cell.from);
        if (it == st.adapted.end()) throw InvalidInput("predecessor '" + cell.from + "' failed");
        predecessor = &it->second;
      }
      result = Adapt(st.baseline, st.data.adapt, st.data.train, cell.plan, ac, predecessor);
      out.in_error = Evaluate(result->net, st.data.eval_in);
      out.out_error = Evaluate(result->net, st.data.eval_out);
    });
    out.ok = out.error.empty();
    return out.ok ? result : std::nullopt;
  };

  // Cells that depend only on the baseline.
  std::vector<const AdaptCell *> independent, dependent;
  for (const AdaptCell &a : cfg.adaptations)
    (a.plan.variant == AdaptVariant::kModelC ? dependent : independent).push_back(&a);
  const std::size_t per_seed = prune.size() + independent.size();
  std::vector<CellOutcome> outcomes(n_seeds * per_seed);
  std::vector<std::optional<AdaptResult>> adapted(outcomes.size());
  ParallelFor(outcomes.size(), workers, [&](std::size_t i) {
    const std::size_t s = i / per_seed;
    const std::size_t k = i % per_seed;
    SeedState &st = state[s];
    CellOutcome &out = outcomes[i];
    out.seed = cfg.seeds[s];
    if (k < prune.size()) {
      const PruneCell &cell = prune[k];
      out.id = cell.id;
      out.error = Guard([&] {
        if (!st.error.empty()) throw InvalidInput("baseline failed: " + st.error);
        const PruneMask mask = BuildMask(st.baseline, reports_for(st, cell.method, cell.layers),
                                         cell.plan());
        const Network pruned = ApplyMask(st.baseline, mask);
        out.hidden_pct = mask.hidden_percent();
        out.in_error = Evaluate(pruned, st.data.eval_in);
        out.out_error = Evaluate(pruned, st.data.eval_out);
      });
      out.ok = out.error.empty();
    } else {
      const AdaptCell &cell = *independent[k - prune.size()];
      out.id = cell.id;
      adapted[i] = run_adapt(st, cell, out.seed, out);
    }
  });
  for (std::size_t i = 0; i < adapted.size(); ++i)
    if (adapted[i]) state[i / per_seed].adapted.emplace(outcomes[i].id, std::move(*adapted[i]));

  std::vector<CellOutcome> later(n_seeds * dependent.size());
  ParallelFor(later.size(), workers, [&](std::size_t i) {
    const std::size_t s = i / dependent.size();
    CellOutcome &out = later[i];
    out.seed = cfg.seeds[s];
    out.id = dependent[i % dependent.size()]->id;
    run_adapt(state[s], *dependent[i % dependent.size()], out.seed, out);
  });

  ExperimentResult result;
  result.cells = baseline_cells;
  result.cells.insert(result.cells.end(), outcomes.begin(), outcomes.end());
  result.cells.insert(result.cells.end(), later.begin(), later.end());

  auto aggregate = [&](ResultRow row) {
    std::vector<double> in, out, hidden;
    for (const CellOutcome &c : result.cells) {
      if (c.id != row.id) continue;
      if (!c.ok) {
        ++row.failures;
        continue;
      }
      in.push_back(c.in_error);
      out.push_back(c.out_error);
      hidden.push_back(c.hidden_pct);
    }
    row.seeds = in.size();
    std::tie(row.in_mean, row.in_std) = MeanStd(in);
    std::tie(row.out_mean, row.out_std) = MeanStd(out);
    row.hidden_pct = hidden.empty() ? std::numeric_limits<double>::quiet_NaN() : hidden.front();
    result.table.rows.push_back(std::move(row));
  };
  aggregate({.id = "baseline", .kind = "baseline", .method = "-", .band = "-", .layers = "-"});
  for (const PruneCell &c : prune)
    aggregate({.id = c.id,
               .kind = "prune",
               .method = ToString(c.method),
               .band = ToString(c.band),
               .layers = JoinLayers(c.layers),
               .pct = c.pct()});
  for (const AdaptCell &a : cfg.adaptations) {
    const bool selective = a.plan.variant == AdaptVariant::kModelB;
    aggregate({.id = a.id,
               .kind = "adapt",
               .method = ToString(a.plan.variant),
               .band = selective ? "both" : "-",
               .layers = selective ? JoinLayers(a.plan.layers) : "all",
               .pct = selective ? a.plan.hypo_pct + a.plan.hyper_pct : 0.0});
  }
  std::sort(result.table.rows.begin(), result.table.rows.end(),
            [](const ResultRow &a, const ResultRow &b) { return a.id < b.id; });

  auto write = [](const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + path);
    f << text;
  };
  if (!cfg.csv_path.empty()) write(cfg.csv_path, RenderCsv(result.table));
  if (!cfg.text_path.empty()) write(cfg.text_path, RenderText(result.table, cfg.name));
  return result;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string RenderCsv(const ResultTable &table) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const ResultRow &r : table.rows) {
    out += r.id + "," + r.kind + "," + r.method + "," + r.band + "," + r.layers + "," +
           FormatDouble(r.pct) + "," + FormatDouble(r.hidden_pct) + "," +
           std::to_string(r.seeds) + "," + std::to_string(r.failures) + "," +
           FormatDouble(r.in_mean) + "," + FormatDouble(r.in_std) + "," +
           FormatDouble(r.out_mean) + "," + FormatDouble(r.out_std) + "\n";
  }
  return out;
}

ResultTable ParseCsv(const std::string &csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw InvalidInput("csv: missing or unexpected header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
      f.push_back(line.substr(start, pos - start));
    f.push_back(line.substr(start));
    if (f.size() != 13) throw InvalidInput("csv: expected 13 fields, got " + std::to_string(f.size()));
    table.rows.push_back({f[0], f[1], f[2], f[3], f[4], ParseDouble(f[5]), ParseDouble(f[6]),
                          ParseCount(f[7]), ParseCount(f[8]), ParseDouble(f[9]),
                          ParseDouble(f[10]), ParseDouble(f[11]), ParseDouble(f[12])});
  }
  return table;
}

std::string RenderText(const ResultTable &table, const std::string &title) {
  if (table.rows.empty()) throw InvalidInput("report: empty table");
  auto pct = [](double mean, double sd) {
    if (std::isnan(mean)) return std::string("failed");
    char buf[48];
    std::snprintf(buf, sizeof buf, "%6.2f (%.2f)", 100.0 * mean, 100.0 * sd);
    return std::string(buf);
  };
  const std::vector<std::string> head{"id", "method", "band", "layers", "pct", "hidden%",
                                      "in-domain FER", "out-of-domain FER", "n", "fail"};
  std::vector<std::vector<std::string>> cells{head};
  for (const ResultRow &r : table.rows) {
    char p[32], h[32];
    std::snprintf(p, sizeof p, "%g", r.pct);
    std::snprintf(h, sizeof h, "%.2f", r.hidden_pct);
    cells.push_back({r.id, r.method, r.band, r.layers, p, std::isnan(r.hidden_pct) ? "-" : h,
                     pct(r.in_mean, r.in_std), pct(r.out_mean, r.out_std),
                     std::to_string(r.seeds), std::to_string(r.failures)});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto &row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  if (!title.empty()) out += title + "\n";
  out += "metric: frame error rate in %, mean (sample std) over seeds\n\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const std::string &v = cells[r][c];
      const std::string pad(width[c] - v.size(), ' ');
      line += c < 4 ? v + pad : pad + v;
      if (c + 1 < cells[r].size()) line += "  ";
    }
    out += line + "\n";
    if (r == 0) out += std::string(line.size(), '-') + "\n";
  }
  return out;
}

std::string Render(const ResultTable &table, const std::string &format) {
  if (table.rows.empty()) throw InvalidInput("report: empty table");
  if (format == "csv") return RenderCsv(table);
  if (format == "text") return RenderText(table);
  throw InvalidInput("unknown report format '" + format + "' (expected csv or text)");
}

}  // namespace prunekit
