// tests/acceptance.cc
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Usage: acceptance [experiment.json]
// The default experiment config drives criteria 7 to 10.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oracles.h"
#include "prunekit/adaptation.h"
#include "prunekit/harness.h"
#include "prunekit/pruning.h"
#include "prunekit/saliency.h"

using namespace prunekit;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kMiAbsTol = 1e-12;
constexpr double kObsRelTol = 1e-3;
constexpr double kObsFdStep = 1e-3;
constexpr double kSurgeryAbsTol = 1e-12;
constexpr double kGradRuntimeSec = 10.0;
constexpr double kOrderingRuntimeSec = 600.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void Report(int id, const std::string &name, const std::function<Verdict()> &check) {
  Verdict v;
  try {
    v = check();
  } catch (const std::exception &e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  if (!v.pass) ++failures;
  std::printf("criterion %2d %s  %s: %s\n", id, v.pass ? "PASS" : "FAIL", name.c_str(),
              v.detail.c_str());
  std::fflush(stdout);
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Fmt(const char *f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Verdict GradientCheck() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> hidden;
    for (int i = 0; i < 1 + trial % 3; ++i) hidden.push_back(2 + rng() % 5);
    const std::size_t in = 2 + rng() % 5, out = 2 + rng() % 4;
    const Activation act = trial % 4 == 3 ? Activation::kRelu : Activation::kSigmoid;
    const Activation out_act = trial % 2 ? Activation::kLinear : Activation::kSoftmax;
    Network net = oracle::RandomNet(rng, in, hidden, out, act, out_act);
    const Eigen::MatrixXd x = oracle::RandomMatrix(8, static_cast<Eigen::Index>(in), rng);
    std::vector<int> y;
    for (int i = 0; i < 8; ++i) y.push_back(static_cast<int>(rng() % out));
    const double l2 = trial % 3 == 0 ? 0.001 : 0.0;
    const Gradients g = Backward(net, x, y, l2).gradients;
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
      const DenseLayer &l = net.layer(layer);
      const auto nw = static_cast<std::size_t>(l.weights.size());
      for (std::size_t p = 0; p < nw + l.out_width(); ++p) {
        Network plus = net, minus = net;
        oracle::Param(plus, layer, p) += kGradEps;
        oracle::Param(minus, layer, p) -= kGradEps;
        const double numeric =
            (oracle::Loss(plus, x, y, l2) - oracle::Loss(minus, x, y, l2)) / (2 * kGradEps);
        const double analytic =
            p < nw ? g.weights[layer](static_cast<Eigen::Index>(p / l.in_width()),
                                      static_cast<Eigen::Index>(p % l.in_width()))
                   : g.biases[layer](static_cast<Eigen::Index>(p - nw));
        worst = std::max(worst, oracle::RelativeError(analytic, numeric));
      }
    }
  }
  const double secs = Seconds(start);
  return {worst < kGradRelTol && secs < kGradRuntimeSec,
          Fmt("20 nets, every parameter; max relative error %.2e, %.2f s", worst, secs)};
}

Verdict MiOracleCheck() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + rng() % 6;
    std::vector<std::size_t> hidden{1 + rng() % 6, 1 + rng() % 6};
    const Network net = oracle::RandomNet(rng, in, hidden, 3, Activation::kSigmoid,
                                          Activation::kSoftmax);
    const int q = 2 * (1 + static_cast<int>(rng() % 4));
    const std::size_t t = static_cast<std::size_t>(2 * q) + rng() % (41 - 2 * static_cast<std::size_t>(q));
    const std::size_t cut = static_cast<std::size_t>(q) + rng() % (t - 2 * static_cast<std::size_t>(q) + 1);
    FrameCorpus calib;
    calib.frames = oracle::RandomMatrix(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(in), rng);
    calib.labels.assign(t, 0);
    calib.segments = {{0, cut}, {cut, t}};
    calib.layout = {in, 0, 15.0};
    const std::size_t layer = rng() % 2;

    // Oracle traces from the per-neuron forward pass.
    Eigen::MatrixXd tin(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(net.layer(layer).in_width()));
    Eigen::MatrixXd tout(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(hidden[layer]));
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(t); ++r) {
      const auto acts = oracle::ForwardFrame(net, oracle::Row(calib.frames, r));
      for (Eigen::Index c = 0; c < tin.cols(); ++c) tin(r, c) = acts[layer][static_cast<std::size_t>(c)];
      for (Eigen::Index c = 0; c < tout.cols(); ++c) tout(r, c) = acts[layer + 1][static_cast<std::size_t>(c)];
    }
    const auto want = oracle::MiTriple(tin, tout, calib.segments, q);
    const SaliencyReport got = MiSaliency(net, layer, calib, MIConfig{q, 0});
    for (std::size_t n = 0; n < want.size(); ++n)
      worst = std::max(worst, std::abs(got.scores[n] - want[n]));
  }
  return {worst < kMiAbsTol, Fmt("50 instances; max |delta| %.2e", worst)};
}

Verdict ObsCheck() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = oracle::RandomNet(rng, 3, {5, 4}, 3, Activation::kLinear,
                                          Activation::kLinear);
    FrameCorpus calib;
    calib.frames = oracle::RandomMatrix(12, 3, rng);
    calib.labels.resize(12);
    for (int &y : calib.labels) y = static_cast<int>(rng() % 3);
    calib.segments = {{0, 12}};
    calib.layout = {3, 0, 15.0};
    for (std::size_t layer = 0; layer < 2; ++layer) {
      const SaliencyReport got = ObsSaliency(net, layer, calib);
      const DenseLayer &l = net.layer(layer);
      for (std::size_t n = 0; n < l.out_width(); ++n) {
        // Closed form sum of w^2 H_qq / 2 with H_qq from second differences.
        double want = 0.0;
        for (std::size_t j = 0; j <= l.in_width(); ++j) {
          const std::size_t p = j < l.in_width() ? n * l.in_width() + j
                                                 : static_cast<std::size_t>(l.weights.size()) + n;
          Network plus = net, minus = net;
          oracle::Param(plus, layer, p) += kObsFdStep;
          oracle::Param(minus, layer, p) -= kObsFdStep;
          const double h = (oracle::Loss(plus, calib.frames, calib.labels, 0) -
                            2 * oracle::Loss(net, calib.frames, calib.labels, 0) +
                            oracle::Loss(minus, calib.frames, calib.labels, 0)) /
                           (kObsFdStep * kObsFdStep);
          Network copy = net;
          const double w = oracle::Param(copy, layer, p);
          want += 0.5 * w * w * h;
        }
        worst = std::max(worst, oracle::RelativeError(got.scores[n], want));
      }
    }
  }
  return {worst < kObsRelTol, Fmt("10 linear squared-error nets; max relative error %.2e", worst)};
}

Verdict PercentToCountCheck() {
  const std::size_t direct = PercentToCount(2.0, 2048);
  const Network net = Network::Random(8, {2048, 16}, 4, Activation::kSigmoid,
                                      Activation::kSoftmax, 7);
  const std::vector<SaliencyReport> reports{MbpSaliency(net, 0)};
  const std::size_t layers[] = {0};
  const PruneMask mask =
      BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kMbp, Band::kHypo, 2.0, layers));
  return {direct == 41 && mask.pruned_in(0) == 41,
          "count " + std::to_string(direct) + ", mask prunes " + std::to_string(mask.pruned_in(0))};
}

Verdict SurgeryCheck() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> hidden;
    for (int i = 0; i < 1 + trial % 3; ++i) hidden.push_back(2 + rng() % 9);
    const std::size_t in = 1 + rng() % 6;
    const Network net = oracle::RandomNet(rng, in, hidden, 2 + rng() % 4,
                                          trial % 2 ? Activation::kRelu : Activation::kSigmoid,
                                          Activation::kSoftmax);
    PruneMask mask = PruneMask::AllKept(net);
    for (std::size_t i = 0; i + 1 < net.num_layers(); ++i) {
      for (std::size_t n = 0; n < mask.keep[i].size(); ++n) mask.keep[i][n] = rng() % 3 != 0;
      mask.keep[i][rng() % mask.keep[i].size()] = true;
    }
    const Eigen::MatrixXd x = oracle::RandomMatrix(6, static_cast<Eigen::Index>(in), rng);
    const Eigen::MatrixXd a = Predict(ApplyMask(net, mask), x);
    const Eigen::MatrixXd b = Predict(StructuralPrune(net, mask), x);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return {worst < kSurgeryAbsTol, Fmt("100 triples; max |delta| %.2e", worst)};
}

// Small in-distribution setup shared by criteria 6 and 11.
struct SmallSetup {
  ExperimentConfig cfg;
  SeedData data;
  Network baseline;

  SmallSetup() {
    cfg.data = {3000, 3000, 1000, 500, 500, 2000, 500};
    cfg.train.max_epochs = 6;
    cfg.adapt.max_epochs = 3;
    data = MakeSeedData(cfg, 1);
    baseline = TrainBaseline(cfg, data, 1);
  }
};

Verdict FrozenCheck(const SmallSetup &s) {
  AdaptationPlan plan;
  plan.variant = AdaptVariant::kModelB;
  plan.layers = {0, 1};
  plan.mi = s.cfg.mi;
  AdaptConfig ac = s.cfg.adapt;
  ac.seed = 9;
  const NeuronSelection sel = SelectiveNeurons(s.baseline, s.data.cv, plan);
  ac.update_mask = sel;
  const AdaptResult r = Adapt(s.baseline, s.data.adapt, FrameCorpus{}, plan, ac);
  std::size_t frozen_changed = 0, selected_changed = 0, frozen_params = 0;
  for (std::size_t i = 0; i < s.baseline.num_layers(); ++i) {
    const DenseLayer &a = s.baseline.layer(i);
    const DenseLayer &b = r.net.layer(i);
    for (Eigen::Index n = 0; n < a.weights.rows(); ++n) {
      const bool selected = sel.update[i][static_cast<std::size_t>(n)];
      bool same = a.biases(n) == b.biases(n);
      for (Eigen::Index j = 0; j < a.weights.cols(); ++j) same &= a.weights(n, j) == b.weights(n, j);
      if (selected) {
        selected_changed += !same;
      } else {
        frozen_changed += !same;
        frozen_params += static_cast<std::size_t>(a.weights.cols()) + 1;
      }
    }
  }
  bool layer_scope = true;
  for (std::size_t i = 2; i < sel.update.size(); ++i)
    for (bool b : sel.update[i]) layer_scope &= !b;
  return {frozen_changed == 0 && selected_changed > 0 && layer_scope,
          std::to_string(sel.count()) + " selected neurons in layers 1-2, " +
              std::to_string(selected_changed) + " of them moved; " +
              std::to_string(frozen_params) + " frozen parameters, " +
              std::to_string(frozen_changed) + " frozen neurons changed"};
}

Verdict ReductionCheck(const SmallSetup &s) {
  AdaptationPlan a, d;
  d.variant = AdaptVariant::kModelD;
  bool identical = true;
  for (int epochs = 1; epochs <= s.cfg.adapt.max_epochs; ++epochs) {
    AdaptConfig ac = s.cfg.adapt;
    ac.seed = 77;
    ac.max_epochs = epochs;
    const AdaptResult ra = Adapt(s.baseline, s.data.adapt, s.data.train, a, ac);
    ac.data_mix = 0.0;
    const AdaptResult rd = Adapt(s.baseline, s.data.adapt, s.data.train, d, ac);
    identical &= ra.net == rd.net && ra.history.size() == rd.history.size();
    for (std::size_t e = 0; identical && e < ra.history.size(); ++e)
      identical &= ra.history[e].train_loss == rd.history[e].train_loss;
  }
  return {identical, "parameters after every epoch 1.." + std::to_string(s.cfg.adapt.max_epochs) +
                         (identical ? " are bit-identical" : " differ")};
}

struct SeedCounts {
  int hits = 0;
  std::string detail;
};

}  // namespace

int main(int argc, char **argv) {
  const std::string config_path =
      argc > 1 ? argv[1] : std::string(PRUNEKIT_SOURCE_DIR) + "/configs/default.json";

  Report(1, "gradient check", GradientCheck);
  Report(2, "MI oracle", MiOracleCheck);
  Report(3, "OBS exactness", ObsCheck);
  Report(4, "percent to count", PercentToCountCheck);
  Report(5, "mask and surgery equivalence", SurgeryCheck);

  std::optional<SmallSetup> setup;
  auto small = [&]() -> const SmallSetup & {
    if (!setup) setup.emplace();
    return *setup;
  };
  Report(6, "frozen-parameter invariance", [&] { return FrozenCheck(small()); });

  ExperimentConfig cfg = LoadExperimentConfig(config_path);
  cfg.csv_path.clear();
  cfg.text_path.clear();
  const std::size_t workers = WorkersFromEnv();
  const auto start = std::chrono::steady_clock::now();
  std::optional<ExperimentResult> run;
  std::string run_error;
  try {
    run = RunExperiment(cfg, workers);
  } catch (const std::exception &e) {
    run_error = e.what();
  }
  const double run_secs = Seconds(start);
  std::printf("info: default experiment '%s', %zu seeds, %zu workers, %.1f s, %zu failed cells\n",
              cfg.name.c_str(), cfg.seeds.size(), workers, run_secs, run ? run->failed() : 0);

  auto per_seed = [&](const std::function<bool(unsigned long long, std::string &)> &f) {
    if (!run) throw std::runtime_error("experiment did not run: " + run_error);
    SeedCounts c;
    for (unsigned long long seed : cfg.seeds) {
      std::string d;
      c.hits += f(seed, d);
      c.detail += (c.detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " + d;
    }
    return c;
  };
  auto cell = [&](const std::string &id, unsigned long long seed) {
    const CellOutcome *o = run->find(id, seed);
    if (!o) throw std::runtime_error("config has no cell " + id);
    if (!o->ok) throw std::runtime_error("cell " + id + " failed: " + o->error);
    return *o;
  };
  const int need = static_cast<int>(cfg.seeds.size());
  const int majority = static_cast<int>((2 * cfg.seeds.size() + 2) / 3);

  Report(7, "mid-band pruning hurts more than hypo-band pruning", [&] {
    for (const char *m : {"MBP", "OBS"}) {
      const auto info = per_seed([&](unsigned long long s, std::string &d) {
        const double hypo = cell(std::string("prune/") + m + "/hypo/L1/05", s).in_error;
        const double mid = cell(std::string("prune/") + m + "/mid/L1/05", s).in_error;
        d = Fmt("%.4f/%.4f", mid, hypo);
        return mid > hypo;
      });
      std::printf("info: %s mid/hypo in-domain error at 5%% of layer 1: %d/%d seeds (%s)\n", m,
                  info.hits, need, info.detail.c_str());
    }
    const auto c = per_seed([&](unsigned long long s, std::string &d) {
      const double hypo = cell("prune/MI/hypo/L1/05", s).in_error;
      const double mid = cell("prune/MI/mid/L1/05", s).in_error;
      d = Fmt("mid %.4f vs hypo %.4f", mid, hypo);
      return mid > hypo;
    });
    return Verdict{c.hits == need && run_secs < kOrderingRuntimeSec,
                   "MI, " + std::to_string(c.hits) + "/" + std::to_string(need) + " seeds (" +
                       c.detail + Fmt("); experiment %.0f s", run_secs)};
  });

  Report(8, "selective adaptation forgets less", [&] {
    const auto ba = per_seed([&](unsigned long long s, std::string &d) {
      const double base = cell("baseline", s).in_error;
      const double a = cell("adapt/A", s).in_error - base;
      const double b = cell("adapt/B", s).in_error - base;
      d = Fmt("B %+.4f vs A %+.4f", b, a);
      return b <= a;
    });
    const auto cb = per_seed([&](unsigned long long s, std::string &d) {
      const double b = cell("adapt/B", s).in_error;
      const double c = cell("adapt/C", s).in_error;
      d = Fmt("C %.4f vs B %.4f", c, b);
      return c <= b;
    });
    return Verdict{ba.hits >= majority && cb.hits >= majority,
                   "B<=A " + std::to_string(ba.hits) + "/" + std::to_string(need) + " (" +
                       ba.detail + "), C<=B " + std::to_string(cb.hits) + "/" +
                       std::to_string(need) + " (" + cb.detail + ")"};
  });

  Report(9, "adaptation reduces out-of-domain error", [&] {
    auto improves = [&](const std::string &id) {
      return per_seed([&](unsigned long long s, std::string &d) {
        const double base = cell("baseline", s).out_error;
        const double v = cell(id, s).out_error;
        d = Fmt("%.4f vs %.4f", v, base);
        return v < base;
      });
    };
    const auto a = improves("adapt/A");
    const auto b = improves("adapt/B");
    return Verdict{a.hits >= majority && b.hits >= majority,
                   "A " + std::to_string(a.hits) + "/" + std::to_string(need) + " (" + a.detail +
                       "), B " + std::to_string(b.hits) + "/" + std::to_string(need) + " (" +
                       b.detail + ")"};
  });

  Report(10, "reproducibility", [&] {
    if (!run) throw std::runtime_error("experiment did not run: " + run_error);
    const std::string first = RenderCsv(run->table);
    // Rerun with a different worker count; scheduling must not leak into results.
    const ExperimentResult again = RunExperiment(cfg, workers == 1 ? 2 : 1);
    const std::string second = RenderCsv(again.table);
    return Verdict{first == second, std::to_string(run->table.rows.size()) + " rows, " +
                                        std::to_string(first.size()) + " CSV bytes, " +
                                        (first == second ? "identical" : "different")};
  });

  Report(11, "Model D without mixing reduces to Model A", [&] { return ReductionCheck(small()); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
