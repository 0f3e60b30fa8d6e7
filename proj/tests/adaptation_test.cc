// tests/adaptation_test.cc

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.h"
#include "prunekit/adaptation.h"
#include "prunekit/error.h"

using namespace prunekit;

namespace {

FrameCorpus RandomCorpus(std::mt19937_64 &rng, std::size_t frames, std::size_t width,
                         int classes, std::size_t segment = 20) {
  FrameCorpus c;
  c.frames = oracle::RandomMatrix(static_cast<Eigen::Index>(frames),
                                  static_cast<Eigen::Index>(width), rng);
  c.labels.resize(frames);
  for (int &y : c.labels) y = static_cast<int>(rng() % static_cast<unsigned>(classes));
  for (std::size_t b = 0; b < frames; b += segment)
    c.segments.push_back({b, std::min(frames, b + segment)});
  c.layout = {width, 0, 15.0};
  return c;
}

Network Identity3() {
  DenseLayer l;
  l.weights = Eigen::MatrixXd::Identity(3, 3);
  l.biases = Eigen::VectorXd::Zero(3);
  l.activation = Activation::kSoftmax;
  return Network(3, {l});
}

// Flags of every parameter that differs, in oracle::Param order per layer.
std::vector<std::vector<bool>> ChangedNeurons(const Network &a, const Network &b) {
  std::vector<std::vector<bool>> out;
  for (std::size_t i = 0; i < a.num_layers(); ++i) {
    const DenseLayer &x = a.layer(i);
    const DenseLayer &y = b.layer(i);
    std::vector<bool> changed(x.out_width(), false);
    for (std::size_t n = 0; n < x.out_width(); ++n) {
      const auto r = static_cast<Eigen::Index>(n);
      bool any = x.biases(r) != y.biases(r);
      for (Eigen::Index c = 0; c < x.weights.cols(); ++c) any |= x.weights(r, c) != y.weights(r, c);
      changed[n] = any;
    }
    out.push_back(std::move(changed));
  }
  return out;
}

struct Fixture {
  std::mt19937_64 rng{17};
  Network net = oracle::RandomNet(rng, 6, {24, 24, 12}, 4, Activation::kSigmoid,
                                  Activation::kSoftmax, 0.5);
  FrameCorpus adaptation = RandomCorpus(rng, 200, 6, 4);
  FrameCorpus original = RandomCorpus(rng, 300, 6, 4);
};

}  // namespace

TEST_CASE("pseudo_label: argmax with lowest-index ties") {
  FrameCorpus c;
  c.frames.resize(2, 3);
  c.frames << 0.1, 2.3, -1.0, 0.0, 0.0, 0.0;
  c.labels = {2, 2};
  c.segments = {{0, 2}};
  c.layout = {3, 0, 15.0};
  const FrameCorpus labelled = PseudoLabel(Identity3(), c);
  CHECK(labelled.labels == std::vector<int>{1, 0});
  CHECK(labelled.frames == c.frames);
}

TEST_CASE("pseudo_label: loop-oracle argmax, order independence, errors") {
  std::mt19937_64 rng(3);
  const Network net = oracle::RandomNet(rng, 5, {7, 6}, 5, Activation::kSigmoid,
                                        Activation::kSoftmax);
  const FrameCorpus c = RandomCorpus(rng, 150, 5, 5);
  const FrameCorpus labelled = PseudoLabel(net, c);
  for (Eigen::Index t = 0; t < c.frames.rows(); ++t) {
    const auto out = oracle::ForwardFrame(net, oracle::Row(c.frames, t)).back();
    const auto best = std::max_element(out.begin(), out.end()) - out.begin();
    CHECK(labelled.labels[static_cast<std::size_t>(t)] == best);
  }
  std::vector<Eigen::Index> perm(c.size());
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  FrameCorpus shuffled = c;
  shuffled.frames = c.frames(perm, Eigen::all);
  const FrameCorpus relabelled = PseudoLabel(net, shuffled);
  for (std::size_t k = 0; k < perm.size(); ++k)
    CHECK(relabelled.labels[k] == labelled.labels[static_cast<std::size_t>(perm[k])]);
  CHECK(PseudoLabel(net, c).labels == labelled.labels);

  CHECK_THROWS_AS(PseudoLabel(net, FrameCorpus{}), InvalidInput);
  CHECK_THROWS_AS(PseudoLabel(net, RandomCorpus(rng, 10, 4, 5)), InvalidInput);
}

TEST_CASE("selective_update_step: empty and full selections") {
  Fixture f;
  const BackwardResult data = Backward(f.net, f.original.frames, f.original.labels, 0.0);
  const Network same = SelectiveUpdateStep(f.net, data.gradients, NeuronSelection::None(f.net),
                                           0.3, 0.001);
  CHECK(same == f.net);

  const BackwardResult with_l2 = Backward(f.net, f.original.frames, f.original.labels, 0.001);
  const Network full = SelectiveUpdateStep(f.net, data.gradients, NeuronSelection::All(f.net),
                                           0.3, 0.001);
  CHECK(full == SgdStep(f.net, with_l2.gradients, 0.3));
}

TEST_CASE("selective_update_step: changed parameters are exactly the selected neurons") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = oracle::RandomNet(rng, 4, {9, 8}, 3, Activation::kSigmoid,
                                          Activation::kSoftmax);
    const FrameCorpus c = RandomCorpus(rng, 40, 4, 3);
    const BackwardResult bw = Backward(net, c.frames, c.labels, 0.0);
    NeuronSelection sel = NeuronSelection::None(net);
    for (auto &layer : sel.update)
      for (std::size_t n = 0; n < layer.size(); ++n) layer[n] = rng() % 2 == 0;
    const Network out = SelectiveUpdateStep(net, bw.gradients, sel, 0.05, 0.01);
    CHECK(ChangedNeurons(net, out) == sel.update);
    // The selected rows follow the closed-form update.
    for (std::size_t i = 0; i < net.num_layers(); ++i)
      for (std::size_t n = 0; n < sel.update[i].size(); ++n) {
        if (!sel.update[i][n]) continue;
        const auto r = static_cast<Eigen::Index>(n);
        for (Eigen::Index col = 0; col < net.layer(i).weights.cols(); ++col) {
          const double w = net.layer(i).weights(r, col);
          CHECK(out.layer(i).weights(r, col) ==
                doctest::Approx(w - 0.05 * (bw.gradients.weights[i](r, col) + 0.01 * w))
                    .epsilon(1e-13));
        }
        CHECK(out.layer(i).biases(r) ==
              doctest::Approx(net.layer(i).biases(r) - 0.05 * bw.gradients.biases[i](r))
                  .epsilon(1e-13));
      }
  }
}

TEST_CASE("selective_update_step: shape errors") {
  Fixture f;
  const Gradients g = Gradients::ZerosLike(f.net);
  NeuronSelection bad = NeuronSelection::All(f.net);
  bad.update.pop_back();
  CHECK_THROWS_AS(SelectiveUpdateStep(f.net, g, bad, 0.1, 0.0), InvalidInput);
  bad = NeuronSelection::All(f.net);
  bad.update[0].push_back(true);
  CHECK_THROWS_AS(SelectiveUpdateStep(f.net, g, bad, 0.1, 0.0), InvalidInput);
}

TEST_CASE("adapt: zero epochs and empty Model B bands leave the model unchanged") {
  Fixture f;
  AdaptConfig cfg;
  cfg.max_epochs = 0;
  AdaptationPlan plan;
  CHECK(Adapt(f.net, f.adaptation, f.original, plan, cfg).net == f.net);

  cfg.max_epochs = 3;
  plan.variant = AdaptVariant::kModelB;
  plan.hypo_pct = 0.0;
  plan.hyper_pct = 0.0;
  const AdaptResult r = Adapt(f.net, f.adaptation, f.original, plan, cfg);
  CHECK(r.updated_neurons == 0);
  CHECK(r.net == f.net);
  CHECK(r.history.size() == 3);
}

TEST_CASE("adapt: learning rate halves every epoch") {
  Fixture f;
  AdaptConfig cfg;
  cfg.max_epochs = 10;
  const AdaptResult r = Adapt(f.net, f.adaptation, f.original, {}, cfg);
  REQUIRE(r.history.size() == 10);
  for (int e = 1; e <= 10; ++e) {
    CHECK(r.history[static_cast<std::size_t>(e - 1)].epoch == e);
    CHECK(r.history[static_cast<std::size_t>(e - 1)].lr == 0.004 / std::pow(2.0, e - 1));
  }
  const nlohmann::json j = HistoryToJson(r);
  CHECK(j["epochs"].size() == 10);
  CHECK(j["variant"] == "ModelA");
}

TEST_CASE("adapt: Model B freezes everything outside the MI hyper and hypo bands") {
  Fixture f;
  AdaptConfig cfg;
  cfg.max_epochs = 2;
  AdaptationPlan plan;
  plan.variant = AdaptVariant::kModelB;
  const NeuronSelection expected = SelectiveNeurons(f.net, f.original, plan);
  // 8% + 4% of 24 wide layers 1-2: 2 + 1 each; nothing in layer 3 or the output.
  CHECK(expected.count() == 6);
  CHECK(std::count(expected.update[2].begin(), expected.update[2].end(), true) == 0);
  CHECK(std::count(expected.update[3].begin(), expected.update[3].end(), true) == 0);

  const AdaptResult r = Adapt(f.net, f.adaptation, f.original, plan, cfg);
  CHECK(r.updated_neurons == 6);
  const auto changed = ChangedNeurons(f.net, r.net);
  for (std::size_t i = 0; i < changed.size(); ++i)
    for (std::size_t n = 0; n < changed[i].size(); ++n)
      if (!expected.update[i][n]) CHECK_FALSE(changed[i][n]);
  CHECK(changed != NeuronSelection::None(f.net).update);

  // An explicit update mask replaces the saliency decision.
  NeuronSelection one = NeuronSelection::None(f.net);
  one.update[1][3] = true;
  cfg.update_mask = one;
  const AdaptResult single = Adapt(f.net, f.adaptation, f.original, plan, cfg);
  CHECK(ChangedNeurons(f.net, single.net) == one.update);
}

TEST_CASE("adapt: Model D without mixing reproduces Model A exactly") {
  Fixture f;
  AdaptConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 11;
  AdaptationPlan a;
  AdaptationPlan d;
  d.variant = AdaptVariant::kModelD;
  const AdaptResult ra = Adapt(f.net, f.adaptation, f.original, a, cfg);
  const AdaptResult rd = Adapt(f.net, f.adaptation, f.original, d, cfg);
  CHECK(rd.net == ra.net);
  for (std::size_t e = 0; e < ra.history.size(); ++e)
    CHECK(rd.history[e].train_loss == ra.history[e].train_loss);

  cfg.data_mix = 0.5;
  const AdaptResult mixed = Adapt(f.net, f.adaptation, f.original, d, cfg);
  CHECK(mixed.stream_frames == f.adaptation.size() + 160);
  CHECK_FALSE(mixed.net == ra.net);
}

TEST_CASE("adapt: Model C continues from Model B") {
  Fixture f;
  AdaptConfig cfg;
  cfg.max_epochs = 2;
  AdaptationPlan b;
  b.variant = AdaptVariant::kModelB;
  const AdaptResult rb = Adapt(f.net, f.adaptation, f.original, b, cfg);
  AdaptationPlan c;
  c.variant = AdaptVariant::kModelC;
  AdaptConfig mix = cfg;
  mix.data_mix = c.default_mix();
  CHECK(mix.data_mix == 0.5);
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, f.original, c, mix), InvalidInput);
  const AdaptResult ra = Adapt(f.net, f.adaptation, f.original, {}, cfg);
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, f.original, c, mix, &ra), InvalidInput);

  const AdaptResult rc = Adapt(f.net, f.adaptation, f.original, c, mix, &rb);
  CHECK(rc.variant == AdaptVariant::kModelC);
  // Model C's starting point is Model B: zero epochs returns it unchanged.
  mix.max_epochs = 0;
  CHECK(Adapt(f.net, f.adaptation, f.original, c, mix, &rb).net == rb.net);
}

TEST_CASE("adapt: inconsistent plans and configs") {
  Fixture f;
  AdaptConfig cfg;
  cfg.data_mix = 0.5;
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, f.original, {}, cfg), InvalidInput);
  cfg.data_mix = 1.5;
  AdaptationPlan d;
  d.variant = AdaptVariant::kModelD;
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, f.original, d, cfg), InvalidInput);
  cfg = {};
  cfg.update_mask = NeuronSelection::All(f.net);
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, f.original, {}, cfg), InvalidInput);
  cfg = {};
  cfg.data_mix = 0.5;
  CHECK_THROWS_AS(Adapt(f.net, f.adaptation, FrameCorpus{}, d, cfg), InvalidInput);

  CHECK(AdaptVariantFromString("b") == AdaptVariant::kModelB);
  CHECK(AdaptVariantFromString("ModelD") == AdaptVariant::kModelD);
  CHECK_THROWS_AS(AdaptVariantFromString("E"), InvalidInput);
  CHECK(AdaptConfig{}.l2 == 0.001);
  CHECK(AdaptConfig{}.initial_lr == 0.004);
  CHECK(AdaptConfig{}.max_epochs == 10);
}
