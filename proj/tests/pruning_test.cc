// tests/pruning_test.cc

#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.h"
#include "prunekit/error.h"
#include "prunekit/pruning.h"

using namespace prunekit;

namespace {

SaliencyReport RandomReport(std::size_t layer, SaliencyMethod m, std::size_t width,
                            std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(width);
  for (double &v : s) v = u(rng);
  return MakeReport(layer, m, s);
}

PruneMask RandomMask(const Network &net, std::mt19937_64 &rng) {
  PruneMask m = PruneMask::AllKept(net);
  for (std::size_t i = 0; i + 1 < net.num_layers(); ++i) {
    for (std::size_t n = 0; n < m.keep[i].size(); ++n) m.keep[i][n] = rng() % 3 != 0;
    m.keep[i][rng() % m.keep[i].size()] = true;
  }
  return m;
}

}  // namespace

TEST_CASE("build_mask: 2% hypo of a 2048-wide layer removes 41 neurons") {
  const Network net = Network::Random(8, {2048, 16}, 4, Activation::kSigmoid,
                                      Activation::kSoftmax, 1);
  std::mt19937_64 rng(1);
  const std::vector<SaliencyReport> reports{RandomReport(0, SaliencyMethod::kMi, 2048, rng)};
  const std::size_t layers[] = {0};
  const PruneMask mask = BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kMi,
                                                                    Band::kHypo, 2, layers));
  CHECK(mask.pruned_in(0) == 41);
  CHECK(mask.pruned_in(1) == 0);
  CHECK(mask.pruned_in(2) == 0);
  CHECK(mask.provenance.size() == 1);
  CHECK(mask.provenance[0].pruned == 41);

  const Network smaller = StructuralPrune(net, mask);
  CHECK(smaller.layer(0).out_width() == 2007);
  CHECK(smaller.layer(1).in_width() == 2007);
  CHECK(smaller.parameter_count() < net.parameter_count());
}

TEST_CASE("build_mask: zero percentages keep everything; determinism") {
  std::mt19937_64 rng(2);
  const Network net = oracle::RandomNet(rng, 5, {20, 20, 10}, 3, Activation::kSigmoid,
                                        Activation::kSoftmax);
  std::vector<SaliencyReport> reports;
  for (std::size_t l = 0; l < 3; ++l)
    reports.push_back(RandomReport(l, SaliencyMethod::kObs, net.layer(l).out_width(), rng));
  const std::size_t all[] = {0, 1, 2};
  CHECK(BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kObs, Band::kBoth, 0, all))
            .all_kept());
  const PrunePlan plan = PrunePlan::HyperHypo(SaliencyMethod::kObs, all, 3);
  const PruneMask a = BuildMask(net, reports, plan);
  const PruneMask b = BuildMask(net, reports, plan);
  CHECK(a.keep == b.keep);
}

TEST_CASE("build_mask: three-layer hyper+hypo plan uses 8+4, 8+4, 2+2") {
  const std::size_t all[] = {0, 1, 2};
  const PrunePlan plan = PrunePlan::HyperHypo(SaliencyMethod::kMi, all, 3);
  REQUIRE(plan.layers.size() == 3);
  CHECK(plan.layers[0].hypo_pct == 8);
  CHECK(plan.layers[0].hyper_pct == 4);
  CHECK(plan.layers[1].hypo_pct == 8);
  CHECK(plan.layers[1].hyper_pct == 4);
  CHECK(plan.layers[2].hypo_pct == 2);
  CHECK(plan.layers[2].hyper_pct == 2);

  const Network net = Network::Random(6, {128, 128, 128}, 5, Activation::kSigmoid,
                                      Activation::kSoftmax, 3);
  std::mt19937_64 rng(3);
  std::vector<SaliencyReport> reports;
  for (std::size_t l = 0; l < 3; ++l) reports.push_back(RandomReport(l, SaliencyMethod::kMi, 128, rng));
  const PruneMask mask = BuildMask(net, reports, plan);
  CHECK(mask.pruned_in(0) == 15);
  CHECK(mask.pruned_in(1) == 15);
  CHECK(mask.pruned_in(2) == 6);
  CHECK(mask.hidden_percent() == doctest::Approx(100.0 * 36 / 384));
  const PruneMask back = MaskFromJson(nlohmann::json::parse(MaskToJson(mask).dump()));
  CHECK(back.keep == mask.keep);
  CHECK(back.provenance.size() == 3);
}

TEST_CASE("build_mask: mid band takes the centre of an independent sort") {
  std::mt19937_64 rng(4);
  const Network net = Network::Random(6, {128, 32}, 4, Activation::kSigmoid, Activation::kSoftmax, 4);
  const SaliencyReport r = RandomReport(0, SaliencyMethod::kMbp, 128, rng);
  const std::size_t layers[] = {0};
  const PruneMask mask = BuildMask(net, std::vector<SaliencyReport>{r},
                                   PrunePlan::Uniform(SaliencyMethod::kMbp, Band::kMid, 5, layers));
  std::vector<std::pair<double, std::size_t>> sorted;
  for (std::size_t n = 0; n < 128; ++n) sorted.emplace_back(r.scores[n], n);
  std::sort(sorted.begin(), sorted.end());
  std::set<std::size_t> expected;
  for (std::size_t i = 61; i < 67; ++i) expected.insert(sorted[i].second);
  std::set<std::size_t> got;
  for (std::size_t n = 0; n < 128; ++n)
    if (!mask.keep[0][n]) got.insert(n);
  CHECK(got == expected);
}

TEST_CASE("build_mask: rejects output-layer plans, oversize bands and missing reports") {
  std::mt19937_64 rng(5);
  const Network net = oracle::RandomNet(rng, 4, {10, 10}, 3, Activation::kSigmoid,
                                        Activation::kSoftmax);
  std::vector<SaliencyReport> reports{RandomReport(0, SaliencyMethod::kMi, 10, rng),
                                      RandomReport(1, SaliencyMethod::kMi, 10, rng)};
  const std::size_t out[] = {2};
  CHECK_THROWS_AS(BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kMi, Band::kHypo, 2, out)),
                  InvalidInput);
  PrunePlan oversize;
  oversize.layers.push_back({0, SaliencyMethod::kMi, Band::kBoth, 60, 50, 0});
  CHECK_THROWS_AS(BuildMask(net, reports, oversize), InvalidInput);
  const std::size_t first[] = {0};
  CHECK_THROWS_AS(BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kObs, Band::kHypo, 10, first)),
                  InvalidInput);
  CHECK_THROWS_AS(BuildMask(net, reports, PrunePlan::Uniform(SaliencyMethod::kMi, Band::kMid, 100, first)),
                  InvalidInput);
}

TEST_CASE("apply_mask: all-true is bit identical; dead fan-out changes nothing") {
  std::mt19937_64 rng(6);
  Network net = oracle::RandomNet(rng, 4, {6, 5}, 3, Activation::kSigmoid, Activation::kSoftmax);
  const Eigen::MatrixXd x = oracle::RandomMatrix(10, 4, rng);
  const Eigen::MatrixXd base = Predict(net, x);
  CHECK(Predict(ApplyMask(net, PruneMask::AllKept(net)), x) == base);
  CHECK(StructuralPrune(net, PruneMask::AllKept(net)) == net);

  net.mutable_layer(1).weights.col(2).setZero();
  const Eigen::MatrixXd before = Predict(net, x);
  PruneMask mask = PruneMask::AllKept(net);
  mask.keep[0][2] = false;
  CHECK(Predict(ApplyMask(net, mask), x) == before);
}

TEST_CASE("apply_mask: hand-checked width-4 layer equals surgery") {
  DenseLayer hidden;
  hidden.weights.resize(4, 2);
  hidden.weights << 1, 0, 0, 1, 1, 1, -1, 2;
  hidden.biases = Eigen::VectorXd::Zero(4);
  hidden.activation = Activation::kLinear;
  DenseLayer out;
  out.weights.resize(1, 4);
  out.weights << 1, 2, 3, 4;
  out.biases = Eigen::VectorXd::Zero(1);
  out.activation = Activation::kLinear;
  const Network net(2, {hidden, out});
  PruneMask mask = PruneMask::AllKept(net);
  mask.keep[0][2] = false;
  const Network cut = StructuralPrune(net, mask);
  REQUIRE(cut.layer(1).in_width() == 3);
  CHECK(cut.layer(1).weights(0, 2) == 4.0);
  Eigen::MatrixXd x(1, 2);
  x << 1, 1;
  // 1*1 + 2*1 + 4*(-1 + 2) = 7 once neuron 2 (value 2, weight 3) is gone.
  CHECK(Predict(cut, x)(0, 0) == 7.0);
  CHECK(Predict(ApplyMask(net, mask), x)(0, 0) == 7.0);

  std::mt19937_64 rng(7);
  const Eigen::MatrixXd many = oracle::RandomMatrix(20, 2, rng);
  CHECK((Predict(cut, many) - Predict(ApplyMask(net, mask), many)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mask and surgery agree on random nets; masking is idempotent") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Network net = oracle::RandomNet(rng, 5, {9, 7, 6}, 4,
                                    trial % 2 ? Activation::kRelu : Activation::kSigmoid,
                                    Activation::kSoftmax);
    const PruneMask mask = RandomMask(net, rng);
    const Eigen::MatrixXd x = oracle::RandomMatrix(8, 5, rng);
    const Network masked = ApplyMask(net, mask);
    const Network cut = StructuralPrune(net, mask);
    CHECK((Predict(masked, x) - Predict(cut, x)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ApplyMask(masked, mask) == masked);
    if (!mask.all_kept()) CHECK(cut.parameter_count() < net.parameter_count());
  }
}

TEST_CASE("apply_mask and surgery reject masks that empty a layer") {
  std::mt19937_64 rng(9);
  const Network net = oracle::RandomNet(rng, 3, {2}, 2, Activation::kSigmoid, Activation::kSoftmax);
  PruneMask mask = PruneMask::AllKept(net);
  mask.keep[0] = {false, false};
  CHECK_THROWS_AS(ApplyMask(net, mask), InvalidInput);
  CHECK_THROWS_AS(StructuralPrune(net, mask), InvalidInput);
  PruneMask wrong = PruneMask::AllKept(net);
  wrong.keep[0].push_back(true);
  CHECK_THROWS_AS(ApplyMask(net, wrong), InvalidInput);
}
