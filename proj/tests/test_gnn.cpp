#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fleetgnn/gnn.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace fleetgnn;
using fleetgnn::testing::chain;
using fleetgnn::testing::random_network;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GnnConfig small(GnnKind kind, std::size_t layers, std::size_t hidden = 4, std::size_t heads = 1) {
  GnnConfig c;
  c.kind = kind;
  c.layers = layers;
  c.hidden_dim = hidden;
  c.heads = heads;
  return c;
}

Tensor random_features(Rng& rng, std::size_t n) {
  Tensor x({n, 3}, 0.0);
  for (double& v : x.values()) v = uniform01(rng);
  return x;
}

}  // namespace

TEST(GnnConfig, Validation) {
  EXPECT_THROW(small(GnnKind::Gcn, 0).check(), std::invalid_argument);
  EXPECT_THROW(small(GnnKind::Gat, 2, 4, 0).check(), std::invalid_argument);
  EXPECT_THROW(small(GnnKind::Gat, 2, 6, 4).check(), std::invalid_argument);
  EXPECT_EQ(parse_gnn_kind("gcn"), GnnKind::Gcn);
  EXPECT_THROW(parse_gnn_kind("sage"), std::invalid_argument);
}

TEST(GnnConfig, DefaultsMatchTheExperimentSetup) {
  GnnConfig c;
  EXPECT_EQ(c.kind, GnnKind::Gat);
  EXPECT_EQ(c.layers, 8u);
  EXPECT_EQ(c.heads, 8u);
  EXPECT_EQ(c.hidden_dim, 32u);
}

TEST(Forward, SingleRoadSumsInputs) {
  auto g = build_dual_graph(chain(1));
  auto p = zero_params(small(GnnKind::Gcn, 1));
  p["layer0.weight"] = Tensor::matrix(3, 1, {1, 1, 1});
  auto q = forward(p, g, Tensor::matrix(1, 3, {0.2, -0.5, 0.9}));
  ASSERT_EQ(q.size(), 1u);
  EXPECT_NEAR(q[0], sig(0.2 - 0.5 + 0.9), 1e-15);
}

TEST(Forward, ZeroWeightsGiveOneHalf) {
  Rng rng(1);
  auto net = random_network(rng, 9, 4);
  auto g = build_dual_graph(net);
  for (auto kind : {GnnKind::Gcn, GnnKind::Gat}) {
    auto q = forward(zero_params(small(kind, 3, 4, 2)), g, random_features(rng, 9));
    for (double v : q) EXPECT_EQ(v, 0.5);
  }
}

TEST(Forward, TwoRoadChainMeanAggregation) {
  // Road 0 feeds road 1: road 0 averages itself and road 1; road 1 sees itself.
  auto g = build_dual_graph(chain(2));
  auto p = zero_params(small(GnnKind::Gcn, 1));
  const std::vector<double> w{0.5, -1.0, 2.0};
  p["layer0.weight"] = Tensor::matrix(3, 1, w);
  const Tensor x = Tensor::matrix(2, 3, {1.0, 2.0, 0.5, -0.3, 0.4, 1.2});
  auto dot = [&](std::size_t r) { return x(r, 0) * w[0] + x(r, 1) * w[1] + x(r, 2) * w[2]; };
  auto q = forward(p, g, x);
  EXPECT_NEAR(q[0], sig(0.5 * (dot(0) + dot(1))), 1e-15);
  EXPECT_NEAR(q[1], sig(dot(1)), 1e-15);
}

TEST(Forward, TwoLayerGcnByHand) {
  auto g = build_dual_graph(chain(2));
  auto p = zero_params(small(GnnKind::Gcn, 2, 2));
  p["layer0.weight"] = Tensor::matrix(3, 2, {1, -1, 0, 1, 1, 0});
  p["layer1.weight"] = Tensor::matrix(2, 1, {0.7, -0.4});
  const Tensor x = Tensor::matrix(2, 3, {0.1, 0.2, 0.3, 0.9, 0.1, 0.4});
  // layer 0: z = X W0; row0 = (0.4, 0.1), row1 = (1.3, -0.8)
  const double h0[2][2] = {{std::max(0.0, 0.5 * (0.4 + 1.3)), std::max(0.0, 0.5 * (0.1 - 0.8))},
                           {1.3, 0.0}};
  const double s0 = h0[0][0] * 0.7 + h0[0][1] * -0.4, s1 = h0[1][0] * 0.7 + h0[1][1] * -0.4;
  auto q = forward(p, g, x);
  EXPECT_NEAR(q[0], sig(0.5 * (s0 + s1)), 1e-15);
  EXPECT_NEAR(q[1], sig(s1), 1e-15);
}

TEST(Forward, SingleHeadGatByHand) {
  auto g = build_dual_graph(chain(2));
  auto p = zero_params(small(GnnKind::Gat, 1));
  p["layer0.head0.weight"] = Tensor::matrix(3, 1, {1.0, 0.5, -1.0});
  p["layer0.head0.att_src"] = Tensor::matrix(1, 1, {2.0});
  p["layer0.head0.att_dst"] = Tensor::matrix(1, 1, {-0.5});
  const Tensor x = Tensor::matrix(2, 3, {0.3, 0.6, 0.1, 0.8, 0.2, 0.5});
  const double z0 = 0.3 + 0.3 - 0.1, z1 = 0.8 + 0.1 - 0.5;
  auto lrelu = [](double v) { return v > 0 ? v : 0.2 * v; };
  // road 0 attends to {0, 1}; road 1 only to itself
  const double e00 = lrelu(2.0 * z0 - 0.5 * z0), e01 = lrelu(2.0 * z1 - 0.5 * z0);
  const double a00 = std::exp(e00) / (std::exp(e00) + std::exp(e01));
  auto q = forward(p, g, x);
  EXPECT_NEAR(q[0], sig(a00 * z0 + (1.0 - a00) * z1), 1e-15);
  EXPECT_NEAR(q[1], sig(z1), 1e-15);
}

TEST(Forward, GatAveragesHeadsAtOutput) {
  auto g = build_dual_graph(chain(1));
  auto p = zero_params(small(GnnKind::Gat, 1, 4, 2));
  p["layer0.head0.weight"] = Tensor::matrix(3, 1, {1, 0, 0});
  p["layer0.head1.weight"] = Tensor::matrix(3, 1, {0, 0, 3});
  auto q = forward(p, g, Tensor::matrix(1, 3, {0.4, 9.0, 0.2}));
  EXPECT_NEAR(q[0], sig(0.5 * (0.4 + 0.6)), 1e-15);
}

TEST(Forward, ShapeMismatchThrows) {
  auto g = build_dual_graph(chain(2));
  auto p = init_params(small(GnnKind::Gcn, 2), 1);
  EXPECT_THROW(forward(p, g, Tensor({3, 3}, 0.0)), std::invalid_argument);
  EXPECT_THROW(forward(p, g, Tensor({2, 2}, 0.0)), std::invalid_argument);
}

TEST(Params, LayoutAndInit) {
  auto p = init_params(small(GnnKind::Gat, 3, 8, 4), 5);
  EXPECT_EQ(p.size(), 3u * 4u * 3u);
  EXPECT_EQ(p["layer0.head3.weight"].shape(), (std::vector<std::size_t>{3, 2}));
  EXPECT_EQ(p["layer1.head0.weight"].shape(), (std::vector<std::size_t>{8, 2}));
  EXPECT_EQ(p["layer2.head1.weight"].shape(), (std::vector<std::size_t>{8, 1}));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& t = p.tensors[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (double v : t.values()) EXPECT_LE(std::abs(v), limit);
  }
  EXPECT_EQ(init_params(p.config, 5), p);
  EXPECT_NE(init_params(p.config, 6), p);
}

TEST(GnnProperty, OutputsStrictlyInsideUnitInterval) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = random_network(rng, 1 + uniform_index(rng, 20), 2 + uniform_index(rng, 6));
    auto g = build_dual_graph(net);
    for (auto kind : {GnnKind::Gcn, GnnKind::Gat}) {
      auto p = init_params(small(kind, 3, 8, 2), rng());
      for (double v : forward(p, g, random_features(rng, net.road_count()))) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
}

TEST(GnnProperty, PermutationEquivariance) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 20);
    auto net = random_network(rng, n, 2 + uniform_index(rng, 6));
    std::vector<RoadId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

    RoadNetwork relabeled{net.intersections, std::vector<Road>(n)};
    for (const Road& r : net.roads) relabeled.roads[perm[r.id]] = {perm[r.id], r.from, r.to, r.length_m};
    const Tensor x = random_features(rng, n);
    Tensor xp({n, 3}, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 3; ++c) xp(perm[r], c) = x(r, c);

    for (auto kind : {GnnKind::Gcn, GnnKind::Gat}) {
      auto p = init_params(small(kind, 3, 8, 2), rng());
      auto q = forward(p, build_dual_graph(net), x);
      auto qp = forward(p, build_dual_graph(relabeled), xp);
      for (std::size_t r = 0; r < n; ++r) EXPECT_NEAR(qp[perm[r]], q[r], 1e-12);
    }
  }
}

TEST(GnnProperty, AttentionSumsToOnePerNode) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = random_network(rng, 1 + uniform_index(rng, 20), 2 + uniform_index(rng, 6));
    auto g = build_dual_graph(net);
    auto p = init_params(small(GnnKind::Gat, 2, 8, 4), rng());
    auto tr = trace_forward(p, g, random_features(rng, net.road_count()), false);
    ASSERT_EQ(tr.attention.size(), 8u);
    for (ad::Var a : tr.attention) {
      std::vector<double> total(g.node_count, 0.0);
      const Tensor& v = tr.tape.value(a);
      for (std::size_t e = 0; e < g.edges.size(); ++e) total[tr.edges->dst[e]] += v[e];
      for (double s : total) EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(GnnProperty, ForwardIsPure) {
  Rng rng(6);
  auto net = random_network(rng, 15, 5);
  auto g = build_dual_graph(net);
  auto x = random_features(rng, 15);
  for (auto kind : {GnnKind::Gcn, GnnKind::Gat}) {
    auto p = init_params(small(kind, 4, 8, 2), 9);
    EXPECT_EQ(forward(p, g, x), forward(p, g, x));
  }
}

TEST(Backward, MatchesFiniteDifferencesGcn) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = fleetgnn::testing::gradient_check(
        fleetgnn::testing::random_gradcheck_instance(GnnKind::Gcn, seed));
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, MatchesFiniteDifferencesGat) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = fleetgnn::testing::gradient_check(
        fleetgnn::testing::random_gradcheck_instance(GnnKind::Gat, seed));
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, GradientsAlignWithParams) {
  auto g = build_dual_graph(chain(3));
  auto p = init_params(small(GnnKind::Gat, 2, 4, 2), 1);
  auto tr = trace_forward(p, g, Tensor({3, 3}, 0.5));
  auto grads = backward(tr, ad::sum(tr.tape, tr.output));
  EXPECT_NO_THROW(check_aligned(p, grads));
}

TEST(Sgd, Examples) {
  auto p = zero_params(small(GnnKind::Gcn, 1));
  p.tensors[0] = Tensor::matrix(3, 1, {1.0, 1.0, 1.0});
  Gradients g{Tensor::matrix(3, 1, {2.0, 0.0, 2.0})};
  sgd_step(p, g, 0.1);
  EXPECT_EQ(p.tensors[0][0], 0.8);
  EXPECT_EQ(p.tensors[0][1], 1.0);
  const auto before = p;
  sgd_step(p, g, 0.0);
  EXPECT_EQ(p, before);
  EXPECT_THROW(sgd_step(p, {Tensor::matrix(1, 1, {1.0})}, 0.1), std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = zero_params(small(GnnKind::Gcn, 1));
  Adam adam;
  adam.step(p, {Tensor::matrix(3, 1, {2.0, -0.01, 0.0})}, 0.1);
  EXPECT_NEAR(p.tensors[0][0], -0.1, 1e-6);
  EXPECT_NEAR(p.tensors[0][1], 0.1, 1e-5);
  EXPECT_EQ(p.tensors[0][2], 0.0);
}

TEST(TargetNetwork, CopyIsIndependent) {
  auto g = build_dual_graph(chain(3));
  const Tensor x({3, 3}, 0.3);
  auto online = init_params(small(GnnKind::Gat, 2, 4, 2), 1);
  auto target = zero_params(online.config);
  copy_into_target(online, target);
  EXPECT_EQ(forward(target, g, x), forward(online, g, x));
  const auto snapshot = target;
  online.tensors[0][0] += 1.0;
  EXPECT_EQ(target, snapshot);
  copy_into_target(online, target);
  copy_into_target(online, target);
  EXPECT_EQ(target, online);
}

TEST(TargetNetwork, LayoutMismatchThrows) {
  auto online = init_params(small(GnnKind::Gat, 2, 4, 2), 1);
  auto other = zero_params(small(GnnKind::Gcn, 2));
  EXPECT_THROW(copy_into_target(online, other), std::invalid_argument);
}

TEST(Params, FlatRoundTrip) {
  auto p = init_params(small(GnnKind::Gat, 2, 4, 2), 3);
  auto q = zero_params(p.config);
  q.set_flat(p.flat());
  EXPECT_EQ(p, q);
  EXPECT_THROW(q.set_flat({1.0}), std::invalid_argument);
}
