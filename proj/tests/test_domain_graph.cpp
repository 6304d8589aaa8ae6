#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adagraph/domain_graph.hpp"

using namespace adagraph;

namespace {

LayerParams layer_with(double mu, double var, double gamma, double beta, std::size_t c = 2) {
  return {Vector(c, mu), Vector(c, var), Vector(c, gamma), Vector(c, beta)};
}

ParamSet params_with(double v) { return ParamSet{{layer_with(v, v, v, v)}}; }

ParamSet random_params(std::mt19937_64& rng, const std::vector<std::size_t>& widths) {
  std::uniform_real_distribution<double> u(0.25, 3.0);
  ParamSet p;
  for (std::size_t c : widths) {
    LayerParams l;
    for (std::size_t j = 0; j < c; ++j) {
      l.mu.push_back(u(rng));
      l.var.push_back(u(rng));
      l.gamma.push_back(u(rng));
      l.beta.push_back(u(rng));
    }
    p.layers.push_back(l);
  }
  return p;
}

}  // namespace

TEST(MetadataDistance, IdenticalIsZero) {
  EXPECT_EQ(metadata_distance({{0.3, 0.7}}, {{0.3, 0.7}}, {0.1}), 0.0);
}

TEST(MetadataDistance, HandValues) {
  EXPECT_DOUBLE_EQ(metadata_distance({{0.0}}, {{1.0}}, {0.1}), 5.0);
  EXPECT_DOUBLE_EQ(metadata_distance({{1.0, 0.0}}, {{0.0, 1.0}}, {0.5}), 2.0);
}

TEST(MetadataDistance, Errors) {
  EXPECT_THROW(metadata_distance({{0.0}}, {{0.0, 1.0}}, {0.1}), DimensionError);
  EXPECT_THROW(metadata_distance({{NAN}}, {{0.0}}, {0.1}), InvalidMetadata);
  EXPECT_THROW(metadata_distance({{INFINITY}}, {{0.0}}, {0.1}), InvalidMetadata);
}

TEST(MetadataDistance, SymmetricAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Metadata a{{u(rng), u(rng)}}, b{{u(rng), u(rng)}};
    EXPECT_EQ(metadata_distance(a, b, {0.1}), metadata_distance(b, a, {0.1}));
    EXPECT_GT(metadata_distance(a, b, {0.1}), 0.0);
  }
}

TEST(EdgeWeight, Values) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{1.0}}, NodeRole::Auxiliary);
  g.add_node(2, {{0.0}}, NodeRole::Auxiliary);
  EXPECT_EQ(edge_weight(g.node(0), g.node(2), g), 1.0);
  EXPECT_NEAR(edge_weight(g.node(0), g.node(1), g), 6.7379e-3, 1e-7);
  EXPECT_DOUBLE_EQ(edge_weight(g.node(0), g.node(1), g), std::exp(-5.0));
}

TEST(EdgeWeight, SymmetricInUnitInterval) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DomainGraph g(3, {0.1});
  for (int i = 0; i < 200; ++i) g.add_node(i, {{u(rng), u(rng), u(rng)}}, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
  for (int i = 0; i < 100; ++i) {
    const auto& a = g.node(2 * i);
    const auto& b = g.node(2 * i + 1);
    const double w = edge_weight(a, b, g);
    EXPECT_EQ(w, edge_weight(b, a, g));
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
}

TEST(DomainGraph, NodeErrors) {
  DomainGraph g(2, {0.1});
  g.add_node(0, {{0.0, 0.0}}, NodeRole::Source);
  EXPECT_THROW(g.add_node(0, {{1.0, 0.0}}, NodeRole::Auxiliary), DuplicateNode);
  EXPECT_THROW(g.add_node(1, {{1.0, 0.0}}, NodeRole::Source), InvalidGraph);
  EXPECT_THROW(g.add_node(2, {{1.0, 0.0, 3.0}}, NodeRole::Auxiliary), DimensionError);
  EXPECT_THROW(g.add_node(3, {{NAN, 0.0}}, NodeRole::Auxiliary), InvalidMetadata);
  EXPECT_THROW(add_virtual_node(g, 4, {{1.0, 0.0, 3.0}}), DimensionError);
  EXPECT_THROW(add_virtual_node(g, 0, {{1.0, 0.0}}), DuplicateNode);
}

TEST(DomainGraph, TwoVirtualNodes) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  const auto before = g.nodes().size();
  add_virtual_node(g, 5, {{0.1}});
  add_virtual_node(g, 6, {{0.2}});
  EXPECT_EQ(g.nodes().size(), before + 2);
  EXPECT_TRUE(g.contains(5));
  EXPECT_TRUE(g.contains(6));
  EXPECT_EQ(g.node(5).role, NodeRole::Virtual);
  EXPECT_EQ(g.known_ids(), std::vector<DomainId>{0});
}

TEST(DomainGraph, AssignParamsRejectsNegativeVariance) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  EXPECT_THROW(g.assign_params(0, ParamSet{{layer_with(0, -1, 1, 0)}}), InvalidState);
}

TEST(NodeWeights, SingleNeighbour) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.assign_params(0, params_with(1.0));
  add_virtual_node(g, 1, {{0.7}});
  const auto w = node_weights(g, 1);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].id, 0);
  EXPECT_EQ(w[0].weight, 1.0);
}

TEST(NodeWeights, Equidistant) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{1.0}}, NodeRole::Auxiliary);
  g.assign_params(0, params_with(1.0));
  g.assign_params(1, params_with(3.0));
  add_virtual_node(g, 2, {{0.5}});
  const auto w = node_weights(g, 2);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_DOUBLE_EQ(w[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(w[1].weight, 0.5);
}

TEST(NodeWeights, HandNormalization) {
  // sigma = 0.5 makes the distance the plain squared difference.
  DomainGraph g(2, {0.5});
  const double r = std::sqrt(5.0);
  g.add_node(0, {{0.0, 0.0}}, NodeRole::Source);
  g.add_node(1, {{r, 0.0}}, NodeRole::Auxiliary);
  g.add_node(2, {{0.0, r}}, NodeRole::Auxiliary);
  for (DomainId i = 0; i < 3; ++i) g.assign_params(i, params_with(1.0 + i));
  add_virtual_node(g, 3, {{0.0, 0.0}});
  const auto w = node_weights(g, 3);
  const double e5 = std::exp(-5.0);
  EXPECT_NEAR(w[0].weight, 1.0 / (1.0 + 2.0 * e5), 1e-15);
  EXPECT_NEAR(w[1].weight, e5 / (1.0 + 2.0 * e5), 1e-15);
  EXPECT_NEAR(w[2].weight, e5 / (1.0 + 2.0 * e5), 1e-15);
}

TEST(NodeWeights, SkipsVirtualAndUnparameterized) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{0.1}}, NodeRole::Auxiliary);  // no params
  g.assign_params(0, params_with(1.0));
  add_virtual_node(g, 2, {{0.2}});
  g.assign_params(2, params_with(9.0));
  add_virtual_node(g, 3, {{0.15}});
  const auto w = node_weights(g, 3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].id, 0);
}

TEST(NodeWeights, MinWeightFilter) {
  DomainGraph g(1, {0.1}, 0.5);
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{1.0}}, NodeRole::Auxiliary);
  g.assign_params(0, params_with(1.0));
  g.assign_params(1, params_with(3.0));
  add_virtual_node(g, 2, {{0.05}});
  const auto w = node_weights(g, 2);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].id, 0);
}

TEST(PropagateParams, EmptyGraph) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  add_virtual_node(g, 1, {{0.5}});
  EXPECT_THROW(propagate_params(g, 1), EmptyGraphError);
}

TEST(PropagateParams, OneNeighbourCopiedExactly) {
  std::mt19937_64 rng(3);
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  const ParamSet p = random_params(rng, {3, 2});
  g.assign_params(0, p);
  add_virtual_node(g, 1, {{0.9}});
  EXPECT_EQ(propagate_params(g, 1), p);
  EXPECT_EQ(*g.node(1).params, p);
}

TEST(PropagateParams, EquidistantAverage) {
  DomainGraph g(1, {0.1});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{1.0}}, NodeRole::Auxiliary);
  g.assign_params(0, params_with(1.0));
  g.assign_params(1, params_with(3.0));
  add_virtual_node(g, 2, {{0.5}});
  const ParamSet out = propagate_params(g, 2);
  for (double v : out.layers[0].gamma) EXPECT_EQ(v, 2.0);
}

TEST(PropagateParams, CoincidentMetadataDominates) {
  std::mt19937_64 rng(4);
  DomainGraph g(1, {0.001});
  g.add_node(0, {{0.0}}, NodeRole::Source);
  g.add_node(1, {{0.5}}, NodeRole::Auxiliary);
  g.add_node(2, {{1.0}}, NodeRole::Auxiliary);
  std::vector<ParamSet> ps;
  for (DomainId i = 0; i < 3; ++i) {
    ps.push_back(random_params(rng, {2}));
    g.assign_params(i, ps.back());
  }
  add_virtual_node(g, 3, {{0.5}});
  // Other weights underflow to exactly zero relative to the unit weight.
  EXPECT_EQ(propagate_params(g, 3), ps[1]);
}

TEST(PropagateParams, IdenticalParamsFixedPoint) {
  std::mt19937_64 rng(5);
  const ParamSet p = random_params(rng, {4, 3});
  DomainGraph g(2, {0.1});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (DomainId i = 0; i < 7; ++i) {
    g.add_node(i, {{u(rng), u(rng)}}, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
    g.assign_params(i, p);
  }
  add_virtual_node(g, 10, {{0.3, 0.3}});
  EXPECT_EQ(propagate_params(g, 10), p);
}

TEST(PropagateParams, BruteForceOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 50;
    const double sigma = 0.02 + u(rng);
    DomainGraph g(dim, {sigma});
    auto meta = [&] {
      Vector m(dim);
      for (double& v : m) v = u(rng);
      return m;
    };
    const Vector target = meta();
    std::vector<Vector> metas;
    std::vector<ParamSet> ps;
    const std::vector<std::size_t> widths = {1 + rng() % 4, 1 + rng() % 4};
    for (std::size_t i = 0; i < n; ++i) {
      metas.push_back(meta());
      ps.push_back(random_params(rng, widths));
      g.add_node(static_cast<DomainId>(i), {metas.back()}, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
      g.assign_params(static_cast<DomainId>(i), ps.back());
    }
    add_virtual_node(g, 1000, {target});
    const ParamSet got = propagate_params(g, 1000);

    std::vector<double> w;
    double total = 0.0;
    for (const Vector& m : metas) {
      double sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) sq += (m[k] - target[k]) * (m[k] - target[k]);
      w.push_back(std::exp(-sq / (2.0 * sigma)));
      total += w.back();
    }
    for (std::size_t l = 0; l < widths.size(); ++l)
      for (std::size_t j = 0; j < widths[l]; ++j) {
        double mu = 0, var = 0, gamma = 0, beta = 0;
        for (std::size_t i = 0; i < n; ++i) {
          mu += w[i] * ps[i].layers[l].mu[j];
          var += w[i] * ps[i].layers[l].var[j];
          gamma += w[i] * ps[i].layers[l].gamma[j];
          beta += w[i] * ps[i].layers[l].beta[j];
        }
        EXPECT_LE(std::abs(got.layers[l].mu[j] - mu / total), 1e-12 * mu / total);
        EXPECT_LE(std::abs(got.layers[l].var[j] - var / total), 1e-12 * var / total);
        EXPECT_LE(std::abs(got.layers[l].gamma[j] - gamma / total), 1e-12 * gamma / total);
        EXPECT_LE(std::abs(got.layers[l].beta[j] - beta / total), 1e-12 * beta / total);
      }
  }
}

TEST(PropagateParams, ResultIsConvex) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DomainGraph g(1, {0.1});
  std::vector<ParamSet> ps;
  for (DomainId i = 0; i < 6; ++i) {
    g.add_node(i, {{u(rng)}}, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
    ps.push_back(random_params(rng, {3}));
    g.assign_params(i, ps.back());
  }
  add_virtual_node(g, 9, {{u(rng)}});
  const ParamSet out = propagate_params(g, 9);
  for (std::size_t j = 0; j < 3; ++j) {
    double lo = 1e9, hi = -1e9;
    for (const auto& p : ps) {
      lo = std::min(lo, p.layers[0].gamma[j]);
      hi = std::max(hi, p.layers[0].gamma[j]);
    }
    EXPECT_GE(out.layers[0].gamma[j], lo);
    EXPECT_LE(out.layers[0].gamma[j], hi);
  }
}
