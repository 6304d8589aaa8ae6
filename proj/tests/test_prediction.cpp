#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adagraph/prediction.hpp"

using namespace adagraph;

namespace {

ParamSet random_params(const Network& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::normal_distribution<double> nd(0.0, 0.3);
  ParamSet p;
  for (const auto& l : net.gbn()) {
    LayerParams e = LayerParams::identity(l.channels());
    for (std::size_t j = 0; j < l.channels(); ++j) {
      e.mu[j] = nd(rng);
      e.var[j] = u(rng);
      e.gamma[j] = u(rng);
      e.beta[j] = nd(rng);
    }
    p.layers.push_back(e);
  }
  return p;
}

struct Fixture {
  Network net;
  DomainGraph graph;
};

// Known nodes at the given metadata values, each with random parameters.
Fixture make_fixture(std::uint64_t seed, const std::vector<double>& meta, double sigma = 0.1) {
  std::mt19937_64 rng(seed);
  Network net(NetworkShape{3, {5, 4}, 3}, 0, rng());
  DomainGraph g(1, {sigma});
  for (DomainId d = 0; d < static_cast<DomainId>(meta.size()); ++d) {
    g.add_node(d, {{meta[d]}}, d == 0 ? NodeRole::Source : NodeRole::Auxiliary);
    const ParamSet p = random_params(net, rng);
    net.set_domain_params(d, p);
    g.assign_params(d, p);
  }
  return {net, g};
}

Matrix random_inputs(std::uint64_t seed, std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix x(n, dim);
  for (double& v : x.data()) v = nd(rng);
  return x;
}

// Weighted sum of every parameter field, computed directly.
ParamSet naive_mixture(const std::vector<double>& w, const std::vector<ParamSet>& sets) {
  ParamSet out = sets[0];
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    auto mix = [&](auto field) {
      std::vector<double> acc(sets[0].layers[l].*field);
      for (std::size_t j = 0; j < acc.size(); ++j) {
        acc[j] = 0.0;
        for (std::size_t v = 0; v < sets.size(); ++v) acc[j] += w[v] * (sets[v].layers[l].*field)[j];
      }
      out.layers[l].*field = acc;
    };
    mix(&LayerParams::mu);
    mix(&LayerParams::var);
    mix(&LayerParams::gamma);
    mix(&LayerParams::beta);
  }
  return out;
}

// Domain classifier over `domains` whose final layer yields a fixed
// posterior regardless of input.
MetadataClassifier constant_classifier(std::vector<DomainId> domains, const std::vector<double>& logits) {
  Network net(NetworkShape{3, {4}, domains.size()}, 0, 17);
  auto& last = net.dense().back();
  for (double& v : last.weight.data()) v = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) last.bias[k] = logits[k];
  return {net, std::move(domains)};
}

Vector row_of(const Matrix& m, std::size_t i) {
  const auto r = m.row(i);
  return {r.begin(), r.end()};
}

Dataset gaussian_domain(double cx, double cy, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.push_back({{cx + nd(rng), cy + nd(rng)}, std::nullopt, 0});
  return d;
}

double held_out_accuracy(const MetadataClassifier& clf, const std::vector<Dataset>& test) {
  std::size_t hits = 0, total = 0;
  for (std::size_t c = 0; c < test.size(); ++c) {
    const auto pred = argmax_rows(clf.predict_proba(gather_features(test[c])));
    for (std::size_t p : pred) hits += p == c;
    total += pred.size();
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST(PredictFromMetadata, CoincidentMetadataMatchesThatDomain) {
  auto f = make_fixture(1, {0.0, 0.5, 1.0}, 0.001);
  const Matrix x = random_inputs(2, 20, 3);
  const TargetModel m = predict_from_metadata(f.graph, f.net, {{0.5}}, 99);
  const Matrix target = m.predict_proba(x);
  const Matrix aux = predict_proba(f.net, x, {Mode::Eval, 1, &f.graph, nullptr});
  for (std::size_t i = 0; i < target.data().size(); ++i)
    EXPECT_NEAR(target.data()[i], aux.data()[i], 1e-9);
}

TEST(PredictFromMetadata, IdenticalParamsAreAFixedPoint) {
  auto f = make_fixture(3, {0.0, 0.3, 0.7});
  std::mt19937_64 rng(4);
  const ParamSet p = random_params(f.net, rng);
  for (DomainId d = 0; d < 3; ++d) {
    f.net.set_domain_params(d, p);
    f.graph.assign_params(d, p);
  }
  const TargetModel m = predict_from_metadata(f.graph, f.net, {{0.42}}, 7);
  EXPECT_EQ(m.net.domain_params(7), p);
  const Matrix x = random_inputs(5, 10, 3);
  EXPECT_EQ(m.predict_proba(x), predict_proba(f.net, x, {Mode::Eval, 0, &f.graph, nullptr}));
}

TEST(PredictFromMetadata, LeavesInputsUntouched) {
  auto f = make_fixture(6, {0.0, 0.5});
  const DomainGraph g_before = f.graph;
  const auto dense_before = f.net.dense();
  predict_from_metadata(f.graph, f.net, {{0.2}}, 9);
  EXPECT_FALSE(f.graph.contains(9));
  EXPECT_FALSE(f.net.has_domain(9));
  EXPECT_EQ(f.net.dense(), dense_before);
  EXPECT_EQ(f.graph.known_ids(), g_before.known_ids());
}

TEST(PredictFromMetadata, RowsSumToOne) {
  auto f = make_fixture(8, {0.0, 0.2, 0.9});
  const Matrix p = predict_from_metadata(f.graph, f.net, {{0.6}}, 5).predict_proba(random_inputs(9, 30, 3));
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.cols(); ++k) s += p(i, k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(PredictFromMetadata, DuplicateIdRejected) {
  auto f = make_fixture(10, {0.0, 0.5});
  EXPECT_ANY_THROW(predict_from_metadata(f.graph, f.net, {{0.2}}, 1));
}

TEST(MixtureParams, Errors) {
  auto f = make_fixture(11, {0.0, 0.5});
  EXPECT_THROW(mixture_params(f.graph, {}), NodeSetMismatch);
  EXPECT_THROW(mixture_params(f.graph, {{{0, 0.5}, {5, 0.5}}}), NodeSetMismatch);
  EXPECT_THROW(mixture_params(f.graph, {{{0, 1.5}, {1, -0.5}}}), InvalidState);
  EXPECT_THROW(mixture_params(f.graph, {{{0, 0.0}, {1, 0.0}}}), InvalidState);
  f.graph.add_virtual_node(3, {{0.1}});
  EXPECT_THROW(mixture_params(f.graph, {{{0, 0.5}, {3, 0.5}}}), NodeSetMismatch);
}

TEST(MixtureParams, MatchesNaiveWeightedSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto f = make_fixture(100 + seed, {0.0, 0.3, 0.6, 0.9});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(4);
    double total = 0.0;
    for (double& v : w) total += (v = u(rng));
    MixtureDistribution md;
    std::vector<ParamSet> sets;
    for (DomainId d = 0; d < 4; ++d) {
      md.weights[d] = w[d];
      sets.push_back(*f.graph.node(d).params);
    }
    for (double& v : w) v /= total;
    const ParamSet got = mixture_params(f.graph, md);
    const ParamSet want = naive_mixture(w, sets);
    for (std::size_t l = 0; l < got.layers.size(); ++l)
      for (std::size_t j = 0; j < got.layers[l].mu.size(); ++j) {
        EXPECT_NEAR(got.layers[l].mu[j], want.layers[l].mu[j], 1e-12);
        EXPECT_NEAR(got.layers[l].var[j], want.layers[l].var[j], 1e-12);
        EXPECT_NEAR(got.layers[l].gamma[j], want.layers[l].gamma[j], 1e-12);
        EXPECT_NEAR(got.layers[l].beta[j], want.layers[l].beta[j], 1e-12);
      }
  }
}

TEST(MetadataClassifier, SeparatedDomainsAreRecognized) {
  DomainDatasets train;
  std::vector<Dataset> test;
  const std::vector<std::pair<double, double>> centers{{-4, 0}, {4, 0}, {0, 4}};
  for (DomainId d = 0; d < 3; ++d) {
    train[d] = gaussian_domain(centers[d].first, centers[d].second, 200, 10 + d);
    test.push_back(gaussian_domain(centers[d].first, centers[d].second, 200, 50 + d));
  }
  TrainConfig cfg;
  cfg.epochs_stage1 = 5;
  const auto clf = train_metadata_classifier(train, cfg);
  EXPECT_EQ(clf.domains, (std::vector<DomainId>{0, 1, 2}));
  EXPECT_GE(held_out_accuracy(clf, test), 0.9);
}

TEST(MetadataClassifier, IdenticalDomainsAreAtChance) {
  DomainDatasets train{{0, gaussian_domain(0, 0, 300, 1)}, {1, gaussian_domain(0, 0, 300, 2)}};
  const std::vector<Dataset> test{gaussian_domain(0, 0, 500, 3), gaussian_domain(0, 0, 500, 4)};
  TrainConfig cfg;
  cfg.epochs_stage1 = 5;
  const auto clf = train_metadata_classifier(train, cfg);
  const double n = 1000.0;
  EXPECT_NEAR(held_out_accuracy(clf, test), 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(MetadataClassifier, PosteriorRowsSumToOne) {
  DomainDatasets train{{2, gaussian_domain(-1, 0, 64, 1)}, {5, gaussian_domain(1, 0, 64, 2)}};
  TrainConfig cfg;
  cfg.epochs_stage1 = 1;
  const auto clf = train_metadata_classifier(train, cfg);
  const auto m = clf.mixture({0.3, -0.2});
  ASSERT_EQ(m.weights.size(), 2u);
  EXPECT_NEAR(m.weights.at(2) + m.weights.at(5), 1.0, 1e-12);
}

TEST(MetadataClassifier, SingleDomainIsDegenerate) {
  TrainConfig cfg;
  EXPECT_THROW(train_metadata_classifier({{0, gaussian_domain(0, 0, 32, 1)}}, cfg), DegenerateTask);
  EXPECT_THROW(train_metadata_classifier({{0, gaussian_domain(0, 0, 32, 1)}, {1, {}}}, cfg), DegenerateTask);
}

TEST(PredictFromImage, OneHotMixtureEqualsThatDomain) {
  auto f = make_fixture(20, {0.0, 0.5, 1.0});
  const Matrix x = random_inputs(21, 8, 3);
  for (std::size_t v = 0; v < 3; ++v) {
    std::vector<double> logits(3, 0.0);
    logits[v] = 1000.0;
    const auto clf = constant_classifier({0, 1, 2}, logits);
    const Matrix want = predict_proba(f.net, x, {Mode::Eval, static_cast<DomainId>(v)});
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Vector got = predict_from_image(f.graph, f.net, clf, row_of(x, i));
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k], want(i, k));
    }
  }
}

TEST(PredictFromImage, UniformPosteriorOverIdenticalParams) {
  auto f = make_fixture(22, {0.0, 0.5, 1.0});
  std::mt19937_64 rng(23);
  const ParamSet p = random_params(f.net, rng);
  for (DomainId d = 0; d < 3; ++d) f.graph.assign_params(d, p);
  const auto clf = constant_classifier({0, 1, 2}, {0.0, 0.0, 0.0});
  const Matrix x = random_inputs(24, 8, 3);
  const Matrix want = predict_proba(f.net, x, {Mode::Eval, 0, nullptr, &p});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector got = predict_from_image(f.graph, f.net, clf, row_of(x, i));
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k], want(i, k));
  }
}

TEST(PredictFromImage, MatchesNaiveMixture) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto f = make_fixture(200 + seed, {0.0, 0.4, 0.8});
    Network clf_net(NetworkShape{3, {4}, 3}, 0, 300 + seed);
    const MetadataClassifier clf{clf_net, {0, 1, 2}};
    const Matrix x = random_inputs(400 + seed, 4, 3);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Vector xi = row_of(x, i);
      const Matrix post = predict_proba(clf_net, Matrix::from_rows({xi}), {Mode::Eval, 0});
      std::vector<double> w{post(0, 0), post(0, 1), post(0, 2)};
      std::vector<ParamSet> sets;
      for (DomainId d = 0; d < 3; ++d) sets.push_back(*f.graph.node(d).params);
      const ParamSet mixed = naive_mixture(w, sets);
      const Matrix want = predict_proba(f.net, Matrix::from_rows({xi}), {Mode::Eval, 0, nullptr, &mixed});
      const Vector got = predict_from_image(f.graph, f.net, clf, xi);
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want(0, k), 1e-12);
    }
  }
}

TEST(PredictFromImage, NodeSetMismatch) {
  auto f = make_fixture(30, {0.0, 0.5, 1.0});
  const auto clf = constant_classifier({0, 1}, {0.0, 0.0});
  EXPECT_THROW(predict_from_image(f.graph, f.net, clf, {0.1, 0.2, 0.3}), NodeSetMismatch);
}
