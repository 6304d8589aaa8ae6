#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/network.hpp"
#include "adagraph/prediction.hpp"
#include "adagraph/refinement.hpp"

// Quick invariant checks run by `adagraph selftest`. Each check compares the
// library against a straightforward reference computation.

namespace adagraph {

struct SelftestResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;  // largest observed error
  double tolerance = 0.0;
};

namespace selftest_detail {

inline LayerParams random_layer(std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  LayerParams p;
  for (std::size_t j = 0; j < c; ++j) {
    p.mu.push_back(u(rng));
    p.var.push_back(u(rng));
    p.gamma.push_back(u(rng));
    p.beta.push_back(u(rng));
  }
  return p;
}

inline ParamSet random_params(const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
  ParamSet p;
  for (std::size_t c : widths) p.layers.push_back(random_layer(c, rng));
  return p;
}

// Naive sum_i w_i v_i / sum_i w_i, field by field.
inline ParamSet weighted_average(const std::vector<double>& w, const std::vector<const ParamSet*>& sets) {
  double total = 0.0;
  for (double x : w) total += x;
  ParamSet out = *sets.front();
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    for (auto member : {&LayerParams::mu, &LayerParams::var, &LayerParams::gamma, &LayerParams::beta}) {
      Vector& dst = out.layers[l].*member;
      for (std::size_t j = 0; j < dst.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < sets.size(); ++i) acc += w[i] * (sets[i]->layers[l].*member)[j];
        dst[j] = acc / total;
      }
    }
  }
  return out;
}

inline double max_rel_diff(const ParamSet& a, const ParamSet& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    for (auto member : {&LayerParams::mu, &LayerParams::var, &LayerParams::gamma, &LayerParams::beta})
      for (std::size_t j = 0; j < (a.layers[l].*member).size(); ++j) {
        const double x = (a.layers[l].*member)[j];
        const double y = (b.layers[l].*member)[j];
        worst = std::max(worst, std::abs(x - y) / std::abs(y));
      }
  return worst;
}

}  // namespace selftest_detail

/// Graph propagation against a direct kernel-weighted average.
inline SelftestResult selftest_propagation(std::size_t graphs = 50, std::uint64_t seed = 1) {
  using namespace selftest_detail;
  SelftestResult r{"graph propagation matches weighted average", true, 0.0, 1e-12};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < graphs; ++t) {
    const std::size_t dim = 1 + rng() % 4;
    const std::size_t n = 2 + rng() % 49;
    const std::vector<std::size_t> widths = {1 + rng() % 3, 1 + rng() % 3};
    const double sigma = 0.05 + u(rng);
    DomainGraph g(dim, KernelConfig{sigma});
    auto meta = [&] {
      Vector m(dim);
      for (double& v : m) v = u(rng);
      return Metadata{m};
    };
    std::vector<double> w;
    std::vector<ParamSet> params;
    const Metadata target = meta();
    for (std::size_t i = 0; i < n; ++i) {
      const Metadata m = meta();
      g.add_node(static_cast<DomainId>(i), m, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
      params.push_back(random_params(widths, rng));
      g.assign_params(static_cast<DomainId>(i), params.back());
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d += (m.values[k] - target.values[k]) * (m.values[k] - target.values[k]);
      w.push_back(std::exp(-d / (2.0 * sigma)));
    }
    g.add_virtual_node(static_cast<DomainId>(n + 1), meta());  // never a contributor
    g.add_virtual_node(static_cast<DomainId>(n), target);
    std::vector<const ParamSet*> sets;
    for (const auto& p : params) sets.push_back(&p);
    const ParamSet got = propagate_params(g, static_cast<DomainId>(n));
    r.worst = std::max(r.worst, max_rel_diff(got, weighted_average(w, sets)));
  }
  r.passed = r.worst <= r.tolerance;
  return r;
}

/// Posterior-weighted mixture against a direct weighted average.
inline SelftestResult selftest_mixture(std::size_t graphs = 50, std::uint64_t seed = 2) {
  using namespace selftest_detail;
  SelftestResult r{"posterior mixture matches weighted average", true, 0.0, 1e-12};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < graphs; ++t) {
    const std::size_t n = 2 + rng() % 49;
    const std::vector<std::size_t> widths = {1 + rng() % 3};
    DomainGraph g(1, KernelConfig{});
    MixtureDistribution p;
    std::vector<double> w;
    std::vector<ParamSet> params;
    for (std::size_t i = 0; i < n; ++i) {
      g.add_node(static_cast<DomainId>(i), Metadata{{u(rng)}}, i == 0 ? NodeRole::Source : NodeRole::Auxiliary);
      params.push_back(random_params(widths, rng));
      g.assign_params(static_cast<DomainId>(i), params.back());
      w.push_back(u(rng) + 1e-3);
      p.weights[static_cast<DomainId>(i)] = w.back();
    }
    std::vector<const ParamSet*> sets;
    for (const auto& q : params) sets.push_back(&q);
    r.worst = std::max(r.worst, max_rel_diff(mixture_params(g, p), weighted_average(w, sets)));
  }
  r.passed = r.worst <= r.tolerance;
  return r;
}

/// Reverse-mode gradients against central differences (h = 1e-5) for the
/// supervised loss, the weighted entropy loss and the target-only entropy
/// step, through the plain and the graph-blended forward.
inline SelftestResult selftest_gradients(std::size_t configs = 20, std::uint64_t seed = 3) {
  SelftestResult r{"analytic gradients match central differences", true, 0.0, 1e-4};
  constexpr double h = 1e-5;
  for (std::size_t c = 0; c < configs; ++c) {
    std::mt19937_64 rng(derive_seed(seed, c));
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    NetworkShape shape{3, {4, 3}, 3};
    Network net(shape, 0, rng());
    DomainGraph g(1, KernelConfig{0.1});
    for (DomainId d = 0; d < 3; ++d) {
      g.add_node(d, Metadata{{0.2 * d}}, d == 0 ? NodeRole::Source : NodeRole::Auxiliary);
      ParamSet p;
      for (const auto& l : net.gbn()) p.layers.push_back(selftest_detail::random_layer(l.channels(), rng));
      for (auto& l : p.layers)
        for (double& b : l.beta) b = nd(rng) * 0.3;
      net.set_domain_params(d, p);
      g.assign_params(d, p);
    }
    Matrix x(6, 3);
    for (double& v : x.data()) v = nd(rng);
    std::vector<int> labels;
    for (std::size_t i = 0; i < x.rows(); ++i) labels.push_back(static_cast<int>(rng() % 3));
    const DomainId dom = static_cast<DomainId>(1 + rng() % 2);

    struct Case {
      Mode mode;
      bool graph;
      Loss loss;
      BackwardOptions bopt;
    };
    const std::vector<Case> cases = {
        {Mode::Train, false, Loss::cross_entropy(labels), {true, true}},
        {Mode::Train, true, Loss::cross_entropy(labels), {true, true}},
        {Mode::Train, false, Loss::entropy(0.7), {true, true}},
        {Mode::Train, true, Loss::entropy(0.7), {true, true}},
        {Mode::Eval, false, Loss::entropy(), {false, true}},
        {Mode::Eval, true, Loss::entropy(), {false, true}},
    };
    for (const Case& k : cases) {
      const ForwardOptions opt{k.mode, dom, k.graph ? &g : nullptr, nullptr};
      auto loss_at = [&] { return loss_value(run_forward(net, x, opt).probs, k.loss); };
      const Gradients grads = backward(net, run_forward(net, x, opt), k.loss, k.bopt);
      auto check = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + h;
        const double up = loss_at();
        param = keep - h;
        const double down = loss_at();
        param = keep;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-3});
        r.worst = std::max(r.worst, err);
      };
      for (std::size_t i = 0; i < grads.dense.size(); ++i) {
        auto& d = net.dense()[i];
        for (std::size_t q = 0; q < d.weight.data().size(); ++q) check(d.weight.data()[q], grads.dense[i].weight.data()[q]);
        for (std::size_t q = 0; q < d.bias.size(); ++q) check(d.bias[q], grads.dense[i].bias[q]);
      }
      for (std::size_t l = 0; l < grads.gbn.size(); ++l)
        for (const auto& [id, sb] : grads.gbn[l]) {
          LayerParams& e = net.gbn()[l].entry(id);
          for (std::size_t j = 0; j < sb.gamma.size(); ++j) check(e.gamma[j], sb.gamma[j]);
          for (std::size_t j = 0; j < sb.beta.size(); ++j) check(e.beta[j], sb.beta[j]);
        }
    }
  }
  r.passed = r.worst <= r.tolerance;
  return r;
}

/// Train-mode normalization yields zero-mean, unit-variance channels
/// before scale/bias.
inline SelftestResult selftest_normalization(std::size_t batches = 100, std::uint64_t seed = 4) {
  // Errors are reported as a fraction of their bound (1e-6 on the mean,
  // 1e-4 on the variance), so the tolerance is 1.
  SelftestResult r{"train-mode normalization standardizes channels", true, 0.0, 1.0};
  std::mt19937_64 rng(seed);
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t n = 16 + rng() % 49;
    const std::size_t c = 1 + rng() % 8;
    std::normal_distribution<double> nd(std::normal_distribution<double>(0.0, 5.0)(rng),
                                        1.0 + static_cast<double>(rng() % 10));
    Matrix x(n, c);
    for (double& v : x.data()) v = nd(rng);
    GbnLayer layer(c);
    layer.set_entry(0, LayerParams::identity(c));
    GbnCache cache;
    forward_plain(x, 0, layer, Mode::Train, &cache);
    const BatchStats s = batch_stats(cache.xhat);
    for (std::size_t j = 0; j < c; ++j)
      r.worst = std::max({r.worst, std::abs(s.mu[j]) / 1e-6, std::abs(s.var[j] - 1.0) / 1e-4});
  }
  r.passed = r.worst <= r.tolerance;
  return r;
}

/// Buffered statistics updates against the closed form for a constant
/// buffer, plus the |M|/(|M|-1) factor at alpha = 1.
inline SelftestResult selftest_refinement_stats(std::uint64_t seed = 5) {
  SelftestResult r{"buffered statistics follow the closed form", true, 0.0, 1e-12};
  NetworkShape shape{2, {3}, 2};
  Network net(shape, 0, seed);
  std::vector<BatchStats> stats = {{{0.5, -1.0, 2.0}, {1.5, 0.25, 3.0}}};
  const LayerParams start = net.gbn()[0].entry(0);
  for (int k = 1; k <= 30; ++k) {
    update_target_stats(net, 0, stats, 16, 0.1);
    const double keep = std::pow(0.9, k);
    const LayerParams& e = net.gbn()[0].entry(0);
    for (std::size_t j = 0; j < 3; ++j) {
      const double mu = keep * start.mu[j] + (1.0 - keep) * stats[0].mu[j];
      const double var = keep * start.var[j] + (1.0 - keep) * (16.0 / 15.0) * stats[0].var[j];
      r.worst = std::max({r.worst, std::abs(e.mu[j] - mu) / std::max(1.0, std::abs(mu)),
                          std::abs(e.var[j] - var) / std::max(1.0, std::abs(var))});
    }
  }
  update_target_stats(net, 0, stats, 16, 1.0);
  for (std::size_t j = 0; j < 3; ++j)
    r.worst = std::max(r.worst, std::abs(net.gbn()[0].entry(0).var[j] - stats[0].var[j] * 16.0 / 15.0));
  r.passed = r.worst <= r.tolerance;
  return r;
}

inline std::vector<SelftestResult> run_selftest() {
  return {selftest_propagation(), selftest_mixture(), selftest_gradients(), selftest_normalization(),
          selftest_refinement_stats()};
}

}  // namespace adagraph
