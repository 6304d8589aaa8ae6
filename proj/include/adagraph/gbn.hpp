#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/matrix.hpp"

namespace adagraph {

enum class Mode { Train, Eval };

struct BatchStats {
  Vector mu;
  Vector var;
};

/// Per-channel mean and biased (1/N) variance of a batch.
inline BatchStats batch_stats(const Matrix& x) {
  if (x.rows() == 0) throw InsufficientBatch("batch_stats: empty batch");
  const std::size_t n = x.rows();
  const std::size_t c = x.cols();
  BatchStats s{Vector(c, 0.0), Vector(c, 0.0)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) s.mu[j] += x(r, j);
  for (std::size_t j = 0; j < c; ++j) s.mu[j] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x(r, j) - s.mu[j];
      s.var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) s.var[j] /= static_cast<double>(n);
  return s;
}

/// One GraphBN layer: per-domain running statistics and scale/bias.
class GbnLayer {
 public:
  explicit GbnLayer(std::size_t channels, double epsilon = 1e-5, double momentum = 0.1)
      : channels_(channels), epsilon_(epsilon), momentum_(momentum) {
    if (!(epsilon_ > 0.0)) throw InvalidState("GBN epsilon must be positive");
    if (!(momentum_ > 0.0 && momentum_ <= 1.0)) throw InvalidState("GBN momentum must lie in (0,1]");
  }

  std::size_t channels() const { return channels_; }
  double epsilon() const { return epsilon_; }
  double momentum() const { return momentum_; }
  void set_momentum(double m) {
    if (!(m > 0.0 && m <= 1.0)) throw InvalidState("GBN momentum must lie in (0,1]");
    momentum_ = m;
  }

  bool has(DomainId id) const { return entries_.contains(id); }

  const LayerParams& entry(DomainId id) const {
    auto it = entries_.find(id);
    if (it == entries_.end())
      throw UnknownDomain("GBN layer has no entry for domain " + std::to_string(id));
    return it->second;
  }
  LayerParams& entry(DomainId id) {
    return const_cast<LayerParams&>(static_cast<const GbnLayer&>(*this).entry(id));
  }

  void set_entry(DomainId id, LayerParams p) {
    if (p.mu.size() != channels_ || p.var.size() != channels_ || p.gamma.size() != channels_ ||
        p.beta.size() != channels_)
      throw DimensionError("GBN entry width does not match layer (" + std::to_string(channels_) + ")");
    for (double v : p.var)
      if (v < 0.0) throw InvalidState("GBN entry has negative variance");
    entries_[id] = std::move(p);
  }

  void erase(DomainId id) { entries_.erase(id); }

  const std::map<DomainId, LayerParams>& entries() const { return entries_; }

 private:
  std::size_t channels_;
  double epsilon_;
  double momentum_;
  std::map<DomainId, LayerParams> entries_;
};

/// Exponential running update of one domain's statistics.
inline void update_batch_stats(GbnLayer& layer, DomainId domain, const BatchStats& batch,
                               double momentum) {
  if (momentum < 0.0 || momentum > 1.0) throw InvalidState("momentum must lie in [0,1]");
  LayerParams& e = layer.entry(domain);
  if (batch.mu.size() != e.channels() || batch.var.size() != e.channels())
    throw DimensionError("batch statistics width mismatch");
  for (std::size_t j = 0; j < e.channels(); ++j) {
    e.mu[j] = (1.0 - momentum) * e.mu[j] + momentum * batch.mu[j];
    e.var[j] = std::max(0.0, (1.0 - momentum) * e.var[j] + momentum * batch.var[j]);
  }
}

struct EffectiveScaleBias {
  Vector gamma_g;
  Vector beta_g;
  // Normalized weight of every known domain in the blend, ascending id.
  std::vector<NodeWeight> contributions;
};

/// Graph-blended scale/bias for `domain`: the omega-weighted mean over all
/// known (non-virtual) graph nodes, which includes `domain` itself when it
/// is known.
inline EffectiveScaleBias effective_scale_bias(const DomainGraph& g, const GbnLayer& layer,
                                               DomainId domain) {
  const DomainNode& self = g.node(domain);
  EffectiveScaleBias out;
  double total = 0.0;
  for (const auto& [id, n] : g.nodes()) {
    if (n.role == NodeRole::Virtual) continue;
    if (!layer.has(id))
      throw UnknownDomain("GBN layer has no entry for graph node " + std::to_string(id));
    const double w = id == domain ? 1.0 : edge_weight(self, n, g);
    out.contributions.push_back({id, w});
    total += w;
  }
  if (out.contributions.empty())
    throw EmptyGraphError("graph has no known domains to blend scale/bias from");
  std::vector<double> w;
  std::vector<const Vector*> gammas;
  std::vector<const Vector*> betas;
  for (auto& c : out.contributions) {
    c.weight /= total;
    w.push_back(c.weight);
    gammas.push_back(&layer.entry(c.id).gamma);
    betas.push_back(&layer.entry(c.id).beta);
  }
  out.gamma_g = convex_combination(w, gammas);
  out.beta_g = convex_combination(w, betas);
  return out;
}

/// Intermediate values kept for the backward pass.
struct GbnCache {
  Matrix input;
  Matrix xhat;
  Vector inv_std;
  Vector gamma;             // scale actually applied (own or graph-blended)
  bool batch_statistics = false;
  BatchStats batch;         // filled in train mode
  std::vector<NodeWeight> contributions;  // empty for the plain forward
};

namespace detail {

// Normalizes with either batch or stored statistics, then applies
// gamma/beta. Never mutates layer state.
inline Matrix gbn_apply(const Matrix& x, const Vector& mu, const Vector& var, double epsilon,
                        const Vector& gamma, const Vector& beta, bool use_batch, GbnCache* cache) {
  const std::size_t c = x.cols();
  if (mu.size() != c || gamma.size() != c)
    throw DimensionError("GBN input has " + std::to_string(c) + " channels, layer has " +
                         std::to_string(mu.size()));
  BatchStats batch;
  const Vector* m = &mu;
  const Vector* v = &var;
  if (use_batch) {
    if (x.rows() < 2) throw InsufficientBatch("train-mode normalization needs at least 2 rows");
    batch = batch_stats(x);
    m = &batch.mu;
    v = &batch.var;
  }
  Vector inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt((*v)[j] + epsilon);
  Matrix y(x.rows(), c);
  Matrix xhat(x.rows(), c);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x(r, j) - (*m)[j]) * inv_std[j];
      xhat(r, j) = h;
      y(r, j) = gamma[j] * h + beta[j];
    }
  if (cache) {
    cache->input = x;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->gamma = gamma;
    cache->batch_statistics = use_batch;
    cache->batch = std::move(batch);
  }
  return y;
}

}  // namespace detail

/// Plain GBN forward with the domain's own statistics and scale/bias. In
/// train mode normalization uses the batch estimate and the running
/// statistics are then updated with the layer momentum.
inline Matrix forward_plain(const Matrix& x, DomainId domain, GbnLayer& layer, Mode mode,
                            GbnCache* cache = nullptr) {
  const LayerParams& e = layer.entry(domain);
  GbnCache local;
  GbnCache* c = cache ? cache : &local;
  Matrix y = detail::gbn_apply(x, e.mu, e.var, layer.epsilon(), e.gamma, e.beta,
                               mode == Mode::Train, c);
  c->contributions.clear();
  if (mode == Mode::Train) update_batch_stats(layer, domain, c->batch, layer.momentum());
  return y;
}

/// Graph-aware GBN forward: per-domain statistics, graph-blended scale/bias.
inline Matrix forward_graph(const Matrix& x, DomainId domain, const DomainGraph& g, GbnLayer& layer,
                            Mode mode, GbnCache* cache = nullptr) {
  const LayerParams& e = layer.entry(domain);
  EffectiveScaleBias eff = effective_scale_bias(g, layer, domain);
  GbnCache local;
  GbnCache* c = cache ? cache : &local;
  Matrix y = detail::gbn_apply(x, e.mu, e.var, layer.epsilon(), eff.gamma_g, eff.beta_g,
                               mode == Mode::Train, c);
  c->contributions = std::move(eff.contributions);
  if (mode == Mode::Train) update_batch_stats(layer, domain, c->batch, layer.momentum());
  return y;
}

struct GbnGrad {
  Matrix dx;
  Vector dgamma;  // w.r.t. the applied (possibly blended) scale
  Vector dbeta;
};

/// Backward through one GBN application. With batch statistics the input
/// gradient accounts for the dependence of mean and variance on x.
inline GbnGrad gbn_backward(const GbnCache& cache, const Matrix& dy) {
  const std::size_t n = dy.rows();
  const std::size_t c = dy.cols();
  if (cache.xhat.rows() != n || cache.xhat.cols() != c)
    throw DimensionError("gbn_backward: gradient shape does not match cached forward");
  GbnGrad g{Matrix(n, c), Vector(c, 0.0), Vector(c, 0.0)};
  Vector sum_dxhat(c, 0.0);
  Vector sum_dxhat_xhat(c, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      g.dgamma[j] += dy(r, j) * cache.xhat(r, j);
      g.dbeta[j] += dy(r, j);
      const double dxhat = dy(r, j) * cache.gamma[j];
      sum_dxhat[j] += dxhat;
      sum_dxhat_xhat[j] += dxhat * cache.xhat(r, j);
    }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double dxhat = dy(r, j) * cache.gamma[j];
      if (cache.batch_statistics) {
        g.dx(r, j) = cache.inv_std[j] *
                     (dxhat - inv_n * sum_dxhat[j] - cache.xhat(r, j) * inv_n * sum_dxhat_xhat[j]);
      } else {
        g.dx(r, j) = cache.inv_std[j] * dxhat;
      }
    }
  return g;
}

}  // namespace adagraph
