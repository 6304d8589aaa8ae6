#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/matrix.hpp"

namespace adagraph {

inline constexpr double kLogClamp = 1e-12;

inline double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct NetworkShape {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t num_classes = 2;
  double epsilon = 1e-5;
  double momentum = 0.1;
};

/// Dense classifier: every hidden dense layer is followed by a GBN layer and
/// a rectifier; the last dense layer feeds a softmax.
class Network {
 public:
  Network(const NetworkShape& shape, DomainId initial_domain, std::uint64_t seed) {
    if (shape.input_dim == 0 || shape.num_classes == 0)
      throw DimensionError("network needs positive input and class counts");
    std::mt19937_64 rng(seed);
    std::size_t in = shape.input_dim;
    std::vector<std::size_t> outs = shape.hidden;
    outs.push_back(shape.num_classes);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const std::size_t out = outs[i];
      if (out == 0) throw DimensionError("layer width must be positive");
      // He initialization for rectifier stacks.
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
      DenseLayer d{Matrix(out, in), Vector(out, 0.0)};
      for (double& w : d.weight.data()) w = dist(rng);
      dense_.push_back(std::move(d));
      if (i + 1 < outs.size()) {
        gbn_.emplace_back(out, shape.epsilon, shape.momentum);
        gbn_.back().set_entry(initial_domain, LayerParams::identity(out));
      }
      in = out;
    }
  }

  Network(std::vector<DenseLayer> dense, std::vector<GbnLayer> gbn)
      : dense_(std::move(dense)), gbn_(std::move(gbn)) {
    if (dense_.empty() || gbn_.size() + 1 != dense_.size())
      throw DimensionError("network needs exactly one GBN layer per hidden dense layer");
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      const auto& d = dense_[i];
      if (d.bias.size() != d.weight.rows()) throw DimensionError("dense bias width mismatch");
      if (i > 0 && d.weight.cols() != dense_[i - 1].weight.rows())
        throw DimensionError("consecutive dense layers do not compose");
      if (i < gbn_.size() && gbn_[i].channels() != d.weight.rows())
        throw DimensionError("GBN width does not match preceding dense layer");
    }
  }

  std::size_t input_dim() const { return dense_.front().weight.cols(); }
  std::size_t num_classes() const { return dense_.back().weight.rows(); }
  std::size_t gbn_count() const { return gbn_.size(); }

  const std::vector<DenseLayer>& dense() const { return dense_; }
  std::vector<DenseLayer>& dense() { return dense_; }
  const std::vector<GbnLayer>& gbn() const { return gbn_; }
  std::vector<GbnLayer>& gbn() { return gbn_; }

  bool has_domain(DomainId id) const {
    return std::all_of(gbn_.begin(), gbn_.end(), [&](const GbnLayer& l) { return l.has(id); });
  }

  std::vector<DomainId> domains() const {
    std::vector<DomainId> out;
    if (gbn_.empty()) return out;
    for (const auto& [id, _] : gbn_.front().entries())
      if (has_domain(id)) out.push_back(id);
    return out;
  }

  ParamSet domain_params(DomainId id) const {
    ParamSet p;
    for (const auto& l : gbn_) p.layers.push_back(l.entry(id));
    return p;
  }

  void set_domain_params(DomainId id, const ParamSet& p) {
    if (p.layers.size() != gbn_.size())
      throw DimensionError("param set has " + std::to_string(p.layers.size()) +
                           " layers, network has " + std::to_string(gbn_.size()));
    for (std::size_t l = 0; l < gbn_.size(); ++l) gbn_[l].set_entry(id, p.layers[l]);
    ++generation_;
  }

  void copy_domain(DomainId from, DomainId to) { set_domain_params(to, domain_params(from)); }

  void erase_domain(DomainId id) {
    for (auto& l : gbn_) l.erase(id);
    ++generation_;
  }

  // Incremented whenever trainable parameters change; lets backward detect
  // a forward pass recorded against older parameters.
  std::uint64_t generation() const { return generation_; }
  void bump_generation() { ++generation_; }

 private:
  std::vector<DenseLayer> dense_;
  std::vector<GbnLayer> gbn_;
  std::uint64_t generation_ = 0;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  DomainId domain = 0;
  // Non-null: GBN layers use the graph-blended scale/bias.
  const DomainGraph* graph = nullptr;
  // Non-null: eval-mode forward with these params instead of a stored domain.
  const ParamSet* params = nullptr;
};

/// Everything backward needs from a forward pass.
struct ForwardPass {
  ForwardOptions options;
  std::uint64_t generation = 0;
  std::vector<Matrix> dense_inputs;   // input to each dense layer
  std::vector<GbnCache> gbn_caches;
  std::vector<Matrix> gbn_outputs;    // pre-rectifier
  Matrix logits;
  Matrix probs;
};

inline Matrix dense_forward(const DenseLayer& d, const Matrix& x) {
  if (x.cols() != d.weight.cols())
    throw DimensionError("dense layer expects " + std::to_string(d.weight.cols()) +
                         " inputs, got " + std::to_string(x.cols()));
  Matrix z(x.rows(), d.weight.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t o = 0; o < d.weight.rows(); ++o) {
      double acc = d.bias[o];
      for (std::size_t i = 0; i < d.weight.cols(); ++i) acc += d.weight(o, i) * x(r, i);
      z(r, o) = acc;
    }
  return z;
}

inline Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double mx = z(r, 0);
    for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(r, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      p(r, j) = std::exp(z(r, j) - mx);
      sum += p(r, j);
    }
    for (std::size_t j = 0; j < z.cols(); ++j) p(r, j) /= sum;
  }
  return p;
}

/// Runs the network without touching its state. In train mode the batch
/// statistics are recorded in the pass; commit_batch_stats applies them.
inline ForwardPass run_forward(const Network& net, const Matrix& x, const ForwardOptions& opt) {
  if (x.cols() != net.input_dim())
    throw DimensionError("input has " + std::to_string(x.cols()) + " features, network expects " +
                         std::to_string(net.input_dim()));
  if (opt.params) {
    if (opt.mode == Mode::Train) throw InvalidState("explicit params only support eval mode");
    if (opt.params->layers.size() != net.gbn_count())
      throw DimensionError("explicit param set layer count mismatch");
  }
  ForwardPass pass;
  pass.options = opt;
  pass.generation = net.generation();
  const bool train = opt.mode == Mode::Train;
  Matrix h = x;
  for (std::size_t i = 0; i < net.dense().size(); ++i) {
    pass.dense_inputs.push_back(h);
    Matrix z = dense_forward(net.dense()[i], h);
    if (i + 1 == net.dense().size()) {
      pass.logits = std::move(z);
      break;
    }
    const GbnLayer& layer = net.gbn()[i];
    GbnCache cache;
    Matrix y;
    if (opt.params) {
      const LayerParams& p = opt.params->layers[i];
      y = detail::gbn_apply(z, p.mu, p.var, layer.epsilon(), p.gamma, p.beta, false, &cache);
    } else {
      const LayerParams& e = layer.entry(opt.domain);
      if (opt.graph) {
        EffectiveScaleBias eff = effective_scale_bias(*opt.graph, layer, opt.domain);
        y = detail::gbn_apply(z, e.mu, e.var, layer.epsilon(), eff.gamma_g, eff.beta_g, train,
                              &cache);
        cache.contributions = std::move(eff.contributions);
      } else {
        y = detail::gbn_apply(z, e.mu, e.var, layer.epsilon(), e.gamma, e.beta, train, &cache);
      }
    }
    pass.gbn_outputs.push_back(y);
    pass.gbn_caches.push_back(std::move(cache));
    for (double& v : y.data()) v = std::max(v, 0.0);
    h = std::move(y);
  }
  pass.probs = softmax_rows(pass.logits);
  return pass;
}

inline void commit_batch_stats(Network& net, const ForwardPass& pass) {
  if (pass.options.mode != Mode::Train) return;
  for (std::size_t i = 0; i < pass.gbn_caches.size(); ++i) {
    GbnLayer& layer = net.gbn()[i];
    update_batch_stats(layer, pass.options.domain, pass.gbn_caches[i].batch, layer.momentum());
  }
}

/// Forward returning class probabilities; train mode also updates the
/// domain's running statistics.
inline Matrix forward(Network& net, const Matrix& x, const ForwardOptions& opt) {
  ForwardPass pass = run_forward(net, x, opt);
  commit_batch_stats(net, pass);
  return std::move(pass.probs);
}

inline Matrix predict_proba(const Network& net, const Matrix& x, ForwardOptions opt) {
  opt.mode = Mode::Eval;
  return run_forward(net, x, opt).probs;
}

inline void check_labels(std::size_t rows, std::size_t classes, std::span<const int> labels) {
  if (labels.size() != rows)
    throw LabelError("expected " + std::to_string(rows) + " labels, got " +
                     std::to_string(labels.size()));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw LabelError("label " + std::to_string(y) + " out of range");
}

inline double cross_entropy(const Matrix& probs, std::span<const int> labels) {
  check_labels(probs.rows(), probs.cols(), labels);
  if (probs.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r)
    acc -= clamped_log(probs(r, static_cast<std::size_t>(labels[r])));
  return acc / static_cast<double>(probs.rows());
}

inline double row_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) h -= v * clamped_log(v);
  return h;
}

inline double entropy(const Matrix& probs) {
  if (probs.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) acc += row_entropy(probs.row(r));
  return acc / static_cast<double>(probs.rows());
}

enum class LossKind { CrossEntropy, Entropy };

struct Loss {
  LossKind kind = LossKind::CrossEntropy;
  std::vector<int> labels;
  double weight = 1.0;

  static Loss cross_entropy(std::vector<int> labels, double weight = 1.0) {
    return {LossKind::CrossEntropy, std::move(labels), weight};
  }
  static Loss entropy(double weight = 1.0) { return {LossKind::Entropy, {}, weight}; }
};

inline double loss_value(const Matrix& probs, const Loss& loss) {
  const double base =
      loss.kind == LossKind::CrossEntropy ? cross_entropy(probs, loss.labels) : entropy(probs);
  return loss.weight * base;
}

struct ScaleBiasGrad {
  Vector gamma;
  Vector beta;
};

struct Gradients {
  std::vector<DenseLayer> dense;  // empty when shared params are not tracked
  std::vector<std::map<DomainId, ScaleBiasGrad>> gbn;
  Matrix input;
};

struct BackwardOptions {
  bool shared = true;
  bool scale_bias = true;
};

inline Matrix loss_gradient_logits(const Matrix& probs, const Loss& loss) {
  const std::size_t n = probs.rows();
  const std::size_t k = probs.cols();
  Matrix g(n, k);
  if (n == 0) return g;
  const double scale = loss.weight / static_cast<double>(n);
  if (loss.kind == LossKind::CrossEntropy) {
    check_labels(n, k, loss.labels);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < k; ++j)
        g(r, j) = scale * (probs(r, j) - (static_cast<std::size_t>(loss.labels[r]) == j ? 1.0 : 0.0));
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      const double h = row_entropy(probs.row(r));
      for (std::size_t j = 0; j < k; ++j)
        g(r, j) = -scale * probs(r, j) * (clamped_log(probs(r, j)) + h);
    }
  }
  return g;
}

/// Reverse-mode gradients of `loss` for the recorded pass. Running
/// statistics never receive gradient.
inline Gradients backward(const Network& net, const ForwardPass& pass, const Loss& loss,
                          const BackwardOptions& bopt = {}) {
  if (pass.probs.empty() || pass.dense_inputs.size() != net.dense().size())
    throw InvalidState("backward called without a matching forward pass");
  if (pass.generation != net.generation())
    throw InvalidState("backward called on a forward pass recorded against stale parameters");
  if (pass.options.params && bopt.scale_bias)
    throw InvalidState("cannot attribute scale/bias gradients for an explicit param set");

  Gradients grads;
  grads.gbn.resize(net.gbn_count());
  if (bopt.shared) grads.dense.resize(net.dense().size());

  Matrix dz = loss_gradient_logits(pass.probs, loss);
  for (std::size_t ii = net.dense().size(); ii-- > 0;) {
    const DenseLayer& d = net.dense()[ii];
    const Matrix& in = pass.dense_inputs[ii];
    if (bopt.shared) {
      DenseLayer g{Matrix(d.weight.rows(), d.weight.cols()), Vector(d.bias.size(), 0.0)};
      for (std::size_t r = 0; r < dz.rows(); ++r)
        for (std::size_t o = 0; o < d.weight.rows(); ++o) {
          const double v = dz(r, o);
          g.bias[o] += v;
          for (std::size_t i = 0; i < d.weight.cols(); ++i) g.weight(o, i) += v * in(r, i);
        }
      grads.dense[ii] = std::move(g);
    }
    Matrix din(dz.rows(), d.weight.cols());
    for (std::size_t r = 0; r < dz.rows(); ++r)
      for (std::size_t o = 0; o < d.weight.rows(); ++o) {
        const double v = dz(r, o);
        if (v == 0.0) continue;
        for (std::size_t i = 0; i < d.weight.cols(); ++i) din(r, i) += v * d.weight(o, i);
      }
    if (ii == 0) {
      grads.input = std::move(din);
      break;
    }
    const std::size_t l = ii - 1;
    const Matrix& pre = pass.gbn_outputs[l];
    for (std::size_t k = 0; k < din.data().size(); ++k)
      if (pre.data()[k] <= 0.0) din.data()[k] = 0.0;
    GbnGrad gg = gbn_backward(pass.gbn_caches[l], din);
    if (bopt.scale_bias) {
      const auto& contributions = pass.gbn_caches[l].contributions;
      auto& slot = grads.gbn[l];
      if (contributions.empty()) {
        slot[pass.options.domain] = {gg.dgamma, gg.dbeta};
      } else {
        for (const auto& c : contributions) {
          ScaleBiasGrad sb{gg.dgamma, gg.dbeta};
          for (double& v : sb.gamma) v *= c.weight;
          for (double& v : sb.beta) v *= c.weight;
          slot[c.id] = std::move(sb);
        }
      }
    }
    dz = std::move(gg.dx);
  }
  return grads;
}

/// p <- p - lr * g for every parameter present in `grads`.
inline void sgd_step(Network& net, const Gradients& grads, double lr) {
  if (!grads.dense.empty()) {
    if (grads.dense.size() != net.dense().size())
      throw DimensionError("gradient has wrong number of dense layers");
    for (std::size_t i = 0; i < grads.dense.size(); ++i) {
      DenseLayer& p = net.dense()[i];
      const DenseLayer& g = grads.dense[i];
      if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
          g.bias.size() != p.bias.size())
        throw DimensionError("dense gradient shape mismatch at layer " + std::to_string(i));
      for (std::size_t k = 0; k < p.weight.data().size(); ++k)
        p.weight.data()[k] -= lr * g.weight.data()[k];
      for (std::size_t k = 0; k < p.bias.size(); ++k) p.bias[k] -= lr * g.bias[k];
    }
  }
  if (!grads.gbn.empty() && grads.gbn.size() != net.gbn_count())
    throw DimensionError("gradient has wrong number of GBN layers");
  for (std::size_t l = 0; l < grads.gbn.size(); ++l) {
    for (const auto& [id, g] : grads.gbn[l]) {
      LayerParams& e = net.gbn()[l].entry(id);
      if (g.gamma.size() != e.channels() || g.beta.size() != e.channels())
        throw DimensionError("scale/bias gradient width mismatch");
      for (std::size_t j = 0; j < e.channels(); ++j) {
        e.gamma[j] -= lr * g.gamma[j];
        e.beta[j] -= lr * g.beta[j];
      }
    }
  }
  net.bump_generation();
}

inline std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace adagraph
