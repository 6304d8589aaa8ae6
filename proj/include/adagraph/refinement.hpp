#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adagraph/errors.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/matrix.hpp"
#include "adagraph/network.hpp"

namespace adagraph {

enum class RefineMode {
  None,       // frozen model, classification only
  StatsOnly,  // buffered statistics updates
  Full,       // statistics plus an entropy step on scale/bias
};

/// Fixed-capacity store of the most recent target samples.
struct RefinementBuffer {
  std::size_t capacity = 16;
  double alpha = 0.1;
  double refine_lr = 1e-3;
  std::vector<Vector> samples;

  bool full() const { return samples.size() >= capacity; }
  std::size_t size() const { return samples.size(); }
  void clear() { samples.clear(); }

  void push(Vector x) {
    if (full()) throw InvalidState("refinement buffer overflow");
    samples.push_back(std::move(x));
  }

  Matrix as_matrix() const { return Matrix::from_rows(samples); }

  void validate() const {
    if (capacity < 2) throw ConfigError("buffer capacity must be at least 2");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
    if (refine_lr < 0.0) throw ConfigError("refine_lr must be non-negative");
  }
};

inline void require_ready(const RefinementBuffer& buf) {
  if (buf.capacity < 2 || buf.samples.size() != buf.capacity)
    throw BufferNotReady("buffer holds " + std::to_string(buf.samples.size()) + " of " +
                         std::to_string(buf.capacity) + " samples");
}

/// Mean and biased variance of every GBN layer's pre-normalization input,
/// from an eval-mode pass over the buffer with the target's current params.
inline std::vector<BatchStats> buffer_stats(const RefinementBuffer& buf, const Network& net,
                                            DomainId target) {
  require_ready(buf);
  const ForwardPass pass = run_forward(net, buf.as_matrix(), {Mode::Eval, target, nullptr, nullptr});
  std::vector<BatchStats> out;
  for (const auto& c : pass.gbn_caches) out.push_back(batch_stats(c.input));
  return out;
}

/// Momentum update of the target statistics with a Bessel-corrected
/// buffer variance, applied to every GBN layer.
inline void update_target_stats(Network& net, DomainId target, const std::vector<BatchStats>& stats,
                                std::size_t buffer_size, double alpha) {
  if (buffer_size < 2) throw BufferNotReady("buffer size must be at least 2");
  if (stats.size() != net.gbn_count()) throw DimensionError("one BatchStats per GBN layer expected");
  if (alpha < 0.0 || alpha > 1.0) throw InvalidState("alpha must lie in [0,1]");
  const double m = static_cast<double>(buffer_size);
  const double bessel = m / (m - 1.0);
  for (std::size_t l = 0; l < stats.size(); ++l) {
    LayerParams& e = net.gbn()[l].entry(target);
    if (stats[l].mu.size() != e.channels()) throw DimensionError("buffer stats width mismatch");
    for (std::size_t j = 0; j < e.channels(); ++j) {
      e.mu[j] = (1.0 - alpha) * e.mu[j] + alpha * stats[l].mu[j];
      e.var[j] = std::max(0.0, (1.0 - alpha) * e.var[j] + alpha * bessel * stats[l].var[j]);
    }
  }
}

inline void update_target_stats(Network& net, DomainId target, const RefinementBuffer& buf) {
  update_target_stats(net, target, buffer_stats(buf, net, target), buf.capacity, buf.alpha);
}

/// One gradient step of the buffer's mean prediction entropy w.r.t. the
/// target's scale/bias only. Returns the entropy before the step.
inline double refine_scale_bias(Network& net, DomainId target, const RefinementBuffer& buf, double lr) {
  require_ready(buf);
  if (!net.has_domain(target))
    throw InvalidState("target domain " + std::to_string(target) + " is not instantiated");
  const ForwardPass pass = run_forward(net, buf.as_matrix(), {Mode::Eval, target, nullptr, nullptr});
  const Loss loss = Loss::entropy();
  const double before = loss_value(pass.probs, loss);
  Gradients g = backward(net, pass, loss, {false, true});
  sgd_step(net, g, lr);
  return before;
}

/// Prequential stream adapter: classify, buffer, and update when full.
class RefinementEngine {
 public:
  RefinementEngine(Network net, DomainId target, RefinementBuffer buffer, RefineMode mode)
      : net_(std::move(net)), target_(target), buffer_(std::move(buffer)), mode_(mode) {
    buffer_.validate();
    if (!net_.has_domain(target_))
      throw InvalidState("target domain " + std::to_string(target_) + " is not instantiated");
  }

  /// Returns the class predicted for `x` before any update triggered by it.
  int step(const Vector& x) {
    const Matrix p = predict_proba(net_, Matrix::from_rows({x}), {Mode::Eval, target_, nullptr, nullptr});
    const int pred = argmax_rows(p).front();
    if (mode_ == RefineMode::None) return pred;
    buffer_.push(x);
    if (buffer_.full()) {
      update_target_stats(net_, target_, buffer_);
      if (mode_ == RefineMode::Full) refine_scale_bias(net_, target_, buffer_, buffer_.refine_lr);
      buffer_.clear();
      ++updates_;
    }
    return pred;
  }

  const Network& network() const { return net_; }
  const RefinementBuffer& buffer() const { return buffer_; }
  std::size_t updates() const { return updates_; }
  DomainId target() const { return target_; }

 private:
  Network net_;
  DomainId target_;
  RefinementBuffer buffer_;
  RefineMode mode_;
  std::size_t updates_ = 0;
};

}  // namespace adagraph
