#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/matrix.hpp"
#include "adagraph/network.hpp"

namespace adagraph {

struct Sample {
  Vector x;
  std::optional<int> y;
  DomainId domain = 0;
};

using Dataset = std::vector<Sample>;
using DomainDatasets = std::map<DomainId, Dataset>;

struct TrainConfig {
  int epochs_stage1 = 30;
  int epochs_stage2 = 1;
  double lr_stage1 = 0.05;
  double lr_stage2 = 0.005;
  std::size_t batch_size = 16;
  double lambda = 1.0;
  double gbn_momentum = 0.1;
  std::uint64_t seed = 0;
  // Stage-2 toggles. Defaults are the full graph-aware procedure.
  bool train_shared_stage2 = false;
  bool train_scale_bias_stage2 = true;
  bool graph_forward_stage2 = true;

  void validate() const {
    if (epochs_stage1 < 0 || epochs_stage2 < 0) throw ConfigError("epochs must be non-negative");
    if (!(lr_stage1 > 0.0) || !(lr_stage2 > 0.0)) throw ConfigError("learning rates must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (!(gbn_momentum > 0.0 && gbn_momentum <= 1.0))
      throw ConfigError("gbn_momentum must lie in (0,1]");
  }
};

/// A single-domain batch, given as indices into that domain's dataset.
struct Batch {
  DomainId domain = 0;
  std::vector<std::size_t> indices;

  friend bool operator==(const Batch&, const Batch&) = default;
};

class DomainBatchSchedule {
 public:
  explicit DomainBatchSchedule(std::vector<Batch> batches) : batches_(std::move(batches)) {}

  std::size_t size() const { return batches_.size(); }
  auto begin() const { return batches_.begin(); }
  auto end() const { return batches_.end(); }
  const Batch& operator[](std::size_t i) const { return batches_[i]; }
  const std::vector<Batch>& batches() const { return batches_; }

 private:
  std::vector<Batch> batches_;
};

/// One epoch of single-domain batches. Each domain is shuffled with its own
/// seed-derived stream and chunked; trailing chunks smaller than two samples
/// are dropped. The domain served at each step is drawn uniformly among
/// domains that still have batches left.
inline DomainBatchSchedule make_schedule(const std::map<DomainId, std::size_t>& sizes,
                                         std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  std::map<DomainId, std::vector<Batch>> per_domain;
  for (const auto& [id, n] : sizes) {
    if (n == 0) throw EmptyDataset("domain " + std::to_string(id) + " has no samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 0x5348u, static_cast<std::uint64_t>(id)));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto& list = per_domain[id];
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      if (stop - start < 2) break;
      list.push_back({id, std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                                   idx.begin() + static_cast<std::ptrdiff_t>(stop))});
    }
  }
  std::vector<Batch> out;
  std::map<DomainId, std::size_t> cursor;
  std::vector<DomainId> live;
  for (const auto& [id, list] : per_domain)
    if (!list.empty()) live.push_back(id);
  std::mt19937_64 order(derive_seed(seed, 0x4f52u));
  while (!live.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
    const std::size_t k = pick(order);
    const DomainId id = live[k];
    out.push_back(per_domain[id][cursor[id]++]);
    if (cursor[id] == per_domain[id].size()) live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return DomainBatchSchedule(std::move(out));
}

inline DomainBatchSchedule make_schedule(const DomainDatasets& data, std::size_t batch_size,
                                         std::uint64_t seed) {
  std::map<DomainId, std::size_t> sizes;
  for (const auto& [id, d] : data) sizes[id] = d.size();
  return make_schedule(sizes, batch_size, seed);
}

inline Matrix gather_features(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return {};
  Matrix x(indices.size(), data[indices[0]].x.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Vector& v = data[indices[r]].x;
    if (v.size() != x.cols()) throw DimensionError("samples have inconsistent feature width");
    std::copy(v.begin(), v.end(), x.row(r).begin());
  }
  return x;
}

inline Matrix gather_features(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather_features(data, idx);
}

inline std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    if (!data[i].y) throw LabelError("sample " + std::to_string(i) + " is unlabeled");
    y.push_back(*data[i].y);
  }
  return y;
}

inline std::vector<int> gather_labels(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather_labels(data, idx);
}

struct TrainLogRow {
  std::size_t step = 0;
  DomainId domain = 0;
  LossKind term = LossKind::CrossEntropy;
  double value = 0.0;
};

using TrainLog = std::vector<TrainLogRow>;

inline void write_train_log_csv(std::ostream& os, const TrainLog& log) {
  os << "step,domain,term,loss\n";
  const auto old = os.precision(17);
  for (const auto& r : log)
    os << r.step << ',' << r.domain << ',' << (r.term == LossKind::CrossEntropy ? "ce" : "ent")
       << ',' << r.value << '\n';
  os.precision(old);
}

struct Stage1Result {
  std::vector<double> epoch_mean_loss;
  ParamSet source_params;
};

/// Supervised training of shared weights and the source domain's GBN entry
/// with cross-entropy.
inline Stage1Result stage1_source(Network& net, const Dataset& source, DomainId source_id,
                                  const TrainConfig& cfg, TrainLog* log = nullptr) {
  cfg.validate();
  if (source.empty()) throw EmptyDataset("stage1: source dataset is empty");
  for (const auto& s : source) {
    if (!s.y) throw LabelError("stage1: source sample without label");
    if (s.domain != source_id) throw UnknownDomain("stage1: sample tagged with a non-source domain");
  }
  if (!net.has_domain(source_id)) {
    ParamSet init;
    for (const auto& l : net.gbn()) init.layers.push_back(LayerParams::identity(l.channels()));
    net.set_domain_params(source_id, init);
  }
  for (auto& l : net.gbn()) l.set_momentum(cfg.gbn_momentum);

  Stage1Result result;
  std::size_t step = 0;
  const std::map<DomainId, std::size_t> sizes{{source_id, source.size()}};
  for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const auto schedule = make_schedule(sizes, cfg.batch_size, derive_seed(cfg.seed, 1, epoch));
    double total = 0.0;
    for (const Batch& b : schedule) {
      const Matrix x = gather_features(source, b.indices);
      const Loss loss = Loss::cross_entropy(gather_labels(source, b.indices));
      ForwardPass pass = run_forward(net, x, {Mode::Train, source_id, nullptr, nullptr});
      const double value = loss_value(pass.probs, loss);
      Gradients g = backward(net, pass, loss);
      commit_batch_stats(net, pass);
      sgd_step(net, g, cfg.lr_stage1);
      total += value;
      if (log) log->push_back({step, source_id, LossKind::CrossEntropy, value});
      ++step;
    }
    result.epoch_mean_loss.push_back(schedule.size() ? total / static_cast<double>(schedule.size())
                                                     : 0.0);
  }
  result.source_params = net.domain_params(source_id);
  return result;
}

struct Stage2Stats {
  std::size_t cross_entropy_steps = 0;
  std::size_t entropy_steps = 0;
};

/// Multi-domain stage: source batches carry cross-entropy, auxiliary
/// batches the lambda-weighted entropy. Statistics update per domain from
/// that domain's batches only. On return every known node of `g` holds its
/// ParamSet.
inline Stage2Stats stage2_graph(Network& net, DomainGraph& g, const Dataset& source,
                                const DomainDatasets& aux, const TrainConfig& cfg,
                                TrainLog* log = nullptr) {
  cfg.validate();
  const auto src = g.source_id();
  if (!src) throw InvalidGraph("stage2: graph has no source node");
  const DomainId source_id = *src;
  if (!net.has_domain(source_id)) throw InvalidState("stage2: run stage1 before stage2");
  if (source.empty()) throw EmptyDataset("stage2: source dataset is empty");

  for (const auto& [id, data] : aux) {
    const DomainNode& n = g.node(id);
    if (n.role != NodeRole::Auxiliary)
      throw InvalidGraph("stage2: domain " + std::to_string(id) + " is not an auxiliary node");
    if (data.size() < cfg.batch_size)
      throw EmptyDataset("stage2: auxiliary domain " + std::to_string(id) + " has fewer than " +
                         std::to_string(cfg.batch_size) + " samples");
  }
  for (DomainId id : g.known_ids())
    if (id != source_id && !aux.contains(id))
      throw EmptyDataset("stage2: auxiliary node " + std::to_string(id) + " has no data");

  for (auto& l : net.gbn()) l.set_momentum(cfg.gbn_momentum);
  for (const auto& [id, _] : aux) net.copy_domain(source_id, id);

  std::map<DomainId, const Dataset*> data;
  data[source_id] = &source;
  for (const auto& [id, d] : aux) data[id] = &d;
  std::map<DomainId, std::size_t> sizes;
  for (const auto& [id, d] : data) sizes[id] = d->size();

  const BackwardOptions bopt{cfg.train_shared_stage2, cfg.train_scale_bias_stage2};
  const bool needs_gradient = bopt.shared || bopt.scale_bias;
  Stage2Stats stats;
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    const auto schedule = make_schedule(sizes, cfg.batch_size, derive_seed(cfg.seed, 2, epoch));
    for (const Batch& b : schedule) {
      const Dataset& d = *data.at(b.domain);
      const Matrix x = gather_features(d, b.indices);
      const bool is_source = b.domain == source_id;
      // Auxiliary labels are never read.
      const Loss loss = is_source ? Loss::cross_entropy(gather_labels(d, b.indices))
                                  : Loss::entropy(cfg.lambda);
      ForwardOptions opt{Mode::Train, b.domain, cfg.graph_forward_stage2 ? &g : nullptr, nullptr};
      ForwardPass pass = run_forward(net, x, opt);
      const double value = loss_value(pass.probs, loss);
      if (needs_gradient) {
        Gradients grads = backward(net, pass, loss, bopt);
        commit_batch_stats(net, pass);
        sgd_step(net, grads, cfg.lr_stage2);
      } else {
        commit_batch_stats(net, pass);
      }
      (is_source ? stats.cross_entropy_steps : stats.entropy_steps)++;
      if (log) log->push_back({step, b.domain, loss.kind, value});
      ++step;
    }
  }
  for (DomainId id : g.known_ids()) g.assign_params(id, net.domain_params(id));
  return stats;
}

}  // namespace adagraph
