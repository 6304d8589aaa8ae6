#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adagraph/errors.hpp"
#include "adagraph/matrix.hpp"

namespace adagraph {

using DomainId = int;

/// Domain descriptor. Components are expected to be pre-normalized to
/// [0,1]; the graph only checks that they are finite.
struct Metadata {
  Vector values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const Metadata&, const Metadata&) = default;
};

enum class DistanceKind { SquaredEuclideanOver2Sigma };

struct KernelConfig {
  double sigma = 0.1;
  DistanceKind distance = DistanceKind::SquaredEuclideanOver2Sigma;
};

enum class NodeRole { Source, Auxiliary, Virtual };

inline const char* to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Source: return "source";
    case NodeRole::Auxiliary: return "auxiliary";
    case NodeRole::Virtual: return "virtual";
  }
  return "?";
}

inline NodeRole node_role_from_string(const std::string& s) {
  if (s == "source") return NodeRole::Source;
  if (s == "auxiliary") return NodeRole::Auxiliary;
  if (s == "virtual") return NodeRole::Virtual;
  throw FormatError("unknown node role '" + s + "'");
}

/// Statistics and scale/bias of one normalization layer for one domain.
struct LayerParams {
  Vector mu;
  Vector var;
  Vector gamma;
  Vector beta;

  std::size_t channels() const { return mu.size(); }

  static LayerParams identity(std::size_t channels) {
    return {Vector(channels, 0.0), Vector(channels, 1.0), Vector(channels, 1.0),
            Vector(channels, 0.0)};
  }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Domain-specific parameter set: one LayerParams per normalization layer.
struct ParamSet {
  std::vector<LayerParams> layers;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

struct DomainNode {
  DomainId id = 0;
  Metadata metadata;
  NodeRole role = NodeRole::Auxiliary;
  std::optional<ParamSet> params;
};

inline void validate_metadata(const Metadata& m) {
  for (double v : m.values)
    if (!std::isfinite(v)) throw InvalidMetadata("metadata component is not finite");
}

inline double metadata_distance(const Metadata& a, const Metadata& b, const KernelConfig& k) {
  if (a.size() != b.size())
    throw DimensionError("metadata length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  if (!(k.sigma > 0.0)) throw InvalidGraph("kernel sigma must be positive");
  validate_metadata(a);
  validate_metadata(b);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sq += d * d;
  }
  return sq / (2.0 * k.sigma);
}

inline double kernel_weight(const Metadata& a, const Metadata& b, const KernelConfig& k) {
  return std::exp(-metadata_distance(a, b, k));
}

/// Normalized contribution of one node to a convex combination.
struct NodeWeight {
  DomainId id;
  double weight;
};

/// Convex combination of per-node vectors, evaluated as
/// ref + sum_i w_i * (v_i - ref) with ref = the largest-weight contributor.
/// Identical inputs and one-hot weights therefore reproduce a stored value
/// exactly; the result is clamped to the contributors' envelope to absorb
/// rounding.
inline Vector convex_combination(std::span<const double> weights,
                                 std::span<const Vector* const> values) {
  if (weights.size() != values.size() || values.empty())
    throw DimensionError("convex_combination: weights/values mismatch");
  std::size_t ref_index = 0;
  for (std::size_t i = 1; i < weights.size(); ++i)
    if (weights[i] > weights[ref_index]) ref_index = i;
  const Vector& ref = *values[ref_index];
  const std::size_t n = ref.size();
  for (const Vector* v : values)
    if (v->size() != n) throw DimensionError("convex_combination: channel width mismatch");
  Vector out(n);
  for (std::size_t c = 0; c < n; ++c) {
    double acc = 0.0;
    double lo = ref[c];
    double hi = ref[c];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = (*values[i])[c];
      acc += weights[i] * (v - ref[c]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[c] = std::clamp(ref[c] + acc, lo, hi);
  }
  return out;
}

/// Mixes whole parameter sets field by field with the given normalized
/// weights.
inline ParamSet mix_params(std::span<const double> weights, std::span<const ParamSet* const> sets) {
  if (sets.empty()) throw EmptyGraphError("mix_params: no contributors");
  const std::size_t n_layers = sets.front()->layers.size();
  for (const ParamSet* s : sets)
    if (s->layers.size() != n_layers) throw DimensionError("mix_params: layer count mismatch");
  ParamSet out;
  out.layers.resize(n_layers);
  std::vector<const Vector*> field(sets.size());
  auto mix_field = [&](std::size_t layer, Vector LayerParams::*member) {
    for (std::size_t i = 0; i < sets.size(); ++i) field[i] = &(sets[i]->layers[layer].*member);
    return convex_combination(weights, field);
  };
  for (std::size_t l = 0; l < n_layers; ++l) {
    out.layers[l].mu = mix_field(l, &LayerParams::mu);
    out.layers[l].var = mix_field(l, &LayerParams::var);
    out.layers[l].gamma = mix_field(l, &LayerParams::gamma);
    out.layers[l].beta = mix_field(l, &LayerParams::beta);
  }
  return out;
}

/// Complete weighted graph over domains. Nodes are kept ordered by id so
/// every weighted sum is evaluated in ascending-id order.
class DomainGraph {
 public:
  explicit DomainGraph(std::size_t metadata_dim, KernelConfig kernel = {}, double min_weight = 0.0)
      : metadata_dim_(metadata_dim), kernel_(kernel), min_weight_(min_weight) {
    if (!(kernel_.sigma > 0.0)) throw InvalidGraph("kernel sigma must be positive");
    if (min_weight_ < 0.0 || min_weight_ >= 1.0) throw InvalidGraph("min_weight must lie in [0,1)");
  }

  std::size_t metadata_dim() const { return metadata_dim_; }
  const KernelConfig& kernel() const { return kernel_; }
  double min_weight() const { return min_weight_; }
  std::size_t size() const { return nodes_.size(); }
  const std::map<DomainId, DomainNode>& nodes() const { return nodes_; }

  bool contains(DomainId id) const { return nodes_.contains(id); }

  const DomainNode& node(DomainId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownDomain("domain " + std::to_string(id) + " not in graph");
    return it->second;
  }

  const DomainNode& add_node(DomainId id, Metadata metadata, NodeRole role) {
    if (metadata.size() != metadata_dim_)
      throw DimensionError("metadata has " + std::to_string(metadata.size()) +
                           " components, graph expects " + std::to_string(metadata_dim_));
    validate_metadata(metadata);
    if (nodes_.contains(id)) throw DuplicateNode("domain " + std::to_string(id) + " already present");
    if (role == NodeRole::Source && source_id())
      throw InvalidGraph("graph already has a source node");
    auto [it, _] = nodes_.emplace(id, DomainNode{id, std::move(metadata), role, std::nullopt});
    return it->second;
  }

  const DomainNode& add_virtual_node(DomainId id, Metadata metadata) {
    return add_node(id, std::move(metadata), NodeRole::Virtual);
  }

  void assign_params(DomainId id, ParamSet params) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownDomain("domain " + std::to_string(id) + " not in graph");
    for (const auto& layer : params.layers) {
      const std::size_t c = layer.channels();
      if (layer.var.size() != c || layer.gamma.size() != c || layer.beta.size() != c)
        throw DimensionError("param set fields have unequal channel widths");
      for (double v : layer.var)
        if (v < 0.0) throw InvalidState("negative variance in param set");
    }
    it->second.params = std::move(params);
  }

  std::optional<DomainId> source_id() const {
    for (const auto& [id, n] : nodes_)
      if (n.role == NodeRole::Source) return id;
    return std::nullopt;
  }

  /// Ids of nodes that carry data (source and auxiliaries), ascending.
  std::vector<DomainId> known_ids() const {
    std::vector<DomainId> out;
    for (const auto& [id, n] : nodes_)
      if (n.role != NodeRole::Virtual) out.push_back(id);
    return out;
  }

 private:
  std::size_t metadata_dim_;
  KernelConfig kernel_;
  double min_weight_;
  std::map<DomainId, DomainNode> nodes_;
};

inline double edge_weight(const DomainNode& a, const DomainNode& b, const DomainGraph& g) {
  return kernel_weight(a.metadata, b.metadata, g.kernel());
}

inline const DomainNode& add_virtual_node(DomainGraph& g, DomainId id, Metadata m) {
  return g.add_virtual_node(id, std::move(m));
}

/// Normalized edge weights from `target` to every non-virtual node that has
/// assigned params, excluding the target itself. Ascending node id.
inline std::vector<NodeWeight> node_weights(const DomainGraph& g, DomainId target) {
  const DomainNode& t = g.node(target);
  std::vector<NodeWeight> out;
  double total = 0.0;
  for (const auto& [id, n] : g.nodes()) {
    if (id == target || n.role == NodeRole::Virtual || !n.params) continue;
    const double w = edge_weight(t, n, g);
    if (g.min_weight() > 0.0 && !(w > g.min_weight())) continue;
    out.push_back({id, w});
    total += w;
  }
  if (out.empty() || !(total > 0.0))
    throw EmptyGraphError("no parameterized neighbours for domain " + std::to_string(target));
  for (auto& nw : out) nw.weight /= total;
  return out;
}

/// Regresses params for `target` from its neighbours and assigns them.
inline ParamSet propagate_params(DomainGraph& g, DomainId target) {
  const auto weights = node_weights(g, target);
  std::vector<double> w;
  std::vector<const ParamSet*> sets;
  for (const auto& nw : weights) {
    w.push_back(nw.weight);
    sets.push_back(&*g.node(nw.id).params);
  }
  ParamSet out = mix_params(w, sets);
  g.assign_params(target, out);
  return out;
}

}  // namespace adagraph
