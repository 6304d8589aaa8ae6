#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/network.hpp"
#include "adagraph/training.hpp"

namespace adagraph {

/// A network specialized for one target domain whose GBN entry was
/// regressed from the graph.
struct TargetModel {
  Network net;
  DomainGraph graph;
  DomainId target = 0;
  bool graph_forward = true;

  ForwardOptions options() const {
    return {Mode::Eval, target, graph_forward ? &graph : nullptr, nullptr};
  }

  Matrix predict_proba(const Matrix& x) const { return adagraph::predict_proba(net, x, options()); }
};

/// Adds `target_id` as a virtual node with metadata `m`, regresses its GBN
/// statistics and scale/bias from the known nodes and installs them in a
/// copy of `net`. Evaluation uses the graph-blended forward.
inline TargetModel predict_from_metadata(const DomainGraph& g, const Network& net, const Metadata& m,
                                         DomainId target_id) {
  TargetModel model{net, g, target_id, true};
  model.graph.add_virtual_node(target_id, m);
  const ParamSet params = propagate_params(model.graph, target_id);
  model.net.set_domain_params(target_id, params);
  return model;
}

struct MixtureDistribution {
  std::map<DomainId, double> weights;
};

/// Synthesizes sum_v p(v) * psi(v) over the mixture's support.
inline ParamSet mixture_params(const DomainGraph& g, const MixtureDistribution& p) {
  if (p.weights.empty()) throw NodeSetMismatch("empty mixture");
  std::vector<double> w;
  std::vector<const ParamSet*> sets;
  for (const auto& [id, weight] : p.weights) {
    if (!g.contains(id)) throw NodeSetMismatch("mixture node " + std::to_string(id) + " not in graph");
    const DomainNode& n = g.node(id);
    if (!n.params)
      throw NodeSetMismatch("mixture node " + std::to_string(id) + " has no parameters");
    if (weight < 0.0) throw InvalidState("negative mixture weight");
    w.push_back(weight);
    sets.push_back(&*n.params);
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw InvalidState("mixture weights sum to zero");
  for (double& v : w) v /= total;
  return mix_params(w, sets);
}

/// Domain classifier over the known domains: class i is domains[i].
struct MetadataClassifier {
  static constexpr DomainId kInternalDomain = 0;

  Network net;
  std::vector<DomainId> domains;

  Matrix predict_proba(const Matrix& x) const {
    return adagraph::predict_proba(net, x, {Mode::Eval, kInternalDomain, nullptr, nullptr});
  }

  MixtureDistribution mixture(const Vector& x) const {
    const Matrix p = predict_proba(Matrix::from_rows({x}));
    MixtureDistribution out;
    for (std::size_t i = 0; i < domains.size(); ++i) out.weights[domains[i]] = p(0, i);
    return out;
  }
};

/// Trains a classifier whose labels are domain indices (ascending id). Uses
/// the stage-1 schedule, learning rate and epoch count of `cfg`.
inline MetadataClassifier train_metadata_classifier(const DomainDatasets& data, const TrainConfig& cfg,
                                                    const NetworkShape& base_shape = {}) {
  std::vector<DomainId> domains;
  for (const auto& [id, d] : data)
    if (!d.empty()) domains.push_back(id);
  if (domains.size() < 2) throw DegenerateTask("metadata classifier needs at least two domains");
  Dataset merged;
  for (std::size_t i = 0; i < domains.size(); ++i)
    for (const Sample& s : data.at(domains[i]))
      merged.push_back({s.x, static_cast<int>(i), MetadataClassifier::kInternalDomain});
  NetworkShape shape = base_shape;
  shape.input_dim = merged.front().x.size();
  shape.num_classes = domains.size();
  MetadataClassifier clf{Network(shape, MetadataClassifier::kInternalDomain, derive_seed(cfg.seed, 0x4d43u)),
                         domains};
  stage1_source(clf.net, merged, MetadataClassifier::kInternalDomain, cfg);
  return clf;
}

/// Class probabilities for one input using parameters mixed according to
/// the metadata classifier's domain posterior, with the plain GBN forward.
inline Vector predict_from_image(const DomainGraph& g, const Network& net, const MetadataClassifier& fm,
                                 const Vector& x) {
  if (fm.domains != g.known_ids())
    throw NodeSetMismatch("metadata classifier domains differ from the graph's known nodes");
  const ParamSet params = mixture_params(g, fm.mixture(x));
  const Matrix p = adagraph::predict_proba(net, Matrix::from_rows({x}),
                                           {Mode::Eval, 0, nullptr, &params});
  return {p.row(0).begin(), p.row(0).end()};
}

}  // namespace adagraph
