#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/network.hpp"
#include "adagraph/prediction.hpp"

// JSON documents for graphs and trained models. Doubles are written with
// 17 significant digits, which round-trips every finite binary64 value.

namespace adagraph {

using json = nlohmann::json;

namespace detail {

inline Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + " must be an array");
  Vector v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw FormatError(std::string(what) + " must contain numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing key '") + key + "'");
  return j.at(key);
}

}  // namespace detail

inline json layer_params_to_json(const LayerParams& p) {
  return {{"mu", p.mu}, {"var", p.var}, {"gamma", p.gamma}, {"beta", p.beta}};
}

inline LayerParams layer_params_from_json(const json& j) {
  return {detail::vector_from_json(detail::require(j, "mu"), "mu"),
          detail::vector_from_json(detail::require(j, "var"), "var"),
          detail::vector_from_json(detail::require(j, "gamma"), "gamma"),
          detail::vector_from_json(detail::require(j, "beta"), "beta")};
}

inline json param_set_to_json(const ParamSet& p) {
  json layers = json::array();
  for (const auto& l : p.layers) layers.push_back(layer_params_to_json(l));
  return {{"layers", layers}};
}

inline ParamSet param_set_from_json(const json& j) {
  ParamSet p;
  for (const auto& l : detail::require(j, "layers")) p.layers.push_back(layer_params_from_json(l));
  return p;
}

/// {metadata_dim, sigma, nodes:[{id, role, metadata, params}]}; `params` is
/// null for nodes without assigned parameters. min_weight is written only
/// when the filter is active.
inline json graph_to_json(const DomainGraph& g) {
  json nodes = json::array();
  for (const auto& [id, n] : g.nodes()) {
    nodes.push_back({{"id", id},
                     {"role", to_string(n.role)},
                     {"metadata", n.metadata.values},
                     {"params", n.params ? param_set_to_json(*n.params) : json(nullptr)}});
  }
  json j = {{"metadata_dim", g.metadata_dim()}, {"sigma", g.kernel().sigma}, {"nodes", nodes}};
  if (g.min_weight() > 0.0) j["min_weight"] = g.min_weight();
  return j;
}

inline DomainGraph graph_from_json(const json& j) {
  try {
    KernelConfig k;
    k.sigma = detail::require(j, "sigma").get<double>();
    const double min_weight = j.contains("min_weight") ? j.at("min_weight").get<double>() : 0.0;
    DomainGraph g(detail::require(j, "metadata_dim").get<std::size_t>(), k, min_weight);
    for (const auto& n : detail::require(j, "nodes")) {
      const DomainId id = detail::require(n, "id").get<DomainId>();
      g.add_node(id, Metadata{detail::vector_from_json(detail::require(n, "metadata"), "metadata")},
                 node_role_from_string(detail::require(n, "role").get<std::string>()));
      if (n.contains("params") && !n.at("params").is_null())
        g.assign_params(id, param_set_from_json(n.at("params")));
    }
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
}

inline json network_to_json(const Network& net) {
  json dense = json::array();
  for (const auto& d : net.dense()) {
    json rows = json::array();
    for (std::size_t r = 0; r < d.weight.rows(); ++r)
      rows.push_back(Vector(d.weight.row(r).begin(), d.weight.row(r).end()));
    dense.push_back({{"weight", rows}, {"bias", d.bias}});
  }
  json gbn = json::array();
  for (const auto& l : net.gbn()) {
    json domains = json::array();
    for (const auto& [id, e] : l.entries()) {
      json entry = layer_params_to_json(e);
      entry["id"] = id;
      domains.push_back(entry);
    }
    gbn.push_back({{"channels", l.channels()},
                   {"epsilon", l.epsilon()},
                   {"momentum", l.momentum()},
                   {"domains", domains}});
  }
  return {{"dense", dense}, {"gbn", gbn}};
}

inline Network network_from_json(const json& j) {
  try {
    std::vector<DenseLayer> dense;
    for (const auto& d : detail::require(j, "dense")) {
      std::vector<Vector> rows;
      for (const auto& r : detail::require(d, "weight")) rows.push_back(detail::vector_from_json(r, "weight"));
      dense.push_back({Matrix::from_rows(rows), detail::vector_from_json(detail::require(d, "bias"), "bias")});
    }
    std::vector<GbnLayer> gbn;
    for (const auto& l : detail::require(j, "gbn")) {
      GbnLayer layer(detail::require(l, "channels").get<std::size_t>(), detail::require(l, "epsilon").get<double>(),
                     detail::require(l, "momentum").get<double>());
      for (const auto& e : detail::require(l, "domains"))
        layer.set_entry(detail::require(e, "id").get<DomainId>(), layer_params_from_json(e));
      gbn.push_back(std::move(layer));
    }
    return Network(std::move(dense), std::move(gbn));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed network JSON: ") + e.what());
  }
}

/// Everything needed to rebuild predictions after a run.
struct Checkpoint {
  Network net;
  DomainGraph graph;
  std::optional<MetadataClassifier> classifier;
};

inline json checkpoint_to_json(const Checkpoint& c) {
  json j = {{"format", "adagraph-checkpoint"},
            {"version", 1},
            {"graph", graph_to_json(c.graph)},
            {"network", network_to_json(c.net)}};
  if (c.classifier)
    j["metadata_classifier"] = {{"domains", c.classifier->domains}, {"network", network_to_json(c.classifier->net)}};
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "adagraph-checkpoint")
    throw FormatError("not an adagraph checkpoint");
  Checkpoint c{network_from_json(detail::require(j, "network")), graph_from_json(detail::require(j, "graph")),
               std::nullopt};
  if (j.contains("metadata_classifier")) {
    const json& m = j.at("metadata_classifier");
    c.classifier = MetadataClassifier{network_from_json(detail::require(m, "network")),
                                      detail::require(m, "domains").get<std::vector<DomainId>>()};
  }
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace adagraph
