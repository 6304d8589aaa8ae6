#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/network.hpp"
#include "adagraph/prediction.hpp"
#include "adagraph/refinement.hpp"
#include "adagraph/training.hpp"

namespace adagraph {

// ---------------------------------------------------------------------------
// Synthetic domain family
// ---------------------------------------------------------------------------

enum class BaseDataset { TwoMoons, GaussianQuad };

inline const char* to_string(BaseDataset b) {
  return b == BaseDataset::TwoMoons ? "two_moons" : "gaussian_quad";
}

inline BaseDataset base_dataset_from_string(const std::string& s) {
  if (s == "two_moons") return BaseDataset::TwoMoons;
  if (s == "gaussian_quad") return BaseDataset::GaussianQuad;
  throw ConfigError("unknown base_dataset '" + s + "'");
}

inline std::size_t base_num_classes(BaseDataset b) { return b == BaseDataset::TwoMoons ? 2 : 4; }

/// A family of domains obtained by rotating (and optionally translating) a
/// base 2-D dataset. Rotation is about the origin; the base data is placed
/// `offset` away from it. Domain i of an angle grid sits at 360*i/n degrees.
struct DomainFamilySpec {
  BaseDataset base = BaseDataset::TwoMoons;
  std::size_t n_domains = 18;
  std::size_t samples_per_domain = 300;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  // >1 adds a second metadata component: translation level / (levels-1).
  std::size_t translation_levels = 1;
  double max_translation = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  std::size_t angle_steps() const { return n_domains / translation_levels; }

  void validate(std::size_t batch_size = 16) const {
    if (n_domains < 3) throw ConfigError("n_domains must be at least 3");
    if (translation_levels == 0 || n_domains % translation_levels != 0)
      throw ConfigError("n_domains must be a multiple of translation_levels");
    if (samples_per_domain < 2 * batch_size)
      throw ConfigError("samples_per_domain must be at least twice the batch size");
    if (!(noise_std > 0.0)) throw ConfigError("noise_std must be positive");
  }
};

struct DomainData {
  Dataset samples;
  Metadata metadata;
  double angle_deg = 0.0;
  double translation = 0.0;
};

using DomainFamily = std::map<DomainId, DomainData>;

inline Metadata family_metadata(const DomainFamilySpec& spec, double angle_deg, double translation) {
  Metadata m{{angle_deg / 360.0}};
  if (spec.translation_levels > 1) m.values.push_back(translation / spec.max_translation);
  return m;
}

/// Rotates about the origin by `angle_deg`, then shifts along +x.
inline Vector transform_point(const Vector& p, double angle_deg, double translation) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  return {c * p[0] - s * p[1] + translation, s * p[0] + c * p[1]};
}

/// Draws one labelled point of the base dataset (before any transform).
inline Sample draw_base_point(const DomainFamilySpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  if (spec.base == BaseDataset::TwoMoons) {
    std::uniform_int_distribution<int> label(0, 1);
    std::uniform_real_distribution<double> t(0.0, std::numbers::pi);
    const int y = label(rng);
    const double u = t(rng);
    Vector p = y == 0 ? Vector{std::cos(u), std::sin(u)} : Vector{1.0 - std::cos(u), 0.5 - std::sin(u)};
    p[0] += noise(rng) + spec.offset_x;
    p[1] += noise(rng) + spec.offset_y;
    return {std::move(p), y, 0};
  }
  std::uniform_int_distribution<int> label(0, 3);
  const int y = label(rng);
  const double cx = (y == 0 || y == 3) ? 1.0 : -1.0;
  const double cy = (y < 2) ? 1.0 : -1.0;
  return {{cx + 3.0 * noise(rng) + spec.offset_x, cy + 3.0 * noise(rng) + spec.offset_y}, y, 0};
}

inline std::uint64_t hash_doubles(std::uint64_t h, const Vector& v) {
  for (double d : v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Samples of one domain. The draw is seeded from the family seed and the
/// metadata, so equal metadata gives equal data.
inline DomainData generate_domain(const DomainFamilySpec& spec, DomainId id, double angle_deg,
                                  double translation, std::size_t n_samples) {
  DomainData d;
  d.metadata = family_metadata(spec, angle_deg, translation);
  d.angle_deg = angle_deg;
  d.translation = translation;
  std::mt19937_64 rng(derive_seed(spec.seed, hash_doubles(0xcbf29ce484222325ULL, d.metadata.values)));
  d.samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Sample s = draw_base_point(spec, rng);
    s.x = transform_point(s.x, angle_deg, translation);
    s.domain = id;
    d.samples.push_back(std::move(s));
  }
  return d;
}

inline DomainFamily generate_family(const DomainFamilySpec& spec, std::size_t batch_size = 16) {
  spec.validate(batch_size);
  DomainFamily out;
  const std::size_t steps = spec.angle_steps();
  for (std::size_t t = 0; t < spec.translation_levels; ++t) {
    const double translation =
        spec.translation_levels > 1
            ? spec.max_translation * static_cast<double>(t) / static_cast<double>(spec.translation_levels - 1)
            : 0.0;
    for (std::size_t a = 0; a < steps; ++a) {
      const DomainId id = static_cast<DomainId>(t * steps + a);
      const double angle = 360.0 * static_cast<double>(a) / static_cast<double>(steps);
      out.emplace(id, generate_domain(spec, id, angle, translation, spec.samples_per_domain));
    }
  }
  return out;
}

/// Circular angular distance in degrees.
inline double angular_distance(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

// ---------------------------------------------------------------------------
// Variants and run configuration
// ---------------------------------------------------------------------------

enum class VariantId {
  Baseline,
  BaselineRefine,
  AdaGraphBN,
  AdaGraphSB,
  AdaGraphFull,
  AdaGraphRefine,
  DAUpperBound,
};

inline const char* to_string(VariantId v) {
  switch (v) {
    case VariantId::Baseline: return "baseline";
    case VariantId::BaselineRefine: return "baseline_refine";
    case VariantId::AdaGraphBN: return "adagraph_bn";
    case VariantId::AdaGraphSB: return "adagraph_sb";
    case VariantId::AdaGraphFull: return "adagraph_full";
    case VariantId::AdaGraphRefine: return "adagraph_refine";
    case VariantId::DAUpperBound: return "da_upper_bound";
  }
  return "?";
}

inline VariantId variant_from_string(const std::string& s) {
  for (VariantId v : {VariantId::Baseline, VariantId::BaselineRefine, VariantId::AdaGraphBN,
                      VariantId::AdaGraphSB, VariantId::AdaGraphFull, VariantId::AdaGraphRefine,
                      VariantId::DAUpperBound})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown variant '" + s + "'");
}

/// The switches that distinguish the variants.
struct VariantToggles {
  bool use_graph = true;
  bool train_scale_bias = true;
  bool graph_forward_training = true;
  bool refine = false;
  bool target_as_auxiliary = false;
};

inline VariantToggles toggles_for(VariantId v) {
  switch (v) {
    case VariantId::Baseline: return {false, false, false, false, false};
    case VariantId::BaselineRefine: return {false, false, false, true, false};
    case VariantId::AdaGraphBN: return {true, false, true, false, false};
    case VariantId::AdaGraphSB: return {true, true, false, false, false};
    case VariantId::AdaGraphFull: return {true, true, true, false, false};
    case VariantId::AdaGraphRefine: return {true, true, true, true, false};
    case VariantId::DAUpperBound: return {true, true, true, false, true};
  }
  return {};
}

struct RunConfig {
  TrainConfig train;
  NetworkShape shape;
  KernelConfig kernel;
  double min_weight = 0.0;
  std::size_t buffer_capacity = 16;
  double alpha = 0.1;
  double refine_lr = 1e-3;
  bool record_wall_time = true;

  RefinementBuffer make_buffer() const {
    RefinementBuffer b;
    b.capacity = buffer_capacity;
    b.alpha = alpha;
    b.refine_lr = refine_lr;
    return b;
  }
};

struct ResultRow {
  DomainId source = 0;
  DomainId target = 0;
  VariantId variant = VariantId::Baseline;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double wall_time_s = 0.0;
  // Hash of every trained parameter before the target is touched.
  std::uint64_t state_hash = 0;
  std::size_t n_aux = 0;
};

inline std::uint64_t hash_network(const Network& net, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const auto& d : net.dense()) {
    h = hash_doubles(h, d.weight.data());
    h = hash_doubles(h, d.bias);
  }
  for (const auto& l : net.gbn())
    for (const auto& [id, e] : l.entries()) {
      h = hash_doubles(h, {static_cast<double>(id)});
      for (const Vector* v : {&e.mu, &e.var, &e.gamma, &e.beta}) h = hash_doubles(h, *v);
    }
  return h;
}

inline std::uint64_t hash_graph(const DomainGraph& g, std::uint64_t h) {
  for (const auto& [id, n] : g.nodes()) {
    h = hash_doubles(h, {static_cast<double>(id), static_cast<double>(static_cast<int>(n.role))});
    h = hash_doubles(h, n.metadata.values);
    if (n.params)
      for (const auto& l : n.params->layers)
        for (const Vector* v : {&l.mu, &l.var, &l.gamma, &l.beta}) h = hash_doubles(h, *v);
  }
  return h;
}

inline double accuracy(const Matrix& probs, const Dataset& data) {
  if (data.empty()) return 0.0;
  const auto pred = argmax_rows(probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].y && pred[i] == *data[i].y) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct StreamRow {
  std::size_t idx = 0;
  int pred = 0;
  int label = -1;
  bool correct = false;
  double cum_acc = 0.0;
};

/// Feeds samples to the engine in order and records prequential accuracy.
inline std::vector<StreamRow> run_stream(RefinementEngine& engine, const Dataset& stream) {
  std::vector<StreamRow> rows;
  rows.reserve(stream.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const int pred = engine.step(stream[i].x);
    const int label = stream[i].y ? *stream[i].y : -1;
    const bool ok = label >= 0 && pred == label;
    hits += ok ? 1 : 0;
    rows.push_back({i, pred, label, ok, static_cast<double>(hits) / static_cast<double>(i + 1)});
  }
  return rows;
}

/// The trained model a PDA run ends with, before any target-specific step.
struct PdaArtifacts {
  std::optional<Network> net;
  std::optional<DomainGraph> graph;
  DomainId source = 0;
};

inline Dataset shuffled(const Dataset& data, std::uint64_t seed) {
  Dataset out = data;
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

/// Stage-1 model for a (source, seed) pair. Deterministic, so PDA runs
/// sharing a source and seed may reuse it.
inline Network train_source_model(const DomainFamily& family, DomainId source, const RunConfig& cfg,
                                  std::uint64_t seed) {
  if (!family.contains(source)) throw UnknownDomain("source domain " + std::to_string(source) + " not in family");
  const DomainData& src = family.at(source);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  NetworkShape shape = cfg.shape;
  shape.input_dim = src.samples.front().x.size();
  for (const auto& s : src.samples)
    if (s.y) shape.num_classes = std::max(shape.num_classes, static_cast<std::size_t>(*s.y) + 1);
  Network net(shape, source, derive_seed(seed, 0x4e4554u));
  stage1_source(net, src.samples, source, tc);
  return net;
}

/// One predictive-DA run. The target's samples are used only for
/// evaluation (and, for DAUpperBound, as unlabeled training data).
/// `aux_subset`, when given, restricts the auxiliary domains;
/// `source_model`, when given, must be train_source_model's output for the
/// same source, config and seed.
inline ResultRow run_pda(const DomainFamily& family, VariantId variant, DomainId source, DomainId target,
                         const RunConfig& cfg, std::uint64_t seed,
                         const std::optional<std::vector<DomainId>>& aux_subset = std::nullopt,
                         PdaArtifacts* artifacts = nullptr, const Network* source_model = nullptr) {
  if (source == target) throw ConfigError("source and target must differ");
  if (!family.contains(source)) throw UnknownDomain("source domain " + std::to_string(source) + " not in family");
  const auto start = std::chrono::steady_clock::now();
  const VariantToggles tg = toggles_for(variant);

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.train_scale_bias_stage2 = tg.train_scale_bias;
  tc.graph_forward_stage2 = tg.graph_forward_training;

  const DomainData& src = family.at(source);
  Network net = source_model ? *source_model : train_source_model(family, source, cfg, seed);

  ResultRow row;
  row.source = source;
  row.target = target;
  row.variant = variant;
  row.seed = seed;

  std::optional<DomainGraph> graph;
  if (tg.use_graph) {
    graph.emplace(src.metadata.size(), cfg.kernel, cfg.min_weight);
    graph->add_node(source, src.metadata, NodeRole::Source);
    DomainDatasets aux;
    auto add_aux = [&](DomainId id) {
      const DomainData& d = family.at(id);
      graph->add_node(id, d.metadata, NodeRole::Auxiliary);
      Dataset unlabeled = d.samples;
      for (auto& s : unlabeled) s.y.reset();
      aux.emplace(id, std::move(unlabeled));
    };
    if (aux_subset) {
      for (DomainId id : *aux_subset) {
        if (id == source || id == target) throw ConfigError("auxiliary subset contains source or target");
        add_aux(id);
      }
    } else {
      for (const auto& [id, _] : family)
        if (id != source && id != target) add_aux(id);
    }
    if (tg.target_as_auxiliary) {
      if (!family.contains(target)) throw UnknownDomain("target domain not in family");
      add_aux(target);
    }
    row.n_aux = aux.size();
    stage2_graph(net, *graph, src.samples, aux, tc);
    row.state_hash = hash_graph(*graph, hash_network(net));
  } else {
    row.state_hash = hash_network(net);
  }
  if (artifacts) {
    artifacts->net = net;
    artifacts->graph = graph;
    artifacts->source = source;
  }

  if (!family.contains(target)) throw UnknownDomain("target domain " + std::to_string(target) + " not in family");
  const DomainData& tgt = family.at(target);

  // Target model: graph-regressed for AdaGraph variants, the source entry
  // otherwise (and the target's own trained entry for the upper bound).
  Network target_net = net;
  const DomainGraph* eval_graph = nullptr;
  std::optional<TargetModel> model;
  if (!tg.use_graph) {
    target_net.copy_domain(source, target);
  } else if (tg.target_as_auxiliary) {
    eval_graph = &*graph;
  } else {
    model.emplace(predict_from_metadata(*graph, net, tgt.metadata, target));
    target_net = model->net;
    eval_graph = &model->graph;
  }

  if (tg.refine) {
    RefinementEngine engine(std::move(target_net), target, cfg.make_buffer(), RefineMode::Full);
    const auto rows = run_stream(engine, shuffled(tgt.samples, derive_seed(seed, 0x53545245u)));
    row.accuracy = rows.empty() ? 0.0 : rows.back().cum_acc;
  } else {
    const Matrix probs = predict_proba(target_net, gather_features(tgt.samples),
                                       {Mode::Eval, target, eval_graph, nullptr});
    row.accuracy = accuracy(probs, tgt.samples);
  }
  if (cfg.record_wall_time)
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

struct PdaPair {
  DomainId source = 0;
  DomainId target = 0;
};

/// Ordered (source, target) pairs whose rotations differ by at least
/// `min_angle_deg`, optionally restricted to one source.
inline std::vector<PdaPair> pda_pairs(const DomainFamily& family, double min_angle_deg,
                                      std::optional<DomainId> fixed_source = std::nullopt) {
  std::vector<PdaPair> out;
  for (const auto& [s, sd] : family) {
    if (fixed_source && s != *fixed_source) continue;
    for (const auto& [t, td] : family)
      if (s != t && angular_distance(sd.angle_deg, td.angle_deg) >= min_angle_deg - 1e-9) out.push_back({s, t});
  }
  return out;
}

/// Runs every (seed, pair, variant) combination, training each source model
/// once per seed. Rows are ordered seed-major, then pair, then variant.
inline std::vector<ResultRow> run_pda_grid(const DomainFamily& family, const std::vector<VariantId>& variants,
                                           const std::vector<PdaPair>& pairs,
                                           const std::vector<std::uint64_t>& seeds, const RunConfig& cfg) {
  std::vector<ResultRow> rows;
  for (std::uint64_t seed : seeds) {
    std::map<DomainId, Network> source_models;
    for (const PdaPair& p : pairs) {
      auto it = source_models.find(p.source);
      if (it == source_models.end())
        it = source_models.emplace(p.source, train_source_model(family, p.source, cfg, seed)).first;
      for (VariantId v : variants)
        rows.push_back(run_pda(family, v, p.source, p.target, cfg, seed, std::nullopt, nullptr, &it->second));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Continuous (online) adaptation
// ---------------------------------------------------------------------------

enum class ContinuousVariant { Baseline, RefineStats, RefineFull };

inline const char* to_string(ContinuousVariant v) {
  switch (v) {
    case ContinuousVariant::Baseline: return "baseline";
    case ContinuousVariant::RefineStats: return "refine_stats";
    case ContinuousVariant::RefineFull: return "refine_full";
  }
  return "?";
}

inline ContinuousVariant continuous_variant_from_string(const std::string& s) {
  for (auto v : {ContinuousVariant::Baseline, ContinuousVariant::RefineStats, ContinuousVariant::RefineFull})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown continuous variant '" + s + "'");
}

inline RefineMode refine_mode_for(ContinuousVariant v) {
  switch (v) {
    case ContinuousVariant::Baseline: return RefineMode::None;
    case ContinuousVariant::RefineStats: return RefineMode::StatsOnly;
    case ContinuousVariant::RefineFull: return RefineMode::Full;
  }
  return RefineMode::None;
}

struct DriftSpec {
  std::size_t length = 2000;
  double start_deg = 0.0;
  double end_deg = 60.0;
};

/// A stream whose rotation grows linearly from start to end; sample t is
/// drawn at its own angle, so the stream is ordered by the drift parameter.
inline Dataset make_drift_stream(const DomainFamilySpec& spec, const DriftSpec& drift, DomainId stream_id,
                                 std::uint64_t seed) {
  Dataset out;
  out.reserve(drift.length);
  std::mt19937_64 rng(derive_seed(seed, 0x44524946u));
  for (std::size_t t = 0; t < drift.length; ++t) {
    const double frac = drift.length > 1 ? static_cast<double>(t) / static_cast<double>(drift.length - 1) : 0.0;
    const double angle = drift.start_deg + (drift.end_deg - drift.start_deg) * frac;
    Sample s = draw_base_point(spec, rng);
    s.x = transform_point(s.x, angle, 0.0);
    s.domain = stream_id;
    out.push_back(std::move(s));
  }
  return out;
}

struct ContinuousResult {
  ResultRow row;
  std::vector<StreamRow> stream;
};

/// Trains a source model (stage 1 only) on the domain at the drift start
/// and evaluates it prequentially on `stream`, adapting a copy of the
/// source entry according to `variant`.
inline ContinuousResult run_continuous(const DomainFamilySpec& spec, const DriftSpec& drift, const Dataset& stream,
                                       ContinuousVariant variant, const RunConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  constexpr DomainId kSource = 0;
  constexpr DomainId kTarget = 1;
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  DomainFamilySpec seeded = spec;
  seeded.seed = derive_seed(spec.seed, seed);
  const DomainData src = generate_domain(seeded, kSource, drift.start_deg, 0.0, spec.samples_per_domain);
  NetworkShape shape = cfg.shape;
  shape.input_dim = src.samples.front().x.size();
  shape.num_classes = base_num_classes(spec.base);
  Network net(shape, kSource, derive_seed(seed, 0x4e4554u));
  stage1_source(net, src.samples, kSource, tc);
  ContinuousResult out;
  out.row.source = kSource;
  out.row.target = kTarget;
  out.row.seed = seed;
  out.row.state_hash = hash_network(net);
  net.copy_domain(kSource, kTarget);
  RefinementEngine engine(std::move(net), kTarget, cfg.make_buffer(), refine_mode_for(variant));
  out.stream = run_stream(engine, stream);
  out.row.accuracy = out.stream.empty() ? 0.0 : out.stream.back().cum_acc;
  if (cfg.record_wall_time)
    out.row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Auxiliary-count sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::size_t n_aux = 0;
  std::size_t repeat = 0;
  ResultRow result;
};

/// For each count, `repeats` AdaGraph runs on randomly drawn auxiliary
/// subsets of that size.
inline std::vector<SweepRow> sweep_auxiliary_count(const DomainFamily& family, DomainId source, DomainId target,
                                                   const std::vector<std::size_t>& counts, std::size_t repeats,
                                                   const RunConfig& cfg, std::uint64_t seed,
                                                   VariantId variant = VariantId::AdaGraphFull) {
  if (repeats == 0) throw ConfigError("repeats must be at least 1");
  std::vector<DomainId> candidates;
  for (const auto& [id, _] : family)
    if (id != source && id != target) candidates.push_back(id);
  std::vector<SweepRow> out;
  for (std::size_t count : counts) {
    if (count < 1 || count > candidates.size())
      throw ConfigError("auxiliary count " + std::to_string(count) + " outside [1, " +
                        std::to_string(candidates.size()) + "]");
    for (std::size_t r = 0; r < repeats; ++r) {
      std::vector<DomainId> pool = candidates;
      std::mt19937_64 rng(derive_seed(seed, count, r));
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(count);
      std::sort(pool.begin(), pool.end());
      const std::uint64_t run_seed = derive_seed(seed, 0x5357u, r);
      out.push_back({count, r, run_pda(family, variant, source, target, cfg, run_seed, pool)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "source,target,variant,seed,accuracy,wall_time_s\n";
  const auto old = os.precision(17);
  for (const auto& r : rows)
    os << r.source << ',' << r.target << ',' << to_string(r.variant) << ',' << r.seed << ',' << r.accuracy
       << ',' << r.wall_time_s << '\n';
  os.precision(old);
}

inline void write_stream_csv(std::ostream& os, const std::vector<StreamRow>& rows) {
  os << "idx,pred,label,correct,cum_acc\n";
  const auto old = os.precision(17);
  for (const auto& r : rows)
    os << r.idx << ',' << r.pred << ',' << r.label << ',' << (r.correct ? 1 : 0) << ',' << r.cum_acc << '\n';
  os.precision(old);
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "n_aux,repeat,source,target,variant,seed,accuracy,wall_time_s\n";
  const auto old = os.precision(17);
  for (const auto& s : rows) {
    const auto& r = s.result;
    os << s.n_aux << ',' << s.repeat << ',' << r.source << ',' << r.target << ',' << to_string(r.variant) << ','
       << r.seed << ',' << r.accuracy << ',' << r.wall_time_s << '\n';
  }
  os.precision(old);
}

}  // namespace adagraph
