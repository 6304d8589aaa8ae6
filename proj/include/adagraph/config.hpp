#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adagraph/benchmark.hpp"
#include "adagraph/errors.hpp"

namespace adagraph {

/// Everything a CLI run needs. Serialized as a flat JSON object.
struct ExperimentConfig {
  RunConfig run;
  DomainFamilySpec family;
  std::vector<VariantId> variants = {VariantId::Baseline, VariantId::AdaGraphBN, VariantId::AdaGraphFull};
  std::vector<std::uint64_t> seeds = {0};
  std::string output = "runs/latest";
  std::optional<DomainId> source = 0;
  std::optional<DomainId> target;
  double min_angle_deg = 60.0;
  DriftSpec drift;
  std::vector<ContinuousVariant> continuous_variants = {ContinuousVariant::Baseline, ContinuousVariant::RefineStats,
                                                        ContinuousVariant::RefineFull};
  std::vector<std::size_t> sweep_counts = {1, 2, 4, 8, 16};
  std::size_t sweep_repeats = 5;

  void validate() const {
    run.train.validate();
    family.validate(run.train.batch_size);
    run.make_buffer().validate();
    if (!(run.kernel.sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (run.min_weight < 0.0 || run.min_weight >= 1.0) throw ConfigError("min_weight must lie in [0,1)");
    if (!(run.shape.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (run.shape.hidden.empty()) throw ConfigError("hidden must list at least one layer width");
    for (std::size_t h : run.shape.hidden)
      if (h == 0) throw ConfigError("hidden layer widths must be positive");
    if (variants.empty()) throw ConfigError("variants must not be empty");
    if (continuous_variants.empty()) throw ConfigError("continuous_variants must not be empty");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (output.empty()) throw ConfigError("output must not be empty");
    if (min_angle_deg < 0.0 || min_angle_deg > 180.0) throw ConfigError("min_angle_deg must lie in [0,180]");
    if (drift.length == 0) throw ConfigError("stream_length must be positive");
    if (sweep_repeats == 0) throw ConfigError("sweep_repeats must be at least 1");
    if (sweep_counts.empty()) throw ConfigError("sweep_counts must not be empty");
  }
};

namespace detail {

using json = nlohmann::json;

template <class T>
T config_get(const json& j, const std::string& key);

template <>
inline double config_get<double>(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

template <>
inline bool config_get<bool>(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return j.get<bool>();
}

template <>
inline std::string config_get<std::string>(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("'" + key + "' must be a string");
  return j.get<std::string>();
}

template <>
inline std::int64_t config_get<std::int64_t>(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t config_unsigned(const json& j, const std::string& key) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw ConfigError("'" + key + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

inline int config_int(const json& j, const std::string& key) {
  return static_cast<int>(config_get<std::int64_t>(j, key));
}

template <class F>
void config_each(const json& j, const std::string& key, F f) {
  if (!j.is_array()) throw ConfigError("'" + key + "' must be an array");
  for (const auto& e : j) f(e);
}

inline std::optional<DomainId> config_optional_id(const json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return config_int(j, key);
}

inline json optional_id_json(const std::optional<DomainId>& id) { return id ? json(*id) : json(nullptr); }

using Setter = std::function<void(ExperimentConfig&, const json&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = {
      {"epochs_stage1", [](ExperimentConfig& c, const json& j) { c.run.train.epochs_stage1 = config_int(j, "epochs_stage1"); }},
      {"epochs_stage2", [](ExperimentConfig& c, const json& j) { c.run.train.epochs_stage2 = config_int(j, "epochs_stage2"); }},
      {"lr_stage1", [](ExperimentConfig& c, const json& j) { c.run.train.lr_stage1 = config_get<double>(j, "lr_stage1"); }},
      {"lr_stage2", [](ExperimentConfig& c, const json& j) { c.run.train.lr_stage2 = config_get<double>(j, "lr_stage2"); }},
      {"batch_size", [](ExperimentConfig& c, const json& j) { c.run.train.batch_size = config_unsigned(j, "batch_size"); }},
      {"lambda", [](ExperimentConfig& c, const json& j) { c.run.train.lambda = config_get<double>(j, "lambda"); }},
      {"gbn_momentum",
       [](ExperimentConfig& c, const json& j) {
         c.run.train.gbn_momentum = config_get<double>(j, "gbn_momentum");
         c.run.shape.momentum = c.run.train.gbn_momentum;
       }},
      {"train_shared_stage2",
       [](ExperimentConfig& c, const json& j) { c.run.train.train_shared_stage2 = config_get<bool>(j, "train_shared_stage2"); }},
      {"hidden",
       [](ExperimentConfig& c, const json& j) {
         c.run.shape.hidden.clear();
         config_each(j, "hidden", [&](const json& e) { c.run.shape.hidden.push_back(config_unsigned(e, "hidden")); });
       }},
      {"epsilon", [](ExperimentConfig& c, const json& j) { c.run.shape.epsilon = config_get<double>(j, "epsilon"); }},
      {"sigma", [](ExperimentConfig& c, const json& j) { c.run.kernel.sigma = config_get<double>(j, "sigma"); }},
      {"min_weight", [](ExperimentConfig& c, const json& j) { c.run.min_weight = config_get<double>(j, "min_weight"); }},
      {"buffer_capacity",
       [](ExperimentConfig& c, const json& j) { c.run.buffer_capacity = config_unsigned(j, "buffer_capacity"); }},
      {"alpha", [](ExperimentConfig& c, const json& j) { c.run.alpha = config_get<double>(j, "alpha"); }},
      {"refine_lr", [](ExperimentConfig& c, const json& j) { c.run.refine_lr = config_get<double>(j, "refine_lr"); }},
      {"record_wall_time",
       [](ExperimentConfig& c, const json& j) { c.run.record_wall_time = config_get<bool>(j, "record_wall_time"); }},
      {"base_dataset",
       [](ExperimentConfig& c, const json& j) {
         c.family.base = base_dataset_from_string(config_get<std::string>(j, "base_dataset"));
       }},
      {"n_domains", [](ExperimentConfig& c, const json& j) { c.family.n_domains = config_unsigned(j, "n_domains"); }},
      {"samples_per_domain",
       [](ExperimentConfig& c, const json& j) { c.family.samples_per_domain = config_unsigned(j, "samples_per_domain"); }},
      {"noise_std", [](ExperimentConfig& c, const json& j) { c.family.noise_std = config_get<double>(j, "noise_std"); }},
      {"data_seed", [](ExperimentConfig& c, const json& j) { c.family.seed = config_unsigned(j, "data_seed"); }},
      {"translation_levels",
       [](ExperimentConfig& c, const json& j) { c.family.translation_levels = config_unsigned(j, "translation_levels"); }},
      {"max_translation",
       [](ExperimentConfig& c, const json& j) { c.family.max_translation = config_get<double>(j, "max_translation"); }},
      {"offset_x", [](ExperimentConfig& c, const json& j) { c.family.offset_x = config_get<double>(j, "offset_x"); }},
      {"offset_y", [](ExperimentConfig& c, const json& j) { c.family.offset_y = config_get<double>(j, "offset_y"); }},
      {"variants",
       [](ExperimentConfig& c, const json& j) {
         c.variants.clear();
         config_each(j, "variants",
                     [&](const json& e) { c.variants.push_back(variant_from_string(config_get<std::string>(e, "variants"))); });
       }},
      {"seeds",
       [](ExperimentConfig& c, const json& j) {
         c.seeds.clear();
         config_each(j, "seeds", [&](const json& e) { c.seeds.push_back(config_unsigned(e, "seeds")); });
       }},
      {"output", [](ExperimentConfig& c, const json& j) { c.output = config_get<std::string>(j, "output"); }},
      {"source", [](ExperimentConfig& c, const json& j) { c.source = config_optional_id(j, "source"); }},
      {"target", [](ExperimentConfig& c, const json& j) { c.target = config_optional_id(j, "target"); }},
      {"min_angle_deg", [](ExperimentConfig& c, const json& j) { c.min_angle_deg = config_get<double>(j, "min_angle_deg"); }},
      {"stream_length", [](ExperimentConfig& c, const json& j) { c.drift.length = config_unsigned(j, "stream_length"); }},
      {"drift_start_deg",
       [](ExperimentConfig& c, const json& j) { c.drift.start_deg = config_get<double>(j, "drift_start_deg"); }},
      {"drift_end_deg", [](ExperimentConfig& c, const json& j) { c.drift.end_deg = config_get<double>(j, "drift_end_deg"); }},
      {"continuous_variants",
       [](ExperimentConfig& c, const json& j) {
         c.continuous_variants.clear();
         config_each(j, "continuous_variants", [&](const json& e) {
           c.continuous_variants.push_back(continuous_variant_from_string(config_get<std::string>(e, "continuous_variants")));
         });
       }},
      {"sweep_counts",
       [](ExperimentConfig& c, const json& j) {
         c.sweep_counts.clear();
         config_each(j, "sweep_counts", [&](const json& e) { c.sweep_counts.push_back(config_unsigned(e, "sweep_counts")); });
       }},
      {"sweep_repeats", [](ExperimentConfig& c, const json& j) { c.sweep_repeats = config_unsigned(j, "sweep_repeats"); }},
  };
  return setters;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json variants = json::array();
  for (VariantId v : c.variants) variants.push_back(to_string(v));
  json cont = json::array();
  for (ContinuousVariant v : c.continuous_variants) cont.push_back(to_string(v));
  return {
      {"epochs_stage1", c.run.train.epochs_stage1},
      {"epochs_stage2", c.run.train.epochs_stage2},
      {"lr_stage1", c.run.train.lr_stage1},
      {"lr_stage2", c.run.train.lr_stage2},
      {"batch_size", c.run.train.batch_size},
      {"lambda", c.run.train.lambda},
      {"gbn_momentum", c.run.train.gbn_momentum},
      {"train_shared_stage2", c.run.train.train_shared_stage2},
      {"hidden", c.run.shape.hidden},
      {"epsilon", c.run.shape.epsilon},
      {"sigma", c.run.kernel.sigma},
      {"min_weight", c.run.min_weight},
      {"buffer_capacity", c.run.buffer_capacity},
      {"alpha", c.run.alpha},
      {"refine_lr", c.run.refine_lr},
      {"record_wall_time", c.run.record_wall_time},
      {"base_dataset", to_string(c.family.base)},
      {"n_domains", c.family.n_domains},
      {"samples_per_domain", c.family.samples_per_domain},
      {"noise_std", c.family.noise_std},
      {"data_seed", c.family.seed},
      {"translation_levels", c.family.translation_levels},
      {"max_translation", c.family.max_translation},
      {"offset_x", c.family.offset_x},
      {"offset_y", c.family.offset_y},
      {"variants", variants},
      {"seeds", c.seeds},
      {"output", c.output},
      {"source", detail::optional_id_json(c.source)},
      {"target", detail::optional_id_json(c.target)},
      {"min_angle_deg", c.min_angle_deg},
      {"stream_length", c.drift.length},
      {"drift_start_deg", c.drift.start_deg},
      {"drift_end_deg", c.drift.end_deg},
      {"continuous_variants", cont},
      {"sweep_counts", c.sweep_counts},
      {"sweep_repeats", c.sweep_repeats},
  };
}

/// Overwrites the fields named in `j`. Unknown keys and wrongly typed
/// values raise ConfigError naming the key.
inline void apply_config_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto& setters = detail::config_setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, value);
  }
}

/// Defaults, then the file document, then flag overrides. When neither the
/// file nor the flags give seeds, `env_seed` (ADAGRAPH_SEED) is used.
inline ExperimentConfig resolve_config(const nlohmann::json* file, const nlohmann::json& flags,
                                       const char* env_seed = nullptr) {
  ExperimentConfig c;
  bool seeds_given = false;
  if (file) {
    apply_config_json(c, *file);
    seeds_given = file->contains("seeds");
  }
  apply_config_json(c, flags);
  seeds_given = seeds_given || flags.contains("seeds");
  if (!seeds_given && env_seed && *env_seed) {
    try {
      std::size_t pos = 0;
      const std::string s(env_seed);
      const unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size() || s.front() == '-') throw std::invalid_argument(s);
      c.seeds = {v};
    } catch (const std::exception&) {
      throw ConfigError("ADAGRAPH_SEED must be a non-negative integer, got '" + std::string(env_seed) + "'");
    }
  }
  c.validate();
  return c;
}

/// Parses "7", "0..4" or "1,3,5" (and combinations such as "0..2,9").
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad seed '" + s + "' in '" + text + "'");
    return std::stoull(s);
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const std::size_t dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(number(item));
    } else {
      const std::uint64_t a = number(item.substr(0, dots));
      const std::uint64_t b = number(item.substr(dots + 2));
      if (b < a) throw ConfigError("empty seed range '" + item + "'");
      for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace adagraph
