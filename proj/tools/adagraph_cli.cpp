// adagraph: run predictive and continuous domain-adaptation experiments on
// synthetic domain families, and query saved models.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adagraph/adagraph.hpp"

namespace fs = std::filesystem;
using adagraph::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> seeds;
  std::string out;
  bool no_timing = false;
};

void add_run_options(CLI::App* sub, RunOptions& o) {
  sub->add_option("-c,--config", o.config_path, "JSON config file");
  sub->add_option("--set", o.sets, "Override a config key: key=value (value parsed as JSON)");
  sub->add_option("--seed", o.seeds, "Seeds: N, A..B or a comma list (repeatable)");
  sub->add_option("-o,--out", o.out, "Output directory");
  sub->add_flag("--no-timing", o.no_timing, "Write wall_time_s as 0 so results are bitwise reproducible");
}

json parse_set_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

// Builds the flag layer of the config from the common options; `extra`
// holds subcommand-specific keys.
adagraph::ExperimentConfig resolve(const RunOptions& o, json extra) {
  json flags = json::object();
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw adagraph::ConfigError("--set expects key=value, got '" + s + "'");
    flags[s.substr(0, eq)] = parse_set_value(s.substr(eq + 1));
  }
  for (auto& [k, v] : extra.items()) flags[k] = v;
  if (!o.seeds.empty()) {
    std::vector<std::uint64_t> seeds;
    for (const std::string& s : o.seeds)
      for (std::uint64_t v : adagraph::parse_seed_list(s)) seeds.push_back(v);
    flags["seeds"] = seeds;
  }
  if (!o.out.empty()) flags["output"] = o.out;
  if (o.no_timing) flags["record_wall_time"] = false;
  std::optional<json> file;
  if (!o.config_path.empty()) {
    try {
      file = adagraph::read_json_file(o.config_path);
    } catch (const adagraph::FormatError& e) {
      throw adagraph::ConfigError(e.what());
    }
  }
  return adagraph::resolve_config(file ? &*file : nullptr, flags, std::getenv("ADAGRAPH_SEED"));
}

fs::path prepare_output(const adagraph::ExperimentConfig& cfg) {
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  adagraph::write_json_file((dir / "resolved_config.json").string(), adagraph::config_to_json(cfg));
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw adagraph::FormatError("cannot write '" + p.string() + "'");
  return out;
}

// Full AdaGraph model for one (source, seed) plus a domain classifier over
// its known domains.
adagraph::Checkpoint build_checkpoint(const adagraph::DomainFamily& family, adagraph::DomainId source,
                                      adagraph::DomainId target, const adagraph::ExperimentConfig& cfg,
                                      std::uint64_t seed) {
  adagraph::PdaArtifacts art;
  adagraph::run_pda(family, adagraph::VariantId::AdaGraphFull, source, target, cfg.run, seed, std::nullopt, &art);
  adagraph::DomainDatasets known;
  for (adagraph::DomainId id : art.graph->known_ids()) known.emplace(id, family.at(id).samples);
  adagraph::TrainConfig tc = cfg.run.train;
  tc.seed = seed;
  adagraph::Checkpoint ck{*art.net, *art.graph, adagraph::train_metadata_classifier(known, tc, cfg.run.shape)};
  return ck;
}

void write_checkpoint(const fs::path& dir, const adagraph::Checkpoint& ck) {
  adagraph::write_json_file((dir / "checkpoint.json").string(), adagraph::checkpoint_to_json(ck));
}

void summarize(const std::vector<adagraph::ResultRow>& rows) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& a = acc[adagraph::to_string(r.variant)];
    a.first += r.accuracy;
    ++a.second;
  }
  for (const auto& [name, a] : acc)
    std::cout << name << ": mean accuracy " << a.first / static_cast<double>(a.second) << " over " << a.second
              << " runs\n";
}

int cmd_pda(const RunOptions& o, const std::vector<std::string>& variants, const std::optional<int>& source,
            bool all_sources, const std::optional<int>& target, const std::optional<double>& min_angle) {
  json extra = json::object();
  if (!variants.empty()) extra["variants"] = variants;
  if (source) extra["source"] = *source;
  if (all_sources) extra["source"] = nullptr;
  if (target) extra["target"] = *target;
  if (min_angle) extra["min_angle_deg"] = *min_angle;
  const auto cfg = resolve(o, extra);
  const auto family = adagraph::generate_family(cfg.family, cfg.run.train.batch_size);
  std::vector<adagraph::PdaPair> pairs;
  if (cfg.target) {
    if (!cfg.source) throw adagraph::ConfigError("target requires a source");
    pairs.push_back({*cfg.source, *cfg.target});
  } else {
    pairs = adagraph::pda_pairs(family, cfg.min_angle_deg, cfg.source);
  }
  if (pairs.empty()) throw adagraph::ConfigError("no (source, target) pairs satisfy the filters");
  const fs::path dir = prepare_output(cfg);
  const auto rows = adagraph::run_pda_grid(family, cfg.variants, pairs, cfg.seeds, cfg.run);
  {
    auto out = open_out(dir / "results.csv");
    adagraph::write_results_csv(out, rows);
  }
  write_checkpoint(dir, build_checkpoint(family, pairs.front().source, pairs.front().target, cfg, cfg.seeds.front()));
  summarize(rows);
  std::cout << "wrote " << rows.size() << " rows to " << (dir / "results.csv").string() << '\n';
  return kExitOk;
}

int cmd_continuous(const RunOptions& o, const std::vector<std::string>& variants) {
  json extra = json::object();
  if (!variants.empty()) extra["continuous_variants"] = variants;
  const auto cfg = resolve(o, extra);
  const fs::path dir = prepare_output(cfg);
  std::vector<adagraph::ResultRow> rows;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::uint64_t seed : cfg.seeds) {
    const auto stream = adagraph::make_drift_stream(cfg.family, cfg.drift, 1, seed);
    for (auto v : cfg.continuous_variants) {
      const auto res = adagraph::run_continuous(cfg.family, cfg.drift, stream, v, cfg.run, seed);
      rows.push_back(res.row);
      auto out = open_out(dir / ("stream_" + std::string(adagraph::to_string(v)) + "_seed" + std::to_string(seed) +
                                 ".csv"));
      adagraph::write_stream_csv(out, res.stream);
      auto& a = acc[adagraph::to_string(v)];
      a.first += res.row.accuracy;
      ++a.second;
    }
  }
  {
    auto out = open_out(dir / "results.csv");
    out << "source,target,variant,seed,accuracy,wall_time_s\n";
    out.precision(17);
    std::size_t i = 0;
    for (std::uint64_t seed : cfg.seeds)
      for (auto v : cfg.continuous_variants) {
        const auto& r = rows[i++];
        out << r.source << ',' << r.target << ',' << adagraph::to_string(v) << ',' << seed << ',' << r.accuracy << ','
            << r.wall_time_s << '\n';
      }
  }
  // The checkpoint holds the source model the streams start from.
  {
    adagraph::DomainFamilySpec seeded = cfg.family;
    seeded.seed = adagraph::derive_seed(cfg.family.seed, cfg.seeds.front());
    const auto src = adagraph::generate_domain(seeded, 0, cfg.drift.start_deg, 0.0, cfg.family.samples_per_domain);
    adagraph::NetworkShape shape = cfg.run.shape;
    shape.input_dim = src.samples.front().x.size();
    shape.num_classes = adagraph::base_num_classes(cfg.family.base);
    adagraph::Network net(shape, 0, adagraph::derive_seed(cfg.seeds.front(), 0x4e4554u));
    adagraph::TrainConfig tc = cfg.run.train;
    tc.seed = cfg.seeds.front();
    adagraph::stage1_source(net, src.samples, 0, tc);
    adagraph::DomainGraph g(src.metadata.size(), cfg.run.kernel, cfg.run.min_weight);
    g.add_node(0, src.metadata, adagraph::NodeRole::Source);
    g.assign_params(0, net.domain_params(0));
    write_checkpoint(dir, {net, g, std::nullopt});
  }
  for (const auto& [name, a] : acc)
    std::cout << name << ": mean prequential accuracy " << a.first / static_cast<double>(a.second) << '\n';
  return kExitOk;
}

int cmd_sweep(const RunOptions& o, const std::optional<int>& source, const std::optional<int>& target,
              const std::string& counts, const std::optional<std::size_t>& repeats) {
  json extra = json::object();
  if (source) extra["source"] = *source;
  if (target) extra["target"] = *target;
  if (!counts.empty()) {
    std::vector<std::size_t> c;
    for (std::uint64_t v : adagraph::parse_seed_list(counts)) c.push_back(v);
    extra["sweep_counts"] = c;
  }
  if (repeats) extra["sweep_repeats"] = *repeats;
  const auto cfg = resolve(o, extra);
  if (!cfg.source || !cfg.target) throw adagraph::ConfigError("sweep needs both source and target");
  const auto family = adagraph::generate_family(cfg.family, cfg.run.train.batch_size);
  const fs::path dir = prepare_output(cfg);
  std::vector<adagraph::SweepRow> sweep;
  for (std::uint64_t seed : cfg.seeds)
    for (auto& row : adagraph::sweep_auxiliary_count(family, *cfg.source, *cfg.target, cfg.sweep_counts,
                                                     cfg.sweep_repeats, cfg.run, seed))
      sweep.push_back(std::move(row));
  {
    auto out = open_out(dir / "sweep.csv");
    adagraph::write_sweep_csv(out, sweep);
  }
  {
    std::vector<adagraph::ResultRow> rows;
    for (const auto& s : sweep) rows.push_back(s.result);
    auto out = open_out(dir / "results.csv");
    adagraph::write_results_csv(out, rows);
  }
  write_checkpoint(dir, build_checkpoint(family, *cfg.source, *cfg.target, cfg, cfg.seeds.front()));
  std::map<std::size_t, std::vector<double>> by_count;
  for (const auto& s : sweep) by_count[s.n_aux].push_back(s.result.accuracy);
  for (const auto& [n, accs] : by_count) {
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    std::cout << "n_aux=" << n << ": mean " << mean << " std " << std::sqrt(var / static_cast<double>(accs.size()))
              << '\n';
  }
  return kExitOk;
}

adagraph::Vector parse_floats(const std::string& text) {
  adagraph::Vector v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(item, &pos);
    } catch (const std::exception&) {
      throw adagraph::ConfigError("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t\r", pos) != std::string::npos)
      throw adagraph::ConfigError("not a number: '" + item + "'");
    v.push_back(d);
  }
  return v;
}

struct Table {
  std::vector<adagraph::Vector> rows;
  std::vector<int> labels;  // -1 when absent
};

// CSV of feature columns, optionally ending in a `label` column. A header
// line is recognized by a non-numeric first field.
Table read_samples(std::istream& in, std::size_t dim) {
  Table t;
  std::string line;
  bool first = true;
  bool has_label = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (first) {
      first = false;
      const std::string head = line.substr(0, line.find(','));
      const bool numeric = head.find_first_of("0123456789") != std::string::npos &&
                           head.find_first_not_of("0123456789+-.eE \t") == std::string::npos;
      if (!numeric) {
        has_label = line.size() >= 5 && line.substr(line.size() - 5) == "label";
        continue;
      }
    }
    adagraph::Vector v = parse_floats(line);
    int label = -1;
    if (has_label || v.size() == dim + 1) {
      if (v.size() != dim + 1) throw adagraph::DimensionError("expected " + std::to_string(dim) + " features and a label");
      label = static_cast<int>(v.back());
      v.pop_back();
    }
    if (v.size() != dim)
      throw adagraph::DimensionError("expected " + std::to_string(dim) + " features, got " + std::to_string(v.size()));
    t.rows.push_back(std::move(v));
    t.labels.push_back(label);
  }
  return t;
}

Table load_input(const std::string& path, std::size_t dim) {
  if (path.empty() || path == "-") return read_samples(std::cin, dim);
  std::ifstream in(path);
  if (!in) throw adagraph::FormatError("cannot open '" + path + "'");
  return read_samples(in, dim);
}

adagraph::DomainId fresh_id(const adagraph::DomainGraph& g) {
  adagraph::DomainId id = 0;
  for (const auto& [k, _] : g.nodes()) id = std::max(id, k + 1);
  return id;
}

int cmd_predict(const std::string& checkpoint, const std::string& metadata, const std::string& samples,
                const std::vector<std::string>& xs, const std::string& out_path) {
  const auto ck = adagraph::checkpoint_from_json(adagraph::read_json_file(checkpoint));
  Table t;
  if (!xs.empty()) {
    for (const auto& s : xs) {
      t.rows.push_back(parse_floats(s));
      if (t.rows.back().size() != ck.net.input_dim())
        throw adagraph::DimensionError("--x needs " + std::to_string(ck.net.input_dim()) + " values");
    }
  } else {
    t = load_input(samples, ck.net.input_dim());
  }
  adagraph::Matrix probs(t.rows.size(), ck.net.num_classes());
  if (!metadata.empty()) {
    const auto model =
        adagraph::predict_from_metadata(ck.graph, ck.net, adagraph::Metadata{parse_floats(metadata)}, fresh_id(ck.graph));
    if (!t.rows.empty()) probs = model.predict_proba(adagraph::Matrix::from_rows(t.rows));
  } else {
    if (!ck.classifier)
      throw adagraph::ConfigError("checkpoint has no metadata classifier; pass --metadata");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto p = adagraph::predict_from_image(ck.graph, ck.net, *ck.classifier, t.rows[i]);
      for (std::size_t k = 0; k < p.size(); ++k) probs(i, k) = p[k];
    }
  }
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw adagraph::FormatError("cannot write '" + out_path + "'");
  }
  std::ostream& out = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
  for (std::size_t k = 0; k < probs.cols(); ++k) out << (k ? "," : "") << "class_" << k;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    for (std::size_t k = 0; k < probs.cols(); ++k) out << (k ? "," : "") << probs(r, k);
    out << '\n';
  }
  return kExitOk;
}

int cmd_stream(const std::string& checkpoint, const std::string& input, const std::string& metadata,
               const std::string& mode, std::size_t capacity, double alpha, double refine_lr,
               const std::string& out_path) {
  adagraph::RefineMode rm;
  if (mode == "none")
    rm = adagraph::RefineMode::None;
  else if (mode == "stats")
    rm = adagraph::RefineMode::StatsOnly;
  else if (mode == "full")
    rm = adagraph::RefineMode::Full;
  else
    throw adagraph::ConfigError("--mode must be none, stats or full");
  auto ck = adagraph::checkpoint_from_json(adagraph::read_json_file(checkpoint));
  const Table t = load_input(input, ck.net.input_dim());
  const adagraph::DomainId target = fresh_id(ck.graph);
  adagraph::Network net = ck.net;
  if (!metadata.empty()) {
    net = adagraph::predict_from_metadata(ck.graph, ck.net, adagraph::Metadata{parse_floats(metadata)}, target).net;
  } else {
    const auto source = ck.graph.source_id();
    if (!source) throw adagraph::FormatError("checkpoint graph has no source node");
    net.copy_domain(*source, target);
  }
  adagraph::RefinementBuffer buf;
  buf.capacity = capacity;
  buf.alpha = alpha;
  buf.refine_lr = refine_lr;
  adagraph::RefinementEngine engine(std::move(net), target, buf, rm);
  adagraph::Dataset data;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    adagraph::Sample s{t.rows[i], std::nullopt, target};
    if (t.labels[i] >= 0) s.y = t.labels[i];
    data.push_back(std::move(s));
  }
  const auto rows = adagraph::run_stream(engine, data);
  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw adagraph::FormatError("cannot write '" + out_path + "'");
  }
  adagraph::write_stream_csv(file.is_open() ? static_cast<std::ostream&>(file) : std::cout, rows);
  return kExitOk;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& r : adagraph::run_selftest()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (worst " << r.worst << ", tolerance " << r.tolerance
              << ")\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based predictive and continuous domain adaptation experiments"};
  app.require_subcommand(1);

  RunOptions pda_o;
  std::vector<std::string> pda_variants;
  std::optional<int> pda_source, pda_target;
  std::optional<double> pda_min_angle;
  bool pda_all_sources = false;
  auto* pda = app.add_subcommand("pda", "Predictive domain adaptation over (source, target) pairs");
  add_run_options(pda, pda_o);
  pda->add_option("--variant", pda_variants, "Variant to run (repeatable)");
  pda->add_option("--source", pda_source, "Fixed source domain");
  pda->add_flag("--all-sources", pda_all_sources, "Use every domain as a source");
  pda->add_option("--target", pda_target, "Single target domain");
  pda->add_option("--min-angle", pda_min_angle, "Minimum source/target rotation difference in degrees");

  RunOptions cont_o;
  std::vector<std::string> cont_variants;
  auto* cont = app.add_subcommand("continuous", "Prequential evaluation on a drifting stream");
  add_run_options(cont, cont_o);
  cont->add_option("--variant", cont_variants, "baseline, refine_stats or refine_full (repeatable)");

  RunOptions sweep_o;
  std::optional<int> sweep_source, sweep_target;
  std::string sweep_counts;
  std::optional<std::size_t> sweep_repeats;
  auto* sweep = app.add_subcommand("sweep", "Accuracy against the number of auxiliary domains");
  add_run_options(sweep, sweep_o);
  sweep->add_option("--source", sweep_source, "Source domain");
  sweep->add_option("--target", sweep_target, "Target domain");
  sweep->add_option("--counts", sweep_counts, "Auxiliary counts, e.g. 1,2,4 or 1..16");
  sweep->add_option("--repeats", sweep_repeats, "Random subsets per count");

  std::string pred_ck, pred_meta, pred_samples, pred_out;
  std::vector<std::string> pred_x;
  auto* pred = app.add_subcommand("predict", "Class probabilities from a saved checkpoint");
  pred->add_option("--checkpoint", pred_ck, "checkpoint.json from a run")->required();
  pred->add_option("--metadata", pred_meta, "Target metadata, comma separated; omit to infer it per sample");
  pred->add_option("--samples", pred_samples, "CSV of samples ('-' for stdin)");
  pred->add_option("--x", pred_x, "One sample, comma separated (repeatable)");
  pred->add_option("-o,--out", pred_out, "Output CSV (default stdout)");

  std::string st_ck, st_in, st_meta, st_mode = "full", st_out;
  std::size_t st_capacity = 16;
  double st_alpha = 0.1, st_lr = 1e-3;
  auto* st = app.add_subcommand("stream", "Prequential refinement over a CSV stream");
  st->add_option("--checkpoint", st_ck, "checkpoint.json from a run")->required();
  st->add_option("--input", st_in, "CSV of features and label ('-' for stdin)");
  st->add_option("--metadata", st_meta, "Target metadata; omit to start from the source domain");
  st->add_option("--mode", st_mode, "none, stats or full")->capture_default_str();
  st->add_option("--buffer-capacity", st_capacity, "Refinement buffer size")->capture_default_str();
  st->add_option("--alpha", st_alpha, "Statistics momentum")->capture_default_str();
  st->add_option("--refine-lr", st_lr, "Scale/bias step size")->capture_default_str();
  st->add_option("-o,--out", st_out, "Output CSV (default stdout)");

  app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*pda) return cmd_pda(pda_o, pda_variants, pda_source, pda_all_sources, pda_target, pda_min_angle);
    if (*cont) return cmd_continuous(cont_o, cont_variants);
    if (*sweep) return cmd_sweep(sweep_o, sweep_source, sweep_target, sweep_counts, sweep_repeats);
    if (*pred) return cmd_predict(pred_ck, pred_meta, pred_samples, pred_x, pred_out);
    if (*st) return cmd_stream(st_ck, st_in, st_meta, st_mode, st_capacity, st_alpha, st_lr, st_out);
    return cmd_selftest();
  } catch (const adagraph::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
