#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adagraph/adagraph.hpp"

using namespace adagraph;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout.
Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(ADAGRAPH_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adagraph_cli_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::vector<double> split_doubles(const std::string& line) {
  std::vector<double> out;
  std::istringstream is(line);
  for (std::string cell; std::getline(is, cell, ',');) out.push_back(std::stod(cell));
  return out;
}

const char* kSmallRun =
    "--set n_domains=6 --set samples_per_domain=64 --set epochs_stage1=2 --set epochs_stage2=1 "
    "--set hidden=[8,8] --no-timing";

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c = resolve_config(nullptr, json::object());
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
  EXPECT_DOUBLE_EQ(c.run.kernel.sigma, 0.1);
  EXPECT_EQ(c.run.buffer_capacity, 16u);
  EXPECT_DOUBLE_EQ(c.run.alpha, 0.1);
  EXPECT_DOUBLE_EQ(c.run.refine_lr, 1e-3);
  EXPECT_EQ(c.family.n_domains, 18u);
  EXPECT_EQ(c.source, std::optional<DomainId>(0));
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(resolve_config(nullptr, json{{"sigma", -1.0}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"sigma", 0.0}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"alpha", 1.5}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"buffer_capacity", 1}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"batch_size", 1}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"variants", json::array()}}), ConfigError);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    resolve_config(nullptr, json{{"sigmaa", 0.2}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sigmaa"), std::string::npos);
  }
}

TEST(Config, TypeMismatch) {
  EXPECT_THROW(resolve_config(nullptr, json{{"epochs_stage1", "ten"}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"record_wall_time", 3}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"variants", {"adagraph_full", "mystery"}}}), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json{{"seeds", {-1}}}), ConfigError);
}

TEST(Config, Precedence) {
  const json file{{"epochs_stage1", 5}, {"sigma", 0.2}};
  const ExperimentConfig a = resolve_config(&file, json::object());
  EXPECT_EQ(a.run.train.epochs_stage1, 5);
  EXPECT_DOUBLE_EQ(a.run.kernel.sigma, 0.2);
  const ExperimentConfig b = resolve_config(&file, json{{"epochs_stage1", 7}});
  EXPECT_EQ(b.run.train.epochs_stage1, 7);
  EXPECT_DOUBLE_EQ(b.run.kernel.sigma, 0.2);
}

TEST(Config, EnvironmentSeed) {
  EXPECT_EQ(resolve_config(nullptr, json::object(), "42").seeds, std::vector<std::uint64_t>{42});
  const json file{{"seeds", {1, 2}}};
  EXPECT_EQ(resolve_config(&file, json::object(), "42").seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(resolve_config(nullptr, json{{"seeds", {3}}}, "42").seeds, std::vector<std::uint64_t>{3});
  EXPECT_THROW(resolve_config(nullptr, json::object(), "x1"), ConfigError);
  EXPECT_THROW(resolve_config(nullptr, json::object(), "-4"), ConfigError);
}

TEST(Config, SeedLists) {
  EXPECT_EQ(parse_seed_list("7"), std::vector<std::uint64_t>{7});
  EXPECT_EQ(parse_seed_list("0..4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_seed_list("1,3"), (std::vector<std::uint64_t>{1, 3}));
  EXPECT_EQ(parse_seed_list("0..2,9"), (std::vector<std::uint64_t>{0, 1, 2, 9}));
  EXPECT_THROW(parse_seed_list("4..1"), ConfigError);
  EXPECT_THROW(parse_seed_list("a"), ConfigError);
  EXPECT_THROW(parse_seed_list(""), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig c = resolve_config(nullptr, json{{"sigma", 0.05}, {"seeds", {4, 5}}, {"hidden", {7}}});
  const json j = config_to_json(c);
  const ExperimentConfig d = resolve_config(&j, json::object());
  EXPECT_EQ(config_to_json(d), j);
}

TEST(Serialization, NetworkRoundTripIsBitwise) {
  Network net(NetworkShape{2, {5, 3}, 2}, 0, 11);
  net.copy_domain(0, 4);
  net.gbn()[0].entry(4).mu[1] = 0.1 + 0.2;
  net.gbn()[1].entry(4).var[0] = 1.0 / 3.0;
  const Network back = network_from_json(json::parse(network_to_json(net).dump()));
  EXPECT_EQ(back.dense(), net.dense());
  for (DomainId id : {0, 4}) EXPECT_EQ(back.domain_params(id), net.domain_params(id));
  EXPECT_EQ(hash_network(back), hash_network(net));
}

TEST(Serialization, GraphRoundTrip) {
  DomainGraph g(2, {0.3}, 1e-4);
  Network net(NetworkShape{2, {3}, 2}, 0, 1);
  g.add_node(0, {{0.1, 0.2}}, NodeRole::Source);
  g.add_node(3, {{1.0 / 7.0, 0.5}}, NodeRole::Auxiliary);
  g.add_virtual_node(9, {{0.4, 0.4}});
  g.assign_params(0, net.domain_params(0));
  const DomainGraph back = graph_from_json(json::parse(graph_to_json(g).dump()));
  EXPECT_EQ(hash_graph(back, 0), hash_graph(g, 0));
  EXPECT_DOUBLE_EQ(back.kernel().sigma, 0.3);
  EXPECT_DOUBLE_EQ(back.min_weight(), 1e-4);
  EXPECT_EQ(back.known_ids(), g.known_ids());
  EXPECT_FALSE(back.node(3).params.has_value());
}

TEST(Serialization, RejectsMalformedCheckpoint) {
  EXPECT_THROW(checkpoint_from_json(json{{"format", "something-else"}}), FormatError);
  EXPECT_THROW(checkpoint_from_json(json::object()), FormatError);
  EXPECT_THROW(network_from_json(json{{"dense", 3}}), FormatError);
}

TEST(Binary, Selftest) {
  const Outcome o = run_cli("selftest");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("PASS"), std::string::npos);
}

TEST(Binary, PdaWritesRunDirectory) {
  const fs::path dir = scratch_dir("pda");
  const Outcome o = run_cli(std::string("pda ") + kSmallRun +
                            " --variant baseline --variant adagraph_full --seed 0..4 -o " + dir.string());
  ASSERT_EQ(o.code, 0);
  for (const char* f : {"resolved_config.json", "results.csv", "checkpoint.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "results.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = lines_of(ss.str());
  // Six domains 60 degrees apart, source 0: five targets.
  ASSERT_EQ(rows.size(), 1u + 5u * 2u * 5u);
  EXPECT_EQ(rows[0], "source,target,variant,seed,accuracy,wall_time_s");
  const json resolved = read_json_file((dir / "resolved_config.json").string());
  EXPECT_EQ(resolved.at("seeds"), json({0, 1, 2, 3, 4}));

  const Outcome p = run_cli("predict --checkpoint " + (dir / "checkpoint.json").string() +
                            " --metadata 0.5 --x 0.1,0.2 --x 1,-0.5 --x -2,0");
  ASSERT_EQ(p.code, 0);
  const auto plines = lines_of(p.out);
  ASSERT_EQ(plines.size(), 4u);
  EXPECT_EQ(plines[0], "class_0,class_1");
  for (std::size_t i = 1; i < plines.size(); ++i) {
    double s = 0.0;
    for (double v : split_doubles(plines[i])) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }

  const Outcome q = run_cli("predict --checkpoint " + (dir / "checkpoint.json").string() + " --x 0.1,0.2");
  ASSERT_EQ(q.code, 0);
  EXPECT_EQ(lines_of(q.out).size(), 2u);
  fs::remove_all(dir);
}

TEST(Binary, NoTimingIsReproducible) {
  const fs::path a = scratch_dir("rep_a"), b = scratch_dir("rep_b");
  const std::string common = std::string("pda ") + kSmallRun + " --variant adagraph_bn --target 3 -o ";
  ASSERT_EQ(run_cli(common + a.string()).code, 0);
  ASSERT_EQ(run_cli(common + b.string()).code, 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch_dir("codes");
  EXPECT_EQ(run_cli("pda --set sigma=-1 -o " + dir.string()).code, 2);
  EXPECT_EQ(run_cli("pda --set not_a_key=1 -o " + dir.string()).code, 2);
  EXPECT_EQ(run_cli("pda --no-such-flag").code, 2);
  EXPECT_EQ(run_cli("pda -c " + (dir / "missing.json").string() + " -o " + dir.string()).code, 2);
  EXPECT_EQ(run_cli("predict --checkpoint " + (dir / "missing.json").string() + " --x 0,0").code, 1);
  fs::remove_all(dir);
}
