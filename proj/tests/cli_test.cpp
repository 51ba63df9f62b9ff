#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "experiments.hpp"
#include "fast_configs.hpp"

using namespace sgdlb;
using namespace sgdlb::cli;
namespace fs = std::filesystem;

namespace {

const fs::path scratch_root = fs::temp_directory_path() / ("sgdlb_cli_test_" + std::to_string(::getpid()));

struct ScratchCleanup {
  ~ScratchCleanup() {
    std::error_code ec;
    fs::remove_all(scratch_root, ec);
  }
} scratch_cleanup;

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root / name;
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_tool(const std::string& args) {
  const char* tool = std::getenv("SGDLB_TOOL");
  if (!tool) return -1;
  const int status = std::system((std::string(tool) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST(Config, ParseAndSerializeRoundTrip) {
  std::istringstream in("# comment\n\nT = 100\n  sigma=0.5   # trailing\nschedule = constant:0.1\n");
  const Config c = Config::parse(in);
  EXPECT_EQ(c.integer("T"), 100);
  EXPECT_EQ(c.number("sigma"), 0.5);
  EXPECT_EQ(c.text("schedule"), "constant:0.1");
  std::istringstream again(c.serialize());
  EXPECT_EQ(Config::parse(again), c);
}

TEST(Config, ErrorsNameTheKey) {
  Config c;
  c.set("T", "abc");
  try {
    c.integer("T");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "T");
  }
  c.set("bogus", "1");
  try {
    c.require_only({"T"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "bogus");
  }
  std::istringstream bad("no equals sign here\n");
  EXPECT_THROW(Config::parse(bad), ConfigError);
  EXPECT_EQ(parse_number_list("k", "1, 2.5,3"), (std::vector<double>{1, 2.5, 3}));
  EXPECT_THROW(parse_number("k", "1.0x"), ConfigError);
}

TEST(Specs, Schedules) {
  EXPECT_EQ(ScheduleSpec::parse("constant:0.25").build(5, 0).step(3), 0.25);
  const auto poly = ScheduleSpec::parse("poly:1,1,0.5").build(5, 0);
  EXPECT_DOUBLE_EQ(poly.step(4), 1.0 / 3.0);
  EXPECT_EQ(ScheduleSpec::parse("list:0.1,0.2").build(3, 0).steps(2), (std::vector<double>{0.1, 0.2}));
  EXPECT_TRUE(ScheduleSpec::parse("adagrad:0.5").adaptive());
  const auto r1 = ScheduleSpec::parse("random:0,1").build(10, 7).steps(9);
  EXPECT_EQ(r1, ScheduleSpec::parse("random:0,1").build(10, 7).steps(9));
  for (double e : r1) EXPECT_TRUE(e >= 0.0 && e <= 1.0);
  EXPECT_THROW(ScheduleSpec::parse("constant"), ConfigError);
  EXPECT_THROW(ScheduleSpec::parse("warp:1"), ConfigError);
  EXPECT_THROW(ScheduleSpec::parse("constant:-1"), ConfigError);
  EXPECT_THROW(ScheduleSpec::parse("random:2,1"), ConfigError);
}

TEST(Specs, Aggregations) {
  EXPECT_FALSE(AggregationSpec::parse("none").build(4, 0).active());
  const auto w = std::get<FixedWeights>(AggregationSpec::parse("random").build(6, 1).kind()).weights;
  double total = 0.0;
  for (double x : w) total += x;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_THROW(AggregationSpec::parse("weights:0.5,0.5").build(3, 0), ConfigError);
  EXPECT_THROW(AggregationSpec::parse("uniform:1"), ConfigError);
  EXPECT_THROW(AggregationSpec::parse("median"), ConfigError);
}

TEST(Csv, QuotingAndReals) {
  ResultTable t;
  t.columns = {"a", "b"};
  t.add({"plain", "has,comma"});
  t.add({"say \"hi\"", "line\nbreak"});
  EXPECT_EQ(to_csv(t), "a,b\nplain,\"has,comma\"\n\"say \"\"hi\"\"\",\"line\nbreak\"\n");
  EXPECT_THROW(t.add({"short"}), std::logic_error);
  EXPECT_EQ(std::stod(format_real(0.1)), 0.1);
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
}

TEST(Summary, ConfigRoundTrip) {
  for (const auto& config : fixtures::fast_configs(scratch("roundtrip"))) {
    const auto result = run_experiment(config);
    const auto json = summary_json(result, 0.5);
    EXPECT_EQ(config_from_json(nlohmann::ordered_json::parse(json.dump())), config) << result.experiment;
    EXPECT_EQ(json["verdict"], result.passed() ? "pass" : "fail");
    EXPECT_EQ(json["experiment"], result.experiment);
  }
}

TEST(RunExperiment, EveryFastConfigPassesAndIsDeterministic) {
  const auto configs = fixtures::fast_configs(scratch("determinism"));
  std::set<std::string> covered;
  for (const auto& config : configs) {
    const auto a = run_experiment(config);
    const auto b = run_experiment(config);
    covered.insert(a.experiment);
    EXPECT_TRUE(a.passed()) << a.experiment;
    EXPECT_EQ(to_csv(a.table), to_csv(b.table)) << a.experiment;
    ASSERT_EQ(a.extra_files.size(), b.extra_files.size());
    for (std::size_t i = 0; i < a.extra_files.size(); ++i) EXPECT_EQ(a.extra_files[i], b.extra_files[i]);
    ASSERT_FALSE(a.table.columns.empty());
    EXPECT_EQ(a.table.columns.front(), "experiment");
    EXPECT_EQ(a.table.columns.back(), "verdict");
  }
  for (const auto& name : experiment_names()) EXPECT_TRUE(covered.count(name)) << name;
}

TEST(RunExperiment, ConfigErrors) {
  EXPECT_THROW(run_experiment(fixtures::make_config({{"experiment", "nope"}})), ConfigError);
  EXPECT_THROW(run_experiment(fixtures::make_config({{"experiment", "aggregation_step"}, {"T", "1"}})), ConfigError);
  EXPECT_THROW(run_experiment(fixtures::make_config({{"experiment", "aggregation_step"}, {"colour", "red"}})),
               ConfigError);
  EXPECT_THROW(run_experiment(fixtures::make_config({{"experiment", "gd_corollary"}, {"sigma", "1"}})), ConfigError);
  EXPECT_THROW(run_experiment(fixtures::make_config({{"experiment", "plot-data"}, {"input", "/nonexistent/x.csv"}})),
               ConfigError);
}

TEST(PlotData, Series) {
  const auto res = run_experiment(fixtures::make_config({{"experiment", "plot-data"}}));
  std::map<std::string, std::string> files(res.extra_files.begin(), res.extra_files.end());
  const auto s = split_lines(files.at("s.csv"));
  ASSERT_EQ(s.size(), 402u);
  EXPECT_EQ(s[0], "x,y");
  EXPECT_EQ(s[1], "-2,-0.5");
  EXPECT_EQ(s.back(), "2,0.5");
  for (const auto& line : split_lines(files.at("h1_plus.csv"))) {
    if (line == "x,y") continue;
    const double x = std::stod(line.substr(0, line.find(',')));
    const double y = std::stod(line.substr(line.find(',') + 1));
    if (std::abs(x) >= 0.5) EXPECT_DOUBLE_EQ(y, 1.0 / 16) << x;
  }
  EXPECT_EQ(split_lines(files.at("bound_vs_T.csv")).size(), 5u);

  const auto empty = run_experiment(fixtures::make_config({{"experiment", "plot-data"}, {"sweep_T", ""}}));
  for (const auto& [suffix, content] : empty.extra_files)
    if (suffix == "bound_vs_T.csv") EXPECT_TRUE(content.empty());
  EXPECT_TRUE(empty.passed());
}

TEST(Binary, ExitCodesAndOutputs) {
  if (!std::getenv("SGDLB_TOOL")) GTEST_SKIP() << "SGDLB_TOOL not set";
  const fs::path dir = scratch("binary");
  const std::string out = (dir / "agg").string();
  EXPECT_EQ(run_tool("lower aggregation_step --T 10 --replications 3 --output " + out), 0);
  EXPECT_TRUE(fs::exists(out + ".csv"));
  const auto summary = nlohmann::json::parse(slurp(out + ".json"));
  EXPECT_EQ(summary["verdict"], "pass");
  EXPECT_TRUE(summary.contains("wall_time_seconds"));

  EXPECT_EQ(run_tool("lower no_such_theorem --output " + out), 2);
  EXPECT_EQ(run_tool("lower aggregation_step --T 1 --output " + out), 2);
  EXPECT_EQ(run_tool("lower aggregation_step --wibble 3 --output " + out), 2);
  EXPECT_EQ(run_tool("upper gd_corollary --sigma 1 --output " + out), 2);
  EXPECT_EQ(run_tool("frobnicate"), 2);

  for (const char* variant : {"prop_noise_const", "prop_noise_floor", "prop_noise_poly"}) {
    const std::string prefix = (dir / variant).string();
    ASSERT_EQ(run_tool(std::string("lower ") + variant + " --T 16 --replications 10 --output " + prefix), 0) << variant;
    EXPECT_EQ(nlohmann::json::parse(slurp(prefix + ".json"))["summary"]["case"], variant);
  }

  // A set that violates the interpolation conditions fails verification.
  const fs::path bad = dir / "bad.txt";
  std::ofstream(bad) << "0 0 0\n0 1 0\n";
  EXPECT_EQ(run_tool("interpolate " + bad.string() + " --output " + (dir / "bad").string()), 3);
  const std::string good = fixtures::write_sample_set(dir);
  EXPECT_EQ(run_tool("interpolate " + good + " --output " + (dir / "good").string()), 0);

  // Config files work through `run`.
  const fs::path cfg = dir / "conc.cfg";
  std::ofstream(cfg) << "experiment = concentration\nd = 50\nsamples = 1000\n";
  EXPECT_EQ(run_tool("run --config " + cfg.string() + " --output " + (dir / "conc").string()), 0);
  EXPECT_EQ(run_tool("plot-data --sweep_T= --output " + (dir / "plot").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "plot_bound_vs_T.csv"));
  EXPECT_EQ(fs::file_size(dir / "plot_bound_vs_T.csv"), 0u);
}

TEST(Binary, ByteIdenticalCsv) {
  if (!std::getenv("SGDLB_TOOL")) GTEST_SKIP() << "SGDLB_TOOL not set";
  const fs::path dir = scratch("bytes");
  for (const char* args : {"lower prop_noise --T 16 --replications 10", "simulate --T 20 --schedule random:0,1 --agg random",
                           "tightness --T 100 --replications 2"}) {
    ASSERT_EQ(run_tool(std::string(args) + " --output " + (dir / "a").string()), 0) << args;
    ASSERT_EQ(run_tool(std::string(args) + " --output " + (dir / "b").string()), 0) << args;
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv")) << args;
    EXPECT_FALSE(slurp(dir / "a.csv").empty());
  }
}

TEST(WriteAtomically, CreatesDirectoriesAndReplaces) {
  const fs::path p = scratch("atomic") / "nested" / "file.txt";
  write_atomically(p.string(), "one");
  write_atomically(p.string(), "two");
  EXPECT_EQ(slurp(p), "two");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}
