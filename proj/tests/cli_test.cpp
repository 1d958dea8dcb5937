#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sigaug/cli.hpp"
#include "sigaug/error.hpp"
#include "test_util.hpp"

using namespace sigaug;
using sigaug::testing::data_path;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(std::move(args), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("sigaug_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Small two-faction graph with both signs, written as a signed edge list.
fs::path write_small_graph(const TempDir& dir) {
  const auto g = sigaug::testing::two_faction_graph(30, 0.35, 0.2, 0.1, 4);
  const auto p = dir / "graph.txt";
  std::ofstream out(p);
  write_signed_edge_list(out, g);
  return p;
}

std::vector<std::string> fast_train_flags() {
  return {"--epochs", "10", "--input-dim", "6", "--embedding-dim", "6", "--quiet"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SIGAUG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CliStats, Example) {
  const auto r = run({"stats", data_path("small.txt"), "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("n=4\npos=2\nneg=2\nneg_ratio=0.5\n"), std::string::npos) << r.out;
  EXPECT_TRUE(r.err.empty());
}

TEST(CliStats, EmptyFileGivesZeros) {
  const auto r = run({"stats", "--dataset", data_path("empty.txt"), "--quiet"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("n=0\npos=0\nneg=0\nneg_ratio=0\n"), std::string::npos);
}

TEST(CliStats, BannerGoesToStderr) {
  const auto r = run({"stats", data_path("small.txt")});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.err.find("subcommand = stats"), std::string::npos);
  EXPECT_EQ(r.out.find(" = "), std::string::npos);
}

TEST(CliExitCodes, UsageIoAndComponent) {
  EXPECT_EQ(run({"stats", "/nonexistent/file.txt", "--quiet"}).code, kExitIo);
  EXPECT_EQ(run({"stats", data_path("small.txt"), "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"stats", "--quiet"}).code, kExitUsage);
  EXPECT_EQ(run({"balance", data_path("small.txt"), "--mu", "0.95", "--quiet"}).code, kExitUsage);
  EXPECT_EQ(run({"balance", data_path("small.txt"), "--mu", "abc", "--quiet"}).code, kExitUsage);
  EXPECT_EQ(run({"stats", data_path("small.txt"), "--config", "/nonexistent.conf"}).code, kExitIo);
  // Training needs both signs; an all-positive graph is refused.
  EXPECT_EQ(run(concat({"train", data_path("balanced_triangle.txt")}, fast_train_flags())).code,
            kExitComponent);
}

TEST(CliBalance, BalancedTriangleKeptAndUnbalancedListed) {
  const auto r = run({"balance", data_path("two_negative_triangle.txt"), "--mu", "0.7", "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("x z -1 1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("y z -1 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("kept=2\ndiscarded=0\n"), std::string::npos);
}

TEST(CliBalance, CycleLengthChangesTheVerdict) {
  const auto short_cycles = run({"balance", data_path("square.txt"), "--mu", "0.8", "--eta", "3", "--quiet"});
  const auto long_cycles = run({"balance", data_path("square.txt"), "--mu", "0.8", "--eta", "4", "--quiet"});
  ASSERT_EQ(short_cycles.code, kExitOk);
  ASSERT_EQ(long_cycles.code, kExitOk);
  EXPECT_NE(short_cycles.out.find("0 3 -1 undefined\n"), std::string::npos) << short_cycles.out;
  EXPECT_NE(short_cycles.out.find("kept=1\n"), std::string::npos);
  EXPECT_NE(long_cycles.out.find("0 3 -1 0.75\n"), std::string::npos) << long_cycles.out;
  EXPECT_NE(long_cycles.out.find("discarded=1\n"), std::string::npos);
}

TEST(CliBalance, MuZeroKeepsEverything) {
  TempDir dir;
  const auto graph = write_small_graph(dir);
  const auto r = run({"balance", graph.string(), "--mu", "0", "--quiet"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("discarded=0\n"), std::string::npos);
}

TEST(CliConfig, EchoRoundTrip) {
  CliConfig cfg;
  cfg.subcommand = "sweep";
  cfg.output = "out.csv";
  cfg.experiment.dataset = "graph.txt";
  cfg.experiment.base_seed = 17;
  cfg.experiment.train.seed = 17;
  cfg.experiment.augmentation = Augmentation::Sigaug;
  cfg.experiment.supervision = Supervision::Augmented;
  cfg.experiment.epr.mu = 0.3;
  cfg.experiment.epr.theta_target = 1.0 / 7.0;
  cfg.experiment.train.class_weights = std::array<double, 3>{0.1 + 0.2, 1.0, 2.5};
  cfg.experiment.train.weight_decay = 1e-5;
  cfg.grid.mu = {0.1, 0.5};
  cfg.grid.delta = {0.2};
  cfg.sweep_cap = 9;
  std::ostringstream out;
  write_config(out, cfg);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_config(in), cfg);

  std::istringstream defaults("");
  EXPECT_EQ(parse_config(defaults), CliConfig{});
}

TEST(CliConfig, RejectsUnknownKeysAndMalformedLines) {
  std::istringstream unknown("mu = 0.5\nflux = 3\n");
  try {
    parse_config(unknown);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream no_equals("mu 0.5\n");
  EXPECT_THROW(parse_config(no_equals), ParseError);
  CliConfig cfg;
  EXPECT_THROW(set_config_value(cfg, "runs", "two"), ArgumentError);
  EXPECT_THROW(set_config_value(cfg, "class_weights", "1,2"), ArgumentError);
}

TEST(CliConfig, FlagsOverrideFileOverrideDefaults) {
  TempDir dir;
  const auto conf = dir / "run.conf";
  {
    std::ofstream out(conf);
    out << "# overrides\nmu = 0.3\neta = 5\nepochs = 7\n";
  }
  const auto r = run({"balance", data_path("small.txt"), "--config", conf.string(), "--mu", "0.5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream banner(r.err);
  const auto echoed = parse_config(banner);
  EXPECT_EQ(echoed.experiment.epr.mu, 0.5);
  EXPECT_EQ(echoed.experiment.epr.eta, 5);
  EXPECT_EQ(echoed.experiment.train.epochs, 7);
  EXPECT_EQ(echoed.experiment.epr.delta_target, EPRConfig{}.delta_target);

  const auto bad = dir / "bad.conf";
  {
    std::ofstream out(bad);
    out << "nonsense = 1\n";
  }
  EXPECT_EQ(run({"stats", data_path("small.txt"), "--config", bad.string()}).code, kExitUsage);
}

TEST(CliPipeline, TrainAugmentEvaluateAreDeterministic) {
  TempDir dir;
  const auto graph = write_small_graph(dir);
  for (const char* tag : {"a", "b"}) {
    const auto emb = dir / (std::string("emb_") + tag);
    ASSERT_EQ(run(concat({"train", graph.string(), "--output", emb.string(), "--seed", "3"}, fast_train_flags())).code,
              kExitOk);
    const auto aug = dir / (std::string("aug_") + tag);
    ASSERT_EQ(run({"augment", graph.string(), "--embeddings", emb.string(), "--output", aug.string(), "--delta",
                   "0.3", "--theta", "0.5", "--quiet"})
                  .code,
              kExitOk);
    const auto rep = dir / (std::string("rep_") + tag);
    ASSERT_EQ(run(concat({"evaluate", graph.string(), "--output", rep.string(), "--runs", "2", "--augmentation",
                          "sigaug", "--delta", "0.2"},
                         fast_train_flags()))
                  .code,
              kExitOk);
  }
  for (const char* stem : {"emb_", "aug_", "rep_"}) {
    const auto a = slurp(dir / (std::string(stem) + "a"));
    EXPECT_FALSE(a.empty()) << stem;
    EXPECT_EQ(a, slurp(dir / (std::string(stem) + "b"))) << stem;
  }
  EXPECT_EQ(slurp(dir / "emb_a.params"), slurp(dir / "emb_b.params"));
  EXPECT_EQ(slurp(dir / "aug_a.log"), slurp(dir / "aug_b.log"));
  EXPECT_FALSE(slurp(dir / "aug_a.log").empty());

  std::istringstream lines(slurp(dir / "rep_a"));
  const auto parsed = parse_report_lines(lines);
  EXPECT_EQ(parsed.size(), report_metrics().size() * 4);
}

TEST(CliAugment, MismatchedEmbeddingsAreAComponentError) {
  TempDir dir;
  const auto graph = write_small_graph(dir);
  const auto emb = dir / "emb";
  {
    std::ofstream out(emb);
    out << "0 0.1 0.2\n1 0.3 0.4\n";
  }
  EXPECT_EQ(run({"augment", graph.string(), "--embeddings", emb.string(), "--quiet"}).code, kExitComponent);
  EXPECT_EQ(run({"augment", graph.string(), "--quiet"}).code, kExitUsage);
}

TEST(CliSweep, WritesCsv) {
  TempDir dir;
  const auto graph = write_small_graph(dir);
  const auto r = run(concat({"sweep", graph.string(), "--runs", "1", "--augmentation", "sigaug", "--grid-mu", "0.2,0.6"},
                            fast_train_flags()));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream in(r.out);
  const auto rows = parse_sweep_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].mu, 0.6);
  const auto capped = run(concat({"sweep", graph.string(), "--grid-mu", "0.2,0.6", "--sweep-cap", "1"},
                                 fast_train_flags()));
  EXPECT_EQ(capped.code, kExitComponent);
}

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(run_binary("stats " + data_path("small.txt") + " --quiet"), kExitOk);
  EXPECT_EQ(run_binary("stats /nonexistent/file.txt --quiet"), kExitIo);
  EXPECT_EQ(run_binary("stats --frobnicate"), kExitUsage);
  EXPECT_EQ(run_binary("--help"), kExitOk);
}
