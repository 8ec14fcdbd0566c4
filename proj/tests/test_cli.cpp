#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <mbtc/cli.hpp>

using namespace mbtc;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mbtc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, GenerateAndBuild) {
  ASSERT_EQ(run({"gen-rules", "--seed", "7", "--count", "1000", "--profile", "acl", "--out", path("r.txt")}), 0);
  ASSERT_EQ(run({"build", "--rules", path("r.txt"), "--binth", "16", "--builder", "greedy", "--out", path("t.json")}),
            0)
      << err_.str();
  EXPECT_TRUE(fs::exists(path("t.json")));
  EXPECT_NE(out_.str().find("nodes="), std::string::npos);
  EXPECT_EQ(load_classbench(path("r.txt")).size(), 1000u);
}

TEST_F(Cli, FullPipelineMatchesOracle) {
  ASSERT_EQ(run({"gen-rules", "--seed", "3", "--count", "500", "--out", path("r.txt")}), 0);
  ASSERT_EQ(run({"gen-trace", "--rules", path("r.txt"), "--seed", "1", "--count", "500", "--out", path("tr.txt")}), 0);
  ASSERT_EQ(run({"build", "--rules", path("r.txt"), "--out", path("t.json")}), 0);
  ASSERT_EQ(run({"derive-eb", "--tree", path("t.json"), "--out", path("eb.json")}), 0);
  ASSERT_EQ(run({"truncate", "--tree", path("eb.json"), "--group-binth", "40", "--out", path("e.json")}), 0)
      << err_.str();
  ASSERT_EQ(run({"classify", "--engine", path("e.json"), "--trace", path("tr.txt")}), 0) << err_.str();
  const std::string lines = out_.str();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 500);

  const Ruleset rs = load_classbench(path("r.txt"));
  const PacketHeader h{3232235777u, 167772161u, 1234, 53, 17};
  ASSERT_EQ(run({"classify", "--engine", path("e.json"), "--header", "3232235777,167772161,1234,53,17"}), 0);
  const auto want = oracle_classify(rs, h);
  const Engine e = engine_from_json(load_json(path("e.json")));
  const std::string expect = "3232235777,167772161,1234,53,17 rule=" + (want ? std::to_string(*want) : "none") +
                             " accesses=" + std::to_string(classify_multibit(e, h).accesses) + "\n";
  EXPECT_EQ(out_.str(), expect);
}

TEST_F(Cli, TruncateNeedsAnnotatedTree) {
  ASSERT_EQ(run({"gen-rules", "--seed", "3", "--count", "200", "--out", path("r.txt")}), 0);
  ASSERT_EQ(run({"build", "--rules", path("r.txt"), "--out", path("t.json")}), 0);
  EXPECT_EQ(run({"truncate", "--tree", path("t.json"), "--group-binth", "40", "--out", path("e.json")}), 1);
  EXPECT_NE(err_.str().find("derive_effective_bits"), std::string::npos);
}

TEST_F(Cli, BenchWritesCsvWithFullAgreement) {
  ASSERT_EQ(run({"gen-rules", "--seed", "7", "--count", "1000", "--out", path("r.txt")}), 0);
  ASSERT_EQ(run({"gen-trace", "--rules", path("r.txt"), "--seed", "2", "--count", "2000", "--out", path("tr.txt")}), 0);
  ASSERT_EQ(run({"bench", "--rules", path("r.txt"), "--binth", "16", "--group-binth", "40", "--trace", path("tr.txt"),
                 "--csv", path("out.csv")}),
            0)
      << err_.str();
  const auto rows = parse_bench_csv(read_text_file(path("out.csv")));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].agreement, 1.0);
  EXPECT_EQ(rows[0].binth, 16);
  EXPECT_EQ(rows[0].group_binth, 40);
  EXPECT_EQ(rows[0].ruleset, "r");
  EXPECT_TRUE(fs::exists(path("out.summary.txt")));

  ASSERT_EQ(run({"bench", "--rules", path("r.txt"), "--binth", "16,32", "--group-binth", "20,40", "--trace-count",
                 "500", "--csv", path("sweep.csv")}),
            0);
  EXPECT_EQ(parse_bench_csv(read_text_file(path("sweep.csv"))).size(), 4u);
}

TEST_F(Cli, IdenticalCommandsGiveIdenticalArtifacts) {
  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    ASSERT_EQ(run({"gen-rules", "--seed", "11", "--count", "400", "--profile", "ipc", "--out", path(t + ".rules")}), 0);
    ASSERT_EQ(run({"build", "--rules", path(t + ".rules"), "--builder", "rl", "--iterations", "2", "--rollouts", "3",
                   "--out", path(t + ".tree.json"), "--log", path(t + ".log.csv")}),
              0);
    ASSERT_EQ(run({"derive-eb", "--tree", path(t + ".tree.json"), "--out", path(t + ".eb.json")}), 0);
    ASSERT_EQ(run({"truncate", "--tree", path(t + ".eb.json"), "--group-binth", "20", "--out", path(t + ".e.json")}), 0);
    ASSERT_EQ(run({"bench", "--rules", path(t + ".rules"), "--binth", "8,16", "--group-binth", "20,40",
                   "--trace-count", "300", "--name", "same", "--csv", path(t + ".bench.csv")}),
              0);
  }
  for (const char* suffix : {".rules", ".tree.json", ".log.csv", ".eb.json", ".e.json", ".bench.csv",
                             ".bench.summary.txt", ".bench.memory_vs_binth.csv"})
    EXPECT_EQ(read_text_file(path(std::string("a") + suffix)), read_text_file(path(std::string("b") + suffix)))
        << suffix;
}

TEST_F(Cli, ConfigFileDrivesTraining) {
  ASSERT_EQ(run({"gen-rules", "--seed", "4", "--count", "300", "--out", path("r.txt")}), 0);
  write_text_file(path("cfg.json"), R"({"iterations": 3, "rollouts_per_iteration": 2, "seed": 5})");
  ASSERT_EQ(run({"build", "--rules", path("r.txt"), "--builder", "rl", "--config", path("cfg.json"), "--out",
                 path("t.json"), "--log", path("log.csv")}),
            0)
      << err_.str();
  const std::string log = read_text_file(path("log.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  write_text_file(path("bad.json"), R"({"iters": 3})");
  EXPECT_EQ(run({"build", "--rules", path("r.txt"), "--builder", "rl", "--config", path("bad.json"), "--out",
                 path("t2.json")}),
            1);
}

TEST_F(Cli, BadArgumentsFail) {
  EXPECT_NE(run({}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
  EXPECT_NE(run({"gen-rules", "--seed", "1", "--count", "10", "--profile", "fw", "--out", path("x")}), 0);
  EXPECT_NE(run({"build", "--rules", path("missing.txt"), "--out", path("t.json")}), 0);
  ASSERT_EQ(run({"gen-rules", "--seed", "1", "--count", "50", "--out", path("r.txt")}), 0);
  ASSERT_EQ(run({"build", "--rules", path("r.txt"), "--out", path("t.json")}), 0);
  EXPECT_EQ(run({"classify", "--tree", path("t.json")}), 1);
  EXPECT_EQ(run({"classify", "--tree", path("t.json"), "--header", "1,2,3"}), 1);
  EXPECT_EQ(run({"--help"}), 0);
}
