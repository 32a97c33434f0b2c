#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "fairsvm/data.hpp"
#include "oracles.hpp"

using namespace fairsvm;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string("\"") + FAIRSVM_CLI + "\" " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fairsvm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Toy raw file plus a schema pointing at it.
  std::string toy_schema(const std::string& sha = "") const {
    std::ofstream(path("toy.csv")) << "y,g,x1,x2\n1,m,0.5,1\n0,f,-0.2,0\n1,f,1.1,2\n0,m,-1,1\n"
                                      "1,m,0.9,0\n0,f,-0.7,2\n1,f,0.4,1\n0,m,-0.3,0\n";
    nlohmann::json s = {{"name", "toy"},
                        {"target_column", "y"},
                        {"positive_values", {"1"}},
                        {"negative_values", {"0"}},
                        {"sensitive_column", "g"},
                        {"group_a_values", {"m"}},
                        {"files", {{{"role", "data"}, {"name", "toy.csv"}, {"sha256", sha}}}}};
    std::ofstream(path("toy.json")) << s.dump(2);
    return path("toy.json");
  }

  fs::path dir_;
};

TEST_F(Cli, UnknownSubcommandIsInputError) {
  EXPECT_EQ(cli("no-such-command").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST_F(Cli, HelpSucceeds) { EXPECT_EQ(cli("--help").code, 0); }

TEST_F(Cli, StochasticCommandsRequireSeed) {
  EXPECT_EQ(cli("synth --out " + path("s.csv")).code, 2);
  EXPECT_EQ(cli("bench --n 40").code, 2);
  EXPECT_EQ(cli("experiment --synthetic mistreatment --output " + path("x")).code, 2);
  EXPECT_EQ(cli("grid-search --synthetic mistreatment --output " + path("g")).code, 2);
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(cli("synth --seed 5 --out " + path("a.csv")).code, 0);
  ASSERT_EQ(cli("synth --seed 5 --out " + path("b.csv")).code, 0);
  ASSERT_EQ(cli("synth --seed 6 --out " + path("c.csv")).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
  EXPECT_EQ(read_dataset_csv(path("a.csv")).size(), 400);
}

TEST_F(Cli, TrainEvaluateRoundTrip) {
  ASSERT_EQ(cli("synth --seed 1 --out " + path("d.csv")).code, 0);
  const CliRun t = cli("train --data " + path("d.csv") + " --model svm_mt --rho 0.3 --C 0.1 --gamma 0.1 --out " +
                    path("m.json"));
  ASSERT_EQ(t.code, 0);
  const auto summary = nlohmann::json::parse(t.out);
  EXPECT_EQ(summary.at("status"), "optimal");
  EXPECT_GE(summary.at("separation_value").get<double>() * (summary.at("orientation") == "b_minus_a" ? -1 : 1),
            0.3 - 1e-6);
  const CliRun e = cli("evaluate --model-file " + path("m.json") + " --data " + path("d.csv"));
  ASSERT_EQ(e.code, 0);
  const auto report = nlohmann::json::parse(e.out);
  EXPECT_EQ(report.at("n"), 400);
  EXPECT_GT(report.at("accuracy").get<double>(), 0.7);
}

TEST_F(Cli, InfeasibleSeparationExitsThree) {
  // All negatives share one point, so their group barycenters coincide.
  Rng rng(3);
  GroupedDataset d = fairsvm::testing::random_dataset(rng, 16, 2);
  for (Index i = 0; i < d.size(); ++i) {
    if (d.y[static_cast<std::size_t>(i)] == -1) d.x.row(i) << 0.5, -0.5;
  }
  write_dataset_csv(d, path("flat.csv"));
  EXPECT_EQ(cli("train --data " + path("flat.csv") + " --model svm_mt --rho 0.2 --out " + path("m.json")).code, 3);
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(Cli, MissingOrMalformedInputExitsTwo) {
  EXPECT_EQ(cli("train --data " + path("absent.csv") + " --out " + path("m.json")).code, 2);
  std::ofstream(path("bad.csv")) << "label,group,x0\n1,a,nope\n";
  EXPECT_EQ(cli("train --data " + path("bad.csv") + " --out " + path("m.json")).code, 2);
  ASSERT_EQ(cli("synth --seed 1 --out " + path("d.csv")).code, 0);
  EXPECT_EQ(cli("train --data " + path("d.csv") + " --model svm_mt --rho 1.5 --out " + path("m.json")).code, 2);
}

TEST_F(Cli, ChecksumMismatchExitsFour) {
  const std::string schema = toy_schema(std::string(64, '0'));
  EXPECT_EQ(cli("prepare --schema " + schema + " --data-dir " + dir_.string() + " --out " + path("p.csv")).code, 4);
}

TEST_F(Cli, RecordChecksumsFillsTheSchema) {
  const std::string schema = toy_schema();
  const CliRun r = cli("prepare --schema " + schema + " --data-dir " + dir_.string() + " --record-checksums --out " +
                    path("p.csv"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(slurp(schema));
  EXPECT_EQ(j["files"][0]["sha256"], sha256_file(path("toy.csv")));
  EXPECT_EQ(read_dataset_csv(path("p.csv")).size(), 8);
  // A recorded digest is now enforced.
  std::ofstream(path("toy.csv"), std::ios::app) << "1,m,0,0\n";
  EXPECT_EQ(cli("prepare --schema " + schema + " --data-dir " + dir_.string() + " --out " + path("p.csv")).code, 4);
}

TEST_F(Cli, ConfigFileOverridesFlags) {
  std::ofstream(path("cfg.json")) << R"({"C": [0.1], "gamma": [0.1], "models": ["svm"], "folds": 3})";
  const CliRun r = cli("grid-search --synthetic mistreatment --seed 2 --C 5 7 --gamma 1 --models svm svm_mt --config " +
                    path("cfg.json") + " --output " + path("g"));
  ASSERT_EQ(r.code, 0);
  const std::string trace = slurp(path("g") + "/trace.csv");
  std::istringstream lines(trace);
  std::string header, line;
  std::getline(lines, header);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(line.find("svm_mt"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 3);  // one candidate, three folds
  const auto best = nlohmann::json::parse(slurp(path("g") + "/best.json"));
  ASSERT_EQ(best.size(), 1u);
  EXPECT_EQ(best[0]["model"], "svm");
  EXPECT_DOUBLE_EQ(best[0]["C"].get<double>(), 0.1);
}

TEST_F(Cli, BenchReportsOrderingKey) {
  const CliRun r = cli("bench --seed 1 --n 200 --runs 1 --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("increasing_solve_time"));
  EXPECT_EQ(j["models"].size(), 3u);
}

}  // namespace
