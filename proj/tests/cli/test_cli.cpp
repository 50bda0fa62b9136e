#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cfrl/io.hpp"
#include "cfrl/trajectory.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(CFRL_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("cfrl_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& path) { return cfrl::read_file(path); }

}  // namespace

TEST_F(Cli, GenDataIsDeterministic) {
  ASSERT_EQ(run("gen-data --style mixed --drivers 2 --periods 10 --seed 4 --out " + p("a")).code, 0);
  ASSERT_EQ(run("gen-data --style mixed --drivers 2 --periods 10 --seed 4 --out " + p("b")).code, 0);
  EXPECT_EQ(slurp(p("a/manifest.json")), slurp(p("b/manifest.json")));
  EXPECT_EQ(slurp(p("a/d02/p009.csv")), slurp(p("b/d02/p009.csv")));
  const auto ds = cfrl::load_dataset(p("a"));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].style, cfrl::DrivingStyle::kAggressive);
  EXPECT_EQ(ds[1].style, cfrl::DrivingStyle::kConservative);
  EXPECT_TRUE(fs::exists(p("a/run_manifest.json")));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(run("gen-data --drivers 0 --out " + p("x")).code, 0);
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("no-such-command").code, 0);
  ASSERT_EQ(run("gen-data --drivers 1 --periods 10 --out " + p("d")).code, 0);
  const auto bad = run("train --model ddpgx --driver d01 --data " + p("d") + " --out " + p("m.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("ddpgvrt"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("m.json")));
  EXPECT_NE(run("train --model loess --driver d07 --data " + p("d") + " --out " + p("m.json")).code, 0);
}

TEST_F(Cli, TrainWritesArtifacts) {
  ASSERT_EQ(run("gen-data --drivers 1 --periods 10 --seed 2 --out " + p("d")).code, 0);
  ASSERT_EQ(run("train --model ddpgvrt --driver d01 --episodes 1 --data " + p("d") + " --out " + p("m/rt.json")).code,
            0);
  const auto model = cfrl::read_json_file(p("m/rt.json"));
  EXPECT_EQ(model["kind"], "ddpgvrt");
  const auto curves = slurp(p("m/rt.curves.csv"));
  EXPECT_EQ(curves.substr(0, curves.find('\n')), "episode,reward_mean,rmspe_train,rmspe_test");
  const auto manifest = cfrl::read_json_file(p("m/rt.manifest.json"));
  for (const char* key : {"command", "config", "inputs", "outputs", "tool_version", "wall_clock_s", "seed"}) {
    EXPECT_TRUE(manifest.contains(key)) << key;
  }

  ASSERT_EQ(run("train --model loess --driver d01 --data " + p("d") + " --out " + p("m/lo.json")).code, 0);
  EXPECT_TRUE(fs::exists(p("m/lo.json")));
  EXPECT_FALSE(fs::exists(p("m/lo.curves.csv")));
}

TEST_F(Cli, DataDirFromEnvironment) {
  ASSERT_EQ(run("gen-data --drivers 1 --periods 10 --out " + p("d")).code, 0);
  EXPECT_EQ(run("train --model loess --driver d01 --out " + p("lo.json"), "CFRL_DATA_DIR=" + p("d")).code, 0);
  EXPECT_TRUE(fs::exists(p("lo.json")));
}

TEST_F(Cli, InterMatrixShape) {
  ASSERT_EQ(run("gen-data --style mixed --drivers 5 --periods 10 --out " + p("d")).code, 0);
  std::string models;
  for (int i = 1; i <= 5; ++i) {
    const std::string id = "d0" + std::to_string(i);
    ASSERT_EQ(run("train --model loess --driver " + id + " --data " + p("d") + " --out " + p(id + ".json")).code, 0);
    models += " " + p(id + ".json");
  }
  ASSERT_EQ(run("evaluate --mode inter --data " + p("d") + " --out " + p("ev") + " --models" + models).code, 0);
  const auto csv = slurp(p("ev/spacing_matrix.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "driver,d01,d02,d03,d04,d05");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  const auto j = cfrl::read_json_file(p("ev/matrix.json"));
  EXPECT_EQ(j["spacing"].size(), 5u);
  EXPECT_EQ(j["spacing"][0].size(), 5u);

  ASSERT_EQ(run("evaluate --mode compare --data " + p("d") + " --out " + p("cmp") + " --models" + models).code, 0);
  const auto report = slurp(p("cmp/report.csv"));
  EXPECT_EQ(report.substr(0, report.find('\n')), "model,calib_driver,valid_driver,rmspe_spacing,rmspe_speed");
}

TEST_F(Cli, SimulateReplayReproducesPeriod) {
  ASSERT_EQ(run("gen-data --drivers 1 --periods 10 --out " + p("d")).code, 0);
  ASSERT_EQ(run("simulate --model replay --period " + p("d/d01/p003.csv") + " --out " + p("sim.csv")).code, 0);
  const auto in = cfrl::read_period_csv(p("d/d01/p003.csv"));
  const auto out = cfrl::read_period_csv(p("sim.csv"));
  ASSERT_EQ(in.size(), out.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_NEAR(in.samples[i].gap, out.samples[i].gap, 1e-9);
    EXPECT_NEAR(in.samples[i].v_follow, out.samples[i].v_follow, 1e-9);
    EXPECT_NEAR(in.samples[i].a_follow, out.samples[i].a_follow, 1e-9);
  }
}

TEST_F(Cli, ExtractHandlesEmptyResult) {
  std::vector<cfrl::RawLogRecord> log;
  for (int i = 0; i <= 300; ++i) log.push_back({0.1 * i, 3, 10.0, 10.0, 20.0, 3.0, 0.0});
  cfrl::write_file_atomic(p("raw.csv"), cfrl::raw_log_csv(log));
  const auto r = run("extract --raw " + p("raw.csv") + " --out " + p("ex"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("warn"), std::string::npos);
  EXPECT_TRUE(cfrl::read_json_file(p("ex/manifest.json"))["drivers"].empty());

  for (auto& rec : log) rec.lat_dist = 0.4;
  cfrl::write_file_atomic(p("raw2.csv"), cfrl::raw_log_csv(log));
  ASSERT_EQ(run("extract --raw " + p("raw2.csv") + " --out " + p("ex2") + " --driver z1").code, 0);
  const auto ds = cfrl::load_dataset(p("ex2"));
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].periods.size(), 1u);
}

TEST_F(Cli, ClusterLabelsDrivers) {
  ASSERT_EQ(run("gen-data --style mixed --drivers 6 --periods 10 --seed 3 --out " + p("d")).code, 0);
  ASSERT_EQ(run("cluster --data " + p("d") + " --out " + p("labels.json")).code, 0);
  const auto j = cfrl::read_json_file(p("labels.json"));
  EXPECT_EQ(j["drivers"].size(), 6u);
  EXPECT_GE(j["agreement"].get<double>(), 0.9);
}

TEST_F(Cli, CalibrateIdm) {
  ASSERT_EQ(run("gen-data --drivers 1 --periods 10 --out " + p("d")).code, 0);
  ASSERT_EQ(run("calibrate-idm --driver d01 --population 10 --generations 3 --runs 1 --data " + p("d") + " --out " +
                p("idm.json"))
                .code,
            0);
  const auto j = cfrl::read_json_file(p("idm.json"));
  for (const char* key : {"a_max", "a_conf", "v_desired", "beta", "s_jam", "t_headway"}) EXPECT_TRUE(j.contains(key));
  ASSERT_EQ(run("evaluate --mode intra --data " + p("d") + " --out " + p("ev") + " --models " + p("idm.model.json")).code,
            0);
  EXPECT_TRUE(fs::exists(p("ev/intra.csv")));
}
