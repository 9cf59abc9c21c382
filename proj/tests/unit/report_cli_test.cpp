// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sparsecal/allocator.hpp"
#include "sparsecal/checkpoint.hpp"
#include "sparsecal/report.hpp"
#include "sparsecal/train.hpp"
#include "support.hpp"

namespace sparsecal {
namespace {

using nlohmann::json;
using testing::TempDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

CalibrationReport sample_report() {
  CalibrationReport r;
  r.arch = "mlp-3x256";
  r.plan.target = 0.7;
  r.norm = {0.1, 0.3};
  r.calib_size = 64;
  r.steps = {{0, 0.5, 0.1, 0.6, 1.0}, {1, 0.25, 0.0, 0.7, 1.0}};
  r.layers = {{"fc1", 200704, 0.0123, 0.75}, {"fc2", 65536, 0.02, 0.6}, {"fc3", 65536, 0.03, 0.55},
              {"fc4", 2560, 0.1, 0.2}};
  double pruned = 0.0, total = 0.0;
  for (const auto& l : r.layers) {
    pruned += l.rate * static_cast<double>(l.count);
    total += static_cast<double>(l.count);
  }
  r.achieved_rate = pruned / total;
  r.wall_seconds = 12.5;
  r.accuracy_dense = 0.98;
  return r;
}

TEST(Report, JsonHasAllocationAndNoWallClock) {
  const auto r = sample_report();
  const auto j = json::parse(report_json(r, R"({"command":"calibrate"})"));
  EXPECT_EQ(j["config"]["command"], "calibrate");
  EXPECT_EQ(j["arch"], "mlp-3x256");
  EXPECT_EQ(j["plan"]["target"], 0.7);
  ASSERT_EQ(j["allocation"].size(), 4u);
  EXPECT_EQ(j["allocation"][0]["layer_name"], "fc1");
  EXPECT_EQ(j["allocation"][3]["N"], 2560);
  EXPECT_EQ(j["steps"].size(), 2u);
  EXPECT_EQ(j["accuracy_dense"], 0.98);
  EXPECT_TRUE(j["accuracy_sparse"].is_null());
  EXPECT_FALSE(j.contains("wall_seconds"));

  double weighted = 0.0, total = 0.0;
  for (const auto& row : j["allocation"]) {
    weighted += row["rate"].get<double>() * row["N"].get<double>();
    total += row["N"].get<double>();
  }
  EXPECT_NEAR(weighted / total, j["achieved_rate"].get<double>(), 1e-9);
  EXPECT_THROW(report_json(r, "[1,2]"), FormatError);
}

TEST(Report, CsvHasOneRowPerLayer) {
  const auto r = sample_report();
  const auto rows = lines(allocation_csv(r));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "layer_index,layer_name,N,threshold,rate");
  EXPECT_EQ(rows[1].rfind("0,fc1,200704,", 0), 0u);
  EXPECT_EQ(rows[4].rfind("3,fc4,2560,", 0), 0u);
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string idx, name, n, t, rate;
    std::getline(in, idx, ',');
    std::getline(in, name, ',');
    std::getline(in, n, ',');
    std::getline(in, t, ',');
    std::getline(in, rate, ',');
    weighted += std::stod(rate) * std::stod(n);
    total += std::stod(n);
  }
  EXPECT_NEAR(weighted / total, r.achieved_rate, 1e-9);
}

TEST(Report, EmitWritesThreeFilesAndRejectsUnwritableDir) {
  TempDir dir("emit");
  emit_report(sample_report(), dir / "out");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "allocation.csv"));
  EXPECT_EQ(json::parse(slurp(dir / "out" / "timing.json"))["wall_seconds"], 12.5);

  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_report(sample_report(), dir / "file" / "sub"), ConfigError);
}

TEST(Report, MergeFieldKeepsExistingKeys) {
  TempDir dir("merge");
  merge_report_field(dir / "e.json", "a", "1");
  merge_report_field(dir / "e.json", "b", R"({"x":2})");
  const auto j = json::parse(slurp(dir / "e.json"));
  EXPECT_EQ(j["a"], 1);
  EXPECT_EQ(j["b"]["x"], 2);
  EXPECT_THROW(merge_report_field(dir / "e.json", "c", "{oops"), FormatError);
}

#ifdef SPARSECAL_CLI_PATH

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    ASSERT_EQ(run("synth-data --count 400 --seed 3 --dataset-images " + path("img") + " --dataset-labels " +
                  path("lab")),
              0);
    ASSERT_EQ(run("train --arch mlp-3x256 --epochs 1 --seed 2 --dataset-images " + path("img") +
                  " --dataset-labels " + path("lab") + " --out " + path("dense.ckpt")),
              0);
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string data() { return " --dataset-images " + path("img") + " --dataset-labels " + path("lab"); }

  static int run(const std::string& args) {
    const std::string cmd = std::string(SPARSECAL_CLI_PATH) + " " + args + " > " + path("log.txt") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

TEST_F(Cli, CalibrateWritesReportArtifacts) {
  ASSERT_EQ(run("calibrate --checkpoint " + path("dense.ckpt") + data() +
                " --calib-size 128 --target-sparsity 0.6 --steps 8 --seed 1 --out " + path("m.spm") +
                " --report-dir " + path("rep") + " --eval-images " + path("img") + " --eval-labels " + path("lab")),
            0)
      << slurp(path("log.txt"));
  const auto j = json::parse(slurp(path("rep") + "/report.json"));
  EXPECT_EQ(j["allocation"].size(), 4u);
  EXPECT_EQ(j["config"]["target_sparsity"], 0.6);
  EXPECT_TRUE(j["accuracy_sparse"].is_number());
  EXPECT_EQ(lines(slurp(path("rep") + "/allocation.csv")).size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(path("rep") + "/timing.json"));

  const auto sparse = load_sparse_model(path("m.spm"));
  EXPECT_NEAR(sparse.achieved_rate(), j["achieved_rate"].get<double>(), 1e-9);

  EXPECT_EQ(run("eval --model " + path("m.spm") + data() + " --report-dir " + path("rep")), 0);
  EXPECT_TRUE(json::parse(slurp(path("rep") + "/eval.json")).contains(path("m.spm")));
  EXPECT_EQ(run("bench --model " + path("m.spm") + " --checkpoint " + path("dense.ckpt") +
                " --batch 4 --reps 3 --report-dir " + path("rep")),
            0);
  EXPECT_GT(json::parse(slurp(path("rep") + "/bench.json"))[path("m.spm")]["speedup"].get<double>(), 0.0);
}

TEST_F(Cli, ConfigFileSuppliesFlags) {
  std::ofstream(path("cfg.toml")) << "[calibrate]\ncheckpoint = \"" << path("dense.ckpt")
                                  << "\"\ndataset-images = \"" << path("img") << "\"\ndataset-labels = \""
                                  << path("lab") << "\"\ncalib-size = 64\ntarget-sparsity = 0.5\nsteps = 2\n"
                                  << "allocator = \"uniform\"\nout = \"" << path("cfg.spm") << "\"\nreport-dir = \""
                                  << path("cfgrep") << "\"\n";
  ASSERT_EQ(run("--config " + path("cfg.toml") + " calibrate"), 0) << slurp(path("log.txt"));
  const auto j = json::parse(slurp(path("cfgrep") + "/report.json"));
  EXPECT_EQ(j["plan"]["allocator"], "uniform");
  EXPECT_EQ(j["plan"]["learn_rates"], false);
}

TEST_F(Cli, UnknownConfigKeyIsConfigError) {
  std::ofstream(path("bad.toml")) << "[calibrate]\nno-such-key = 3\n";
  EXPECT_EQ(run("--config " + path("bad.toml") + " calibrate"), 2);
}

TEST_F(Cli, BadInputsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("eval --model /nonexistent/model" + data()), 2);
  EXPECT_EQ(run("calibrate --checkpoint " + path("dense.ckpt") + data() + " --target-sparsity 1.5 --out " +
                path("x.spm") + " --report-dir " + path("x")),
            2);
  EXPECT_EQ(run("calibrate --checkpoint " + path("dense.ckpt") + data() + " --allocator bogus --out " +
                path("x.spm") + " --report-dir " + path("x")),
            2);
  EXPECT_EQ(run("eval --model " + path("img") + data()), 2);
}

TEST_F(Cli, DivergenceExitsThree) {
  EXPECT_EQ(run("train --arch mlp-3x256 --epochs 2 --lr 1e300" + data() + " --out " + path("boom.ckpt")), 3);
}

#endif

}  // namespace
}  // namespace sparsecal
