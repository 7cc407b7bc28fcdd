#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "attnflow/io.hpp"

namespace fs = std::filesystem;
using attnflow::io::split;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + ATTNFLOW_CLI_PATH + std::string(" ") + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[512];
  while (fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const fs::path& f) {
  std::ifstream in(f);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

/// Lines after the key=value header (with or without "# ").
std::vector<std::string> body(const fs::path& f) {
  std::vector<std::string> out;
  bool in_body = false;
  for (auto& l : lines(f)) {
    if (!in_body && (l.starts_with("#") || l.find('=') != std::string::npos)) continue;
    in_body = true;
    out.push_back(l);
  }
  return out;
}

std::vector<std::string> column(const fs::path& f, std::size_t k) {
  std::vector<std::string> out;
  auto b = body(f);
  for (std::size_t i = 1; i < b.size(); ++i) out.push_back(split(b[i], ',').at(k));
  return out;
}

std::string digest_of(const std::string& stdout_line) { return stdout_line.substr(0, stdout_line.find("  ")); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / ("attnflow_cli_" + std::string(info->name()) + "_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string at(const std::string& name) const { return (dir / name).string(); }

  std::string small_data(const std::string& name, const std::string& extra = "") {
    const auto r = cli("gen-data --d 6 --m 5 --C 3 --n 40 --seed 5 " + extra + " --out " + at(name));
    EXPECT_EQ(r.code, 0);
    return at(name);
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, GenDataWritesRequestedRows) {
  const auto r = cli("gen-data --d 8 --m 5 --C 3 --mode ortho-zero --n 100 --seed 1 --out " + at("d.csv"));
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.starts_with("digest "));
  const auto rows = body(dir / "d.csv");
  ASSERT_EQ(rows.size(), 100u);
  for (const auto& row : rows) EXPECT_EQ(split(row, ',').size(), 2u + 8u * 5u);
}

TEST_F(Cli, GenDataRerunHasSameDigest) {
  const std::string args = "gen-data --d 4 --m 3 --C 2 --n 30 --seed 9 --mode gaussian --noise-std 0.2 --out ";
  const auto a = cli(args + at("a.csv"));
  const auto b = cli(args + at("b.csv"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(digest_of(a.out), digest_of(b.out));
  auto la = lines(dir / "a.csv"), lb = lines(dir / "b.csv");
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i].starts_with("created=")) continue;
    EXPECT_EQ(la[i], lb[i]);
  }
}

TEST_F(Cli, GaussianModeFillsBackground) {
  small_data("g.csv", "--mode gaussian --noise-std 0.3");
  const std::size_t d = 6, m = 5;
  for (const auto& row : body(dir / "g.csv")) {
    const auto f = split(row, ',');
    const std::size_t fg = std::stoul(f[1]);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == fg) continue;
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) norm += std::abs(std::stod(f[2 + j * d + i]));
      EXPECT_GT(norm, 0.0);
    }
  }
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(dir / "g.cfg") << "# data\nd=5\nm=3\nC=2\nn=20\nnoise_std=0.1\nmode=gaussian\n";
  const auto r = cli("gen-data --config " + at("g.cfg") + " --n 7 --out " + at("c.csv"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(body(dir / "c.csv").size(), 7u);
  const auto head = lines(dir / "c.csv");
  EXPECT_EQ(head[0], "d=5");
  EXPECT_NE(std::find(head.begin(), head.end(), "mode=gaussian"), head.end());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli("gen-data --mode nope --out " + at("x.csv")).code, 2);
  EXPECT_EQ(cli("gen-data --no-such-flag").code, 2);
  EXPECT_EQ(cli("gen-data --d 2 --C 3 --out " + at("x.csv")).code, 2);
  EXPECT_EQ(cli("train --data " + at("missing.csv")).code, 2);
  EXPECT_EQ(cli("simulate-ode --T -1 --out-dir " + at("o")).code, 2);
  const std::string data = small_data("g.csv", "--mode gaussian --noise-std 0.5");
  EXPECT_EQ(cli("train --data " + data + " --mode hybrid --epochs 3 --switch-epoch 4 --out-dir " + at("h")).code, 2);
  EXPECT_EQ(cli("train --data " + data + " --lr 1e308 --epochs 10 --init gaussian --init-sigma 1 --out-dir " + at("t"))
                .code,
            3);
  EXPECT_EQ(cli("simulate-ode --T 1 --out-dir " + at("o"), "ATTNFLOW_WORKERS=0").code, 2);
}

TEST_F(Cli, FixedFocusAlphaOneTracesAgree) {
  const auto r = cli("simulate-ode --fixed-focus --alpha 1 --paradigm sa,ha --C 5 --T 30 --out-dir " + at("o"));
  ASSERT_EQ(r.code, 0);
  const auto sa = column(dir / "o/ode_fixed_sa_a1.csv", 1), ha = column(dir / "o/ode_fixed_ha_a1.csv", 1);
  ASSERT_GT(sa.size(), 10u);
  EXPECT_EQ(sa, ha);
}

TEST_F(Cli, JointWritesOneTracePerParadigm) {
  const auto r = cli("simulate-ode --joint --m 20 --C 20 --T 50 --out-dir " + at("o"));
  ASSERT_EQ(r.code, 0);
  for (const char* p : {"sa", "ha", "lv"}) {
    const auto b = body(dir / (std::string("o/ode_joint_") + p + ".csv"));
    ASSERT_FALSE(b.empty());
    EXPECT_EQ(b[0], "t,mu,nu,alpha,beta,Z,paradigm,mode");
    EXPECT_EQ(split(b.back(), ',')[0], "50");
  }
}

TEST_F(Cli, WorkerCountDoesNotChangeOutputs) {
  const std::string args = "simulate-ode --fixed-focus --C 4 --T 10 --out-dir ";
  const auto one = cli(args + at("o"), "ATTNFLOW_WORKERS=1");
  const auto four = cli(args + at("o"), "ATTNFLOW_WORKERS=4");
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out, four.out);
}

TEST_F(Cli, TrainRerunIsDeterministic) {
  const std::string data = small_data("g.csv", "--mode gaussian --noise-std 0.4");
  const std::string args = "train --data " + data + " --paradigm lv --epochs 8 --batch 7 --init gaussian --seed 3 --out-dir ";
  const auto a = cli(args + at("a"));
  const auto b = cli(args + at("b"));
  ASSERT_EQ(a.code, 0);
  auto da = split(a.out, '\n'), db = split(b.out, '\n');
  ASSERT_EQ(da.size(), db.size());
  for (std::size_t i = 0; i + 1 < da.size(); ++i) EXPECT_EQ(digest_of(da[i]), digest_of(db[i]));
}

TEST_F(Cli, HybridSwitchAtZeroIsPureHard) {
  const std::string data = small_data("g.csv", "--mode gaussian --noise-std 0.4");
  const std::string common = " --epochs 6 --init gaussian --seed 2 --out-dir " + at("t");
  ASSERT_EQ(cli("train --data " + data + " --mode hybrid --switch-epoch 0" + common).code, 0);
  ASSERT_EQ(cli("train --data " + data + " --mode joint --paradigm ha" + common).code, 0);
  EXPECT_EQ(body(dir / "t/hybrid/params.txt"), body(dir / "t/joint_ha/params.txt"));
}

TEST_F(Cli, AlphaSweepEmitsOneCurvePerAlpha) {
  const std::string data = small_data("d.csv");
  ASSERT_EQ(cli("train --data " + data + " --mode fixed --paradigm sa,ha --epochs 4 --out-dir " + at("t")).code, 0);
  for (const char* p : {"sa", "ha"}) {
    const auto b = body(dir / (std::string("t/loss_curves_") + p + ".csv"));
    ASSERT_EQ(b.size(), 1u + 5u);
    EXPECT_EQ(b[0], "epoch,alpha_0.2,alpha_0.4,alpha_0.6,alpha_0.8,alpha_1");
  }
  ASSERT_EQ(cli("train --data " + data + " --mode fixed --alpha 0.3,0.7 --epochs 2 --out-dir " + at("u")).code, 0);
  EXPECT_EQ(split(body(dir / "u/loss_curves_sa.csv")[0], ',').size(), 3u);
}

TEST_F(Cli, EvaluateZeroParamsMassSitsAtUniformCell) {
  const std::string data = small_data("d.csv");
  ASSERT_EQ(cli("train --data " + data + " --epochs 0 --out-dir " + at("t")).code, 0);
  ASSERT_EQ(cli("evaluate --data " + data + " --params " + at("t/joint_sa/params.txt") + " --out-dir " + at("e")).code,
            0);
  for (const char* p : {"sa", "ha", "lv"}) {
    const auto b = body(dir / (std::string("e/heatmap_") + p + ".csv"));
    ASSERT_EQ(b[0], "counts");
    // a_z = 1/5 and s_y = 1/3 both land in bin 1; rows run from the top bin down
    EXPECT_EQ(b[1 + 3], "0,40,0,0,0");
  }
}

TEST_F(Cli, SaifDropsWithHigherThreshold) {
  const std::string data = small_data("d.csv");
  ASSERT_EQ(cli("train --data " + data + " --lr 5 --epochs 30 --out-dir " + at("t")).code, 0);
  const std::string args = "evaluate --data " + data + " --params " + at("t/joint_sa/params.txt") + " --paradigm sa";
  ASSERT_EQ(cli(args + " --threshold 0.5 --out-dir " + at("lo")).code, 0);
  ASSERT_EQ(cli(args + " --threshold 0.9 --out-dir " + at("hi")).code, 0);
  const double lo = std::stod(column(dir / "lo/metrics.csv", 1)[0]);
  const double hi = std::stod(column(dir / "hi/metrics.csv", 1)[0]);
  EXPECT_GE(lo, hi);
  EXPECT_GT(lo, 0.0);
}

TEST_F(Cli, IncentiveGridEdges) {
  const std::string data = small_data("d.csv");
  ASSERT_EQ(cli("train --data " + data + " --mode fixed --paradigm sa,lv --lr 5 --epochs 10 --checkpoint-every 5 "
                "--out-dir " + at("t"))
                .code,
            0);
  ASSERT_EQ(cli("incentive --data " + data + " --checkpoints " + at("t") + " --paradigm sa,lv --out-dir " + at("i"))
                .code,
            0);
  for (const char* p : {"sa", "lv"}) {
    const auto b = body(dir / (std::string("i/incentive_") + p + ".csv"));
    ASSERT_EQ(b.size(), 1u + 3u);  // epochs 0, 5, 10
    for (std::size_t r = 1; r < b.size(); ++r) {
      const auto f = split(b[r], ',');
      EXPECT_EQ(std::stod(f.back()), 0.0) << "alpha = 1 column";
      if (r != 1) continue;
      for (std::size_t k = 1; k < f.size(); ++k) EXPECT_LT(std::abs(std::stod(f[k])), 1e-12) << "zero-init row";
    }
  }
  EXPECT_EQ(cli("incentive --data " + data + " --checkpoints " + at("t") + " --paradigm ha").code, 2);
  EXPECT_EQ(cli("incentive --data " + data + " --checkpoints " + at("t") + " --paradigm sa --epochs 7").code, 2);
}
