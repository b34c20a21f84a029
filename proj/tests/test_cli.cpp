#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code{};
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(SYBILSIM_BIN) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, {}};
  std::array<char, 4096> buf{};
  while (const auto n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sybilsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, MissingConfigIsAConfigError) {
  const auto r = sh("run " + (dir_ / "nope.conf").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(Cli, UnknownKeyIsAConfigError) {
  const auto cfg = write("bad.conf", "nodes.normal = 5\nwhatever = 3\n");
  const auto r = sh("run " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad.conf:2"), std::string::npos) << r.out;
}

TEST_F(Cli, NoSubcommandIsAUsageError) { EXPECT_EQ(sh("").code, 2); }

TEST_F(Cli, IntervalPrintsBothEnds) {
  const auto r = sh("interval 0 1 0.5 1 2 --oracle 100000");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("closed-form: [0.336774, 2.96935]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("oracle:"), std::string::npos);
}

TEST_F(Cli, IntervalAcceptsNegativeAbscissa) {
  const auto r = sh("interval -0.5 1 0.5 1 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("[1, 9]"), std::string::npos) << r.out;
}

TEST_F(Cli, IntervalRejectsBadArguments) {
  EXPECT_EQ(sh("interval 0 1 0.5 0 2").code, 2);
  EXPECT_EQ(sh("interval 0 -1 0.5 1 2").code, 2);
  EXPECT_EQ(sh("interval 0 1 0.5 1 2 --oracle 10").code, 2);
}

TEST_F(Cli, RunIsDeterministicAndSeedSensitive) {
  const auto cfg = write("r.conf", "nodes.normal = 20\nnodes.sybil = 4\ncycles = 5\nreplications = 3\n");
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  const auto c = dir_ / "c";
  ASSERT_EQ(sh("run " + cfg.string() + " --out " + a.string()).code, 0);
  ASSERT_EQ(sh("--out " + b.string() + " --threads 1 run " + cfg.string()).code, 0);
  ASSERT_EQ(sh("run " + cfg.string() + " --out " + c.string() + " --seed 77").code, 0);
  EXPECT_EQ(slurp(a / "cycles.csv"), slurp(b / "cycles.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_NE(slurp(a / "summary.json"), slurp(c / "summary.json"));
  EXPECT_NE(slurp(c / "summary.json").find("\"seed\": 77"), std::string::npos);
}

TEST_F(Cli, ReplicationsOverride) {
  const auto cfg = write("r.conf", "nodes.normal = 5\ncycles = 2\nreplications = 9\n");
  ASSERT_EQ(sh("run " + cfg.string() + " --replications 2 --out " + (dir_ / "o").string()).code, 0);
  const auto csv = slurp(dir_ / "o" / "cycles.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
}

TEST_F(Cli, SummaryJsonCanBeReplayed) {
  const auto cfg = write("r.conf", "nodes.normal = 8\nnodes.sybil = 2\ncycles = 3\nreplications = 2\n");
  ASSERT_EQ(sh("run " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(sh("run " + (dir_ / "a" / "summary.json").string() + " --out " + (dir_ / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(Cli, SweepWritesGrid) {
  const auto cfg = write("g.conf", "nodes.sybil = 2\ncycles = 2\nreplications = 2\nsweep.N = 5, 10\nsweep.C = 2, 4\n");
  const auto r = sh("sweep " + cfg.string() + " --out " + (dir_ / "g").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto grid = slurp(dir_ / "g" / "grid.csv");
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 5);
  EXPECT_EQ(grid.rfind("N,S,C,R,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "g" / "points" / "N10_S2_C4_R2" / "summary.json"));
}

TEST_F(Cli, LosingTooManyEdgesIsARuntimeError) {
  const auto cfg = write("f.conf",
                         "edges.count = 2\nresilience.substitutes = false\nfailure.scheduled = 0@0\ncycles = 3\n"
                         "replications = 1\nnodes.normal = 5\n");
  const auto r = sh("run " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 3) << r.out;
}
