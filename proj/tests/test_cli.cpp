#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "test_util.hpp"

namespace cxrflag {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt";
  const std::string cmd = std::string(CXRFLAG_CLI) + " " + args + " > " + out.string() + " 2> " +
                          (scratch / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  return r;
}

// A small copy of the MedVersa corpus with its own config.
fs::path small_fixture(const testing::TempDir& dir, int studies) {
  std::ifstream in(testing::fixture_dir() / "medversa" / "dataset.jsonl");
  std::ofstream out(dir / "dataset.jsonl");
  std::string line;
  for (int i = 0; i < studies && std::getline(in, line); ++i) out << line << "\n";
  testing::write_file(dir / "config.json",
                      R"({"calibration_size": 40, "alpha": 0.2, "seed": 5})");
  return dir / "config.json";
}

TEST(Cli, HelpIsSuccess) {
  testing::TempDir dir("cli");
  const auto r = run_cli("--help", dir.path());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("run-all"), std::string::npos);
}

TEST(Cli, UnknownOptionIsConfigError) {
  testing::TempDir dir("cli");
  EXPECT_EQ(run_cli("run-all --bogus", dir.path()).code, 2);
}

TEST(Cli, MissingConfigIsConfigError) {
  testing::TempDir dir("cli");
  EXPECT_EQ(run_cli("entail -c " + (dir / "absent.json").string(), dir.path()).code, 2);
}

TEST(Cli, BadAlphaIsConfigError) {
  testing::TempDir dir("cli");
  const auto config = small_fixture(dir, 60);
  EXPECT_EQ(run_cli("calibrate --alpha 1.5 -c " + config.string(), dir.path()).code, 2);
}

TEST(Cli, CorruptDatasetIsDataError) {
  testing::TempDir dir("cli");
  const auto config = small_fixture(dir, 60);
  std::ofstream(dir / "dataset.jsonl", std::ios::app) << "{not json\n";
  EXPECT_EQ(run_cli("entail -c " + config.string(), dir.path()).code, 3);
}

TEST(Cli, OfflineWithEmptyCacheIsBackendError) {
  testing::TempDir dir("cli");
  const auto config = small_fixture(dir, 60);
  fs::create_directories(dir / "cache" / "judge");
  EXPECT_EQ(run_cli("entail --offline -c " + config.string(), dir.path()).code, 4);
}

TEST(Cli, CalibrationSetTooSmallForAlpha) {
  testing::TempDir dir("cli");
  const auto config = small_fixture(dir, 60);
  ASSERT_EQ(run_cli("entail -c " + config.string(), dir.path()).code, 0);
  const auto r = run_cli("calibrate --alpha 0.001 -c " + config.string(), dir.path());
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(testing::read_file(dir / "stderr.txt").find("too small"), std::string::npos);
}

TEST(Cli, RunAllOnFixture) {
  testing::TempDir dir("cli");
  const auto out = dir / "out";
  const auto r = run_cli("run-all --fixtures " + (testing::fixture_dir() / "medversa").string() +
                             " -o " + out.string() + " --cache-dir " + (dir / "cache").string(),
                         dir.path());
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("lambda1 = 6"), std::string::npos) << r.out;
  const auto again = run_cli("calibrate --alpha 0.05 --n 10 --fixtures " +
                                 (testing::fixture_dir() / "medversa").string() + " -o " +
                                 out.string(),
                             dir.path());
  EXPECT_EQ(again.code, 0);
  EXPECT_EQ(again.out, "lambda1 = 6\n");
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_TRUE(fs::exists(out / "config.resolved.json"));
}

}  // namespace
}  // namespace cxrflag
