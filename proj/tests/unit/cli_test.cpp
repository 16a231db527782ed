#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "obsmerge/io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OBSMERGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("obsmerge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void generate() {
    ASSERT_EQ(run_cli("generate --out " + dir_.string() + " --seed 3 --closed 3 --near 1 --distant 1 --samples 6"), 0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateRunPlotSucceed) {
  generate();
  EXPECT_TRUE(fs::exists(path("corpus.jsonl")));
  EXPECT_TRUE(fs::exists(path("gt.jsonl")));
  EXPECT_EQ(run_cli("run --corpus " + path("corpus.jsonl") + " --gt " + path("gt.jsonl") + " --out " +
                    dir_.string() + " --uncertainty entropy"),
            0);
  const std::string report = obsmerge::testing::read_text(path("report.csv"));
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 1 + 38 * 4);
  EXPECT_EQ(run_cli("plot --report " + path("report.csv") + " --spatial " + path("spatial.csv") + " --out " +
                    path("plots")),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "plots" / "scatter_all_entropy.svg"));
  EXPECT_EQ(run_cli("inspect --corpus " + path("corpus.jsonl") + " --method hungarian --affinity iou+sl"), 0);
}

TEST_F(Cli, MalformedCorpusExitsTwo) {
  obsmerge::write_text_file(path("bad.jsonl"), "{\"format\":\"something-else\"}\n");
  EXPECT_EQ(run_cli("run --corpus " + path("bad.jsonl") + " --out " + dir_.string()), 2);
}

TEST_F(Cli, BadFlagsExitTwo) {
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("run --corpus x --uncertainty loud"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST_F(Cli, PartialGridExitsThree) {
  generate();
  obsmerge::write_text_file(path("grid.json"),
                            R"({"cells":[{"method":"bsas","affinity":"iou","theta":0.9},)"
                            R"({"method":"bsas","affinity":"iou","theta":2.0}]})");
  EXPECT_EQ(run_cli("run --corpus " + path("corpus.jsonl") + " --gt " + path("gt.jsonl") + " --grid " +
                    path("grid.json") + " --out " + dir_.string()),
            3);
  const std::string report = obsmerge::testing::read_text(path("report.csv"));
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 1 + 4 * 2);
}

TEST_F(Cli, RunIsByteIdenticalAcrossJobCounts) {
  generate();
  const std::string base = "run --corpus " + path("corpus.jsonl") + " --gt " + path("gt.jsonl");
  ASSERT_EQ(run_cli(base + " --jobs 1 --out " + path("one")), 0);
  ASSERT_EQ(run_cli(base + " --jobs 8 --out " + path("eight")), 0);
  EXPECT_EQ(obsmerge::testing::read_text(path("one/report.csv")),
            obsmerge::testing::read_text(path("eight/report.csv")));
  EXPECT_EQ(obsmerge::testing::read_text(path("one/spatial.csv")),
            obsmerge::testing::read_text(path("eight/spatial.csv")));
}
