#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "common.hpp"
#include "trustrec/text_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

// Runs the CLI with `args`, capturing stdout and stderr together.
Run run_cli(const std::string& args, const fs::path& scratch) {
  const auto log = scratch / "cli.log";
  const std::string cmd = std::string(TRUSTREC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, trustrec::text::read_file(log.string())};
}

std::string config_path() { return (fs::path(TRUSTREC_TOY_DIR) / "config.txt").string(); }

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Cli, TrainEvaluateReport) {
  const auto dir = testing_util::temp_dir("cli_flow");
  const std::string common = "--config " + config_path() + " --work " + (dir / "work").string();
  auto r = run_cli(common + " prepare", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("stage prepare: computed"), std::string::npos);
  r = run_cli(common + " train", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("stage prepare: cached"), std::string::npos);
  EXPECT_NE(r.out.find("stage model: computed"), std::string::npos);
  r = run_cli(common + " evaluate", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("tag=model rmse=", 0), 0u) << r.out;
  r = run_cli(common + " evaluate --ablate", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(r.out), 5u) << r.out;
  for (const char* tag : {"a_mf_random", "b_mf_autoencoder", "c_plus_trust", "d_plus_leader", "e_full"}) {
    EXPECT_NE(r.out.find(std::string("tag=") + tag), std::string::npos);
  }
  r = run_cli(common + " evaluate --baseline mean", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("tag=mean rmse=", 0), 0u) << r.out;
  r = run_cli(common + " report", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("tag=mean"), std::string::npos);
}

TEST(Cli, SameSeedGivesIdenticalArtifacts) {
  const auto dir = testing_util::temp_dir("cli_determinism");
  for (const char* w : {"a", "b"}) {
    const std::string common = "--config " + config_path() + " --seed 5 --work " + (dir / w).string();
    ASSERT_EQ(run_cli(common + " train", dir).code, 0);
    ASSERT_EQ(run_cli(common + " evaluate", dir).code, 0);
  }
  for (const char* f : {"model/model.bin", "embed/embeddings.txt", "graph/communities.txt", "reports/evaluate.txt",
                        "reports/evaluate.json"}) {
    EXPECT_EQ(trustrec::text::read_file((dir / "a" / f).string()), trustrec::text::read_file((dir / "b" / f).string()))
        << f;
  }
}

TEST(Cli, SeedAfterSubcommandIsAccepted) {
  const auto dir = testing_util::temp_dir("cli_seed_position");
  const auto r = run_cli("prepare --config " + config_path() + " --work " + (dir / "w").string() + " --seed 3", dir);
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  const auto dir = testing_util::temp_dir("cli_usage");
  EXPECT_EQ(run_cli("", dir).code, 2);
  EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(run_cli("evaluate --baseline median", dir).code, 2);
  EXPECT_EQ(run_cli("train --seed notanumber", dir).code, 2);
  EXPECT_EQ(run_cli("--help", dir).code, 0);
}

TEST(Cli, InputErrorsExitWithTwo) {
  const auto dir = testing_util::temp_dir("cli_input");
  fs::copy_file(fs::path(TRUSTREC_TOY_DIR) / "ratings.csv", dir / "ratings.csv");
  testing_util::write_file(dir / "config.txt", "data.ratings = ratings.csv\ndata.trust = missing.csv\nwork = w\n");
  auto r = run_cli("--config " + (dir / "config.txt").string() + " train", dir);
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("missing.csv"), std::string::npos);

  r = run_cli("--config " + config_path() + " --work " + (dir / "empty").string() + " evaluate", dir);
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("checkpoint"), std::string::npos);

  EXPECT_EQ(run_cli("--config " + (dir / "nope.txt").string() + " train", dir).code, 2);
  testing_util::write_file(dir / "bad.txt", "model.k = 10\nmodel.k = 11\n");
  r = run_cli("--config " + (dir / "bad.txt").string() + " train", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find(":2:"), std::string::npos) << r.out;
}

TEST(Cli, DivergenceExitsWithThree) {
  const auto dir = testing_util::temp_dir("cli_numeric");
  for (const char* f : {"ratings.csv", "trust.csv"}) fs::copy_file(fs::path(TRUSTREC_TOY_DIR) / f, dir / f);
  testing_util::write_file(dir / "config.txt",
                           "data.ratings = ratings.csv\ndata.trust = trust.csv\nwork = w\n"
                           "model.learning_rate = 1e6\nmodel.patience = 0\n");
  const auto r = run_cli("--config " + (dir / "config.txt").string() + " train", dir);
  EXPECT_EQ(r.code, 3) << r.out;
}

TEST(Cli, LockedWorkDirectoryIsRefused) {
  const auto dir = testing_util::temp_dir("cli_lock");
  testing_util::write_file(dir / "w" / ".lock", "");
  const auto r = run_cli("--config " + config_path() + " --work " + (dir / "w").string() + " prepare", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("locked"), std::string::npos);
}
