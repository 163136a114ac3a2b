#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vecdenoise_cli/cli.hpp"

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vecdenoise_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return vecdenoise::cli::run(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, UnknownCommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({}), 1);
}

TEST_F(Cli, ConfigErrorReportsLine) {
  const auto cfg = dir_ / "bad.cfg";
  std::ofstream(cfg) << "input = x\n\nbogus line\n";
  EXPECT_EQ(run({"train", "--config", cfg.string()}), 1);
  EXPECT_NE(err_.str().find(":3"), std::string::npos) << err_.str();
}

TEST_F(Cli, UnknownOverrideIsUsageError) {
  EXPECT_EQ(run({"synth", "--no-such-key", "1"}), 1);
  EXPECT_EQ(run({"synth", "--epochs"}), 1);
}

TEST_F(Cli, OverridesInBothSpellings) {
  const auto out = dir_ / "out";
  EXPECT_EQ(run({"synth", "--out_dir", out.string(), "--synth-vocab=50", "--synth_dim", "6",
                 "--synth_rank=2", "--synth_pairs", "30", "--synth_questions", "5"}),
            0)
      << err_.str();
  std::ifstream in(out / "noisy.txt");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "50 6");
}

TEST_F(Cli, ConfigFileThenFlagsWin) {
  const auto cfg = dir_ / "run.cfg";
  std::ofstream(cfg) << "out_dir = " << (dir_ / "a").string() << "\nsynth_vocab = 40\nsynth_dim = 5\n"
                     << "synth_rank = 2\nsynth_pairs = 20\nsynth_questions = 4\n";
  EXPECT_EQ(run({"synth", "-c", cfg.string(), "--synth_dim", "7"}), 0) << err_.str();
  std::ifstream in(dir_ / "a" / "noisy.txt");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "40 7");
}

TEST_F(Cli, MissingInputIsDataError) {
  EXPECT_EQ(run({"train", "--out_dir", dir_.string(), "--input", (dir_ / "nope.txt").string()}), 2);
  EXPECT_NE(err_.str().find("nope.txt"), std::string::npos) << err_.str();
}

TEST_F(Cli, HelpSucceeds) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("train"), std::string::npos);
}

}  // namespace
