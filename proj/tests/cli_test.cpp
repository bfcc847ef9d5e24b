//------------------------------------------------------------------------------
//
//   Copyright 2026 The lprobe Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "lprobe/model.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Result
{
  int         code;
  std::string output;
};

Result run(std::string const &args, std::string const &env = {})
{
  std::string const cmd = (env.empty() ? "" : env + " ") + std::string(LPROBE_CLI_PATH) + " " + args + " 2>&1";
  FILE             *pipe = popen(cmd.c_str(), "r");
  std::string       out;
  char              buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe))
  {
    out.append(buf, n);
  }
  int const status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(fs::path const &p)
{
  std::ifstream     in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    unsetenv("LPROBE_SEED");
    dir_ = fs::temp_directory_path() /
           ("lprobe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write(std::string const &name, std::string const &text)
  {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  std::string p(std::string const &name) const
  {
    return (dir_ / name).string();
  }

  /// Small suite so training runs take milliseconds.
  std::string small_config(std::string const &train = {}, std::string const &measure = {},
                           std::string const &tail = {})
  {
    return write("small.ini",
                 "[suite]\ninput_dim = 6\ntrain_count = 120\nval_count = 40\ntest_count = 40\n"
                 "eval_count = 40\nshifted_domains = 4\n[model]\nhidden_dims = 8\n[train]\nepochs = 3\n" +
                     train + "[measure]\nalpha_search_iters = 10\n" + measure + tail)
        .string();
  }

  fs::path dir_;
};

TEST_F(CliTest, DefaultsPrintsFullConfig)
{
  auto const r = run("defaults");
  EXPECT_EQ(r.code, 0);
  for (char const *s : {"[suite]", "[model]", "[train]", "[measure]", "[experiment]", "seeds = 8",
                        "epochs = 15", "batch_size = 32", "ascent_coeff = 0.05"})
  {
    EXPECT_NE(r.output.find(s), std::string::npos) << s;
  }
}

TEST_F(CliTest, GenDataDefaultSuite)
{
  write("d.ini", run("defaults").output);
  auto const r = run("gen-data -c " + p("d.ini") + " -o " + p("a"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("shifted domains: 14"), std::string::npos);
  std::size_t csvs = 0;
  for (auto const &e : fs::directory_iterator(dir_ / "a"))
  {
    csvs += e.path().extension() == ".csv" ? 1 : 0;
  }
  EXPECT_EQ(csvs, 3u + 14u);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "manifest.json"));

  ASSERT_EQ(run("gen-data -c " + p("d.ini") + " -o " + p("b")).code, 0);
  for (auto const &e : fs::directory_iterator(dir_ / "a"))
  {
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename())) << e.path();
  }
}

TEST_F(CliTest, ConfigErrorsExitTwo)
{
  write("m.ini", "[model]\nhidden_dims = 4\n");
  auto r = run("gen-data -c " + p("m.ini") + " -o " + p("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("[suite]"), std::string::npos) << r.output;

  write("k.ini", "[suite]\n\ninput_dims = 4\n");
  r = run("gen-data -c " + p("k.ini") + " -o " + p("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("input_dims"), std::string::npos) << r.output;

  EXPECT_EQ(run("gen-data -o " + p("x"), "LPROBE_SEED=abc").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, TrainFlagsAndSeeds)
{
  auto const cfg = small_config("sam_rho = 0.3\n");
  ASSERT_EQ(run("gen-data -c " + cfg + " -o " + p("suite")).code, 0);

  auto r = run("train -c " + cfg + " -s " + p("suite") + " -o " + p("sam") + " --objective sam");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("best epoch"), std::string::npos);
  auto const ck = lprobe::load_checkpoint(dir_ / "sam" / "checkpoint.lpk");
  EXPECT_EQ(ck.metadata.at("objective"), "sam");
  EXPECT_EQ(ck.metadata.at("train.sam_rho"), "0.29999999999999999");

  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("s7a") + " --seed 7").code, 0);
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("s7b") + " --seed 7").code, 0);
  EXPECT_EQ(slurp(dir_ / "s7a" / "checkpoint.lpk"), slurp(dir_ / "s7b" / "checkpoint.lpk"));
  EXPECT_EQ(slurp(dir_ / "s7a" / "history.csv"), slurp(dir_ / "s7b" / "history.csv"));

  // flag beats environment, environment beats file
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("env") + " --seed 7", "LPROBE_SEED=5").code, 0);
  EXPECT_EQ(slurp(dir_ / "env" / "checkpoint.lpk"), slurp(dir_ / "s7a" / "checkpoint.lpk"));
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("env5"), "LPROBE_SEED=5").code, 0);
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("s5") + " --seed 5").code, 0);
  EXPECT_EQ(slurp(dir_ / "env5" / "checkpoint.lpk"), slurp(dir_ / "s5" / "checkpoint.lpk"));
  EXPECT_NE(slurp(dir_ / "s5" / "checkpoint.lpk"), slurp(dir_ / "s7a" / "checkpoint.lpk"));

  r = run("train -c " + cfg + " -s " + p("suite") + " -o " + p("e15") + " --epochs 15 --batch-size 32");
  ASSERT_EQ(r.code, 0) << r.output;
  auto const history = slurp(dir_ / "e15" / "history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 16);
  EXPECT_EQ(lprobe::load_checkpoint(dir_ / "e15" / "checkpoint.lpk").metadata.at("train.batch_size"), "32");
}

TEST_F(CliTest, TrainDivergenceExitsThree)
{
  auto const cfg = small_config("learning_rate = 1e300\n");
  ASSERT_EQ(run("gen-data -c " + cfg + " -o " + p("suite")).code, 0);
  auto const r = run("train -c " + cfg + " -s " + p("suite") + " -o " + p("run"));
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST_F(CliTest, MeasureSweepAndDeterminism)
{
  auto const cfg = small_config();
  ASSERT_EQ(run("gen-data -c " + cfg + " -o " + p("suite")).code, 0);
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("run")).code, 0);
  auto const ck = p("run/checkpoint.lpk");

  auto r = run("measure -c " + cfg + " -m " + ck + " -s " + p("suite") + " -o " + p("a.csv") + " --sweep-noise");
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_EQ(run("measure -c " + cfg + " -m " + ck + " -s " + p("suite") + " -o " + p("b.csv") + " --sweep-noise").code, 0);
  auto const a = slurp(dir_ / "a.csv");
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
  auto const header = a.substr(0, a.find('\n'));
  for (char const *s : {"sigma_0.001", "sigma_0.005", "sigma_0.01", "sigma_0.02"})
  {
    EXPECT_NE(header.find(std::string("phi_difference_") + s), std::string::npos) << s;
  }
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);
}

TEST_F(CliTest, MeasureAlphaFailureKeepsRow)
{
  auto const cfg = small_config({}, "alpha_hi = 2e-6\n");
  ASSERT_EQ(run("gen-data -c " + cfg + " -o " + p("suite")).code, 0);
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("run")).code, 0);
  ASSERT_EQ(run("measure -c " + cfg + " -m " + p("run/checkpoint.lpk") + " -s " + p("suite") + " -o " + p("r.csv")).code, 0);
  auto const csv = slurp(dir_ / "r.csv");
  auto const row = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(row.find(",,true,"), std::string::npos) << row;
}

TEST_F(CliTest, MeasureMismatchExitsFour)
{
  auto const cfg = small_config();
  ASSERT_EQ(run("gen-data -c " + cfg + " -o " + p("suite")).code, 0);
  ASSERT_EQ(run("train -c " + cfg + " -s " + p("suite") + " -o " + p("run")).code, 0);
  write("other.ini", "[suite]\ninput_dim = 5\ntrain_count = 30\nval_count = 10\ntest_count = 10\neval_count = 10\nshifted_domains = 2\n");
  ASSERT_EQ(run("gen-data -c " + p("other.ini") + " -o " + p("other")).code, 0);
  auto r = run("measure -m " + p("run/checkpoint.lpk") + " -s " + p("other") + " -o " + p("x.csv"));
  EXPECT_EQ(r.code, 4) << r.output;
  write("junk.lpk", "not a checkpoint");
  r = run("measure -m " + p("junk.lpk") + " -s " + p("suite") + " -o " + p("x.csv"));
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(CliTest, ExperimentTableAndJobs)
{
  auto const cfg = small_config({}, {}, "[experiment]\nobjectives = baseline,sam,fisher\nseeds = 2\n");
  auto r = run("experiment -c " + cfg + " -o " + p("one") + " --jobs 1");
  ASSERT_EQ(r.code, 0) << r.output;
  std::size_t rows = 0;
  std::istringstream in(r.output);
  for (std::string line; std::getline(in, line);)
  {
    rows += line.rfind("objective:", 0) == 0 ? 1 : 0;
  }
  EXPECT_EQ(rows, 3u * 4u);
  ASSERT_EQ(run("experiment -c " + cfg + " -o " + p("two") + " --jobs 2").code, 0);
  for (char const *f : {"reports.csv", "correlations.csv", "stability.csv"})
  {
    EXPECT_EQ(slurp(dir_ / "one" / f), slurp(dir_ / "two" / f)) << f;
  }
  ASSERT_EQ(run("experiment -c " + cfg + " -o " + p("three") + " --seeds 3").code, 0);
  auto const reports = slurp(dir_ / "three" / "reports.csv");
  EXPECT_EQ(std::count(reports.begin(), reports.end(), '\n'), 1 + 3 * 3 * 4);
}

TEST_F(CliTest, ExperimentPartialFailureExitsFive)
{
  auto const cfg = small_config("learning_rate = 1e300\n", {}, "[experiment]\nobjectives = baseline\nseeds = 1\n");
  auto const r   = run("experiment -c " + cfg + " -o " + p("out"));
  EXPECT_EQ(r.code, 5) << r.output;
  EXPECT_NE(r.output.find("baseline-s1"), std::string::npos);
}

}  // namespace
