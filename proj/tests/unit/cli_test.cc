#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "attnie/standoff.h"
#include "test_util.h"

namespace attnie {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli.log";
  const std::string cmd = "'" + testing::cli_path() + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_file(log);
  return r;
}

const char* kTinyTrain =
    " --epochs 2 --batch-size 4 --ensemble-train 2 --ensemble-keep 1 --filters 4 --heads 2"
    " --widths 1,3 --word-dim 6 --role-dim 4 --distance-dim 3 --jobs 1";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = testing::scratch_dir("cli"); }
  std::string p(const std::string& name) const { return "'" + (dir / name).string() + "'"; }
  fs::path dir;
};

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(cli("", dir).code, 1);
  EXPECT_EQ(cli("bogus", dir).code, 1);
  EXPECT_EQ(cli("train --out x", dir).code, 1);
  EXPECT_EQ(cli("--help", dir).code, 0);
  const CliRun v = cli("--version", dir);
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.output.find("attnie"), std::string::npos);
}

TEST_F(Cli, MissingSchemaNamesPath) {
  ASSERT_EQ(cli("synth --out " + p("corpus") + " --documents 4", dir).code, 0);
  const CliRun r = cli("train --corpus " + p("corpus") + " --schema " + p("nope.json") +
                        " --out " + p("run") + kTinyTrain,
                    dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("nope.json"), std::string::npos) << r.output;
}

TEST_F(Cli, SynthTrainPredictEval) {
  ASSERT_EQ(cli("synth --out " + p("corpus") + " --documents 6 --seed 4", dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "corpus" / "schema.json"));
  const CliRun t = cli("train --corpus " + p("corpus") + " --out " + p("run") + " --seed 7" +
                        kTinyTrain,
                    dir);
  ASSERT_EQ(t.code, 0) << t.output;
  EXPECT_TRUE(fs::exists(dir / "run" / "edges" / "member0.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "edges" / "member0.history.csv"));
  EXPECT_TRUE(fs::exists(dir / "run" / "run.ini"));

  const CliRun again = cli("train --corpus " + p("corpus") + " --out " + p("run2") + " --seed 7" +
                            kTinyTrain,
                        dir);
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(read_file(dir / "run" / "edges" / "member0.history.csv"),
            read_file(dir / "run2" / "edges" / "member0.history.csv"));
  EXPECT_EQ(read_file(dir / "run" / "edges" / "member0.ckpt"),
            read_file(dir / "run2" / "edges" / "member0.ckpt"));

  const CliRun pr = cli("predict --model " + p("run") + " --corpus " + p("corpus") + " --out " +
                         p("pred"),
                     dir);
  ASSERT_EQ(pr.code, 0) << pr.output;
  for (int i = 0; i < 6; ++i) {
    EXPECT_TRUE(fs::exists(dir / "pred" / ("synth-" + std::to_string(i) + ".a2"))) << i;
  }
  EXPECT_TRUE(fs::exists(dir / "pred" / "relations.tsv"));

  const CliRun self = cli("eval --gold " + p("corpus") + " --pred " + p("corpus") + " --out " +
                           p("scores") + " --min-f 1",
                       dir);
  EXPECT_EQ(self.code, 0) << self.output;
  EXPECT_TRUE(fs::exists(dir / "scores" / "scores.csv"));
  EXPECT_TRUE(fs::exists(dir / "scores" / "distance.csv"));

  fs::create_directories(dir / "empty");
  const CliRun gate =
      cli("eval --gold " + p("corpus") + " --pred " + p("empty") + " --min-f 0.5", dir);
  EXPECT_EQ(gate.code, 3) << gate.output;

  const CliRun attn = cli("attn-export --model " + p("run") + " --corpus " + p("corpus") +
                           " --out " + p("attn"),
                       dir);
  EXPECT_EQ(attn.code, 0) << attn.output;
  bool csv = false;
  for (const auto& e : fs::directory_iterator(dir / "attn")) csv |= e.path().extension() == ".csv";
  EXPECT_TRUE(csv);
}

TEST_F(Cli, EvalSingleFile) {
  const fs::path events = testing::fixtures() / "events";
  const CliRun r = cli("eval --gold '" + (events / "ev-001.a2").string() + "' --pred '" +
                        (events / "ev-001.a2").string() + "' --schema '" +
                        (events / "schema.json").string() + "'",
                    dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("1.0000"), std::string::npos) << r.output;
}

TEST_F(Cli, PredictEmptyDocumentAndCorruptCheckpoint) {
  ASSERT_EQ(cli("synth --out " + p("corpus") + " --documents 4", dir).code, 0);
  ASSERT_EQ(cli("train --corpus " + p("corpus") + " --out " + p("run") + kTinyTrain, dir).code,
            0);
  fs::create_directories(dir / "blank");
  write_file(dir / "blank" / "empty.txt", "");
  const CliRun blank = cli("predict --model " + p("run") + " --corpus " + p("blank") + " --out " +
                            p("blank-out"),
                        dir);
  ASSERT_EQ(blank.code, 0) << blank.output;
  EXPECT_EQ(read_file(dir / "blank-out" / "empty.a2"), "");

  const fs::path ckpt = dir / "run" / "edges" / "member0.ckpt";
  const std::string bytes = read_file(ckpt);
  write_file(ckpt, bytes.substr(0, bytes.size() / 3));
  const CliRun bad = cli("predict --model " + p("run") + " --corpus " + p("corpus") + " --out " +
                          p("pred"),
                      dir);
  EXPECT_EQ(bad.code, 2) << bad.output;
}

TEST_F(Cli, ConfigFileFlagsWin) {
  ASSERT_EQ(cli("synth --out " + p("corpus") + " --documents 4", dir).code, 0);
  std::ofstream(dir / "run.cfg") << "[train]\nepochs=1\nseed=5\n";
  ASSERT_EQ(cli("--config " + p("run.cfg") + " train --corpus " + p("corpus") + " --out " +
                    p("run") + kTinyTrain + " --seed 6",
                dir)
                .code,
            0);
  const std::string ini = read_file(dir / "run" / "run.ini");
  EXPECT_NE(ini.find("seed=6"), std::string::npos) << ini;
}

TEST_F(Cli, GradcheckPasses) {
  const CliRun r = cli("gradcheck --trials 5 --out " + p("gc"), dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "gc" / "gradcheck.csv"));
  EXPECT_EQ(cli("gradcheck --trials 5 --tolerance 1e-30", dir).code, 3);
}

TEST_F(Cli, SynthSuite) {
  ASSERT_EQ(cli("synth --spec suite --out " + p("suite") + " --documents 2", dir).code, 0);
  for (const char* d : {"distance-02", "distance-08", "distance-16", "distance-32"}) {
    EXPECT_TRUE(fs::exists(dir / "suite" / d / "schema.json")) << d;
  }
}

}  // namespace
}  // namespace attnie
