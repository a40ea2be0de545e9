/*
 * Copyright 2026 The imrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "imrec/cli.h"
#include "imrec/model.h"
#include "test_util.h"

namespace imrec {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("imrec_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    write("toy.tsv", "0\t0\n0\t1\n1\t1\n");
    persist(testing::m_toy_model(), path("mtoy.bin"));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }
  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }
  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, TrainIalsHappyPath) {
  ASSERT_EQ(run({"train", "--data", path("toy.tsv"), "--solver", "ials",
                 "--dims", "2", "--epochs", "5", "--alpha0", "0.1", "--lambda",
                 "0.1", "--seed", "1", "--model-out", path("m.bin")}),
            0)
      << err_.str();
  const FactorModel m = restore(path("m.bin"));
  EXPECT_EQ(m.num_contexts(), 2);
  EXPECT_EQ(m.dims(), 2);
  std::istringstream lines(out_.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 2) << line;
    EXPECT_EQ(line.substr(0, line.find('\t')), std::to_string(count));
  }
  EXPECT_EQ(count, 5);
}

TEST_F(CliTest, MissingDataNamesPath) {
  EXPECT_EQ(run({"train", "--data", path("nope.tsv"), "--model-out",
                 path("m.bin")}),
            kExitData);
  EXPECT_NE(err_.str().find(path("nope.tsv")), std::string::npos);
}

TEST_F(CliTest, EverySolverIsReproducible) {
  write("data.tsv", [] {
    std::string s;
    for (int c = 0; c < 12; ++c) {
      for (int k = 0; k < 4; ++k) {
        s += std::to_string(c) + "\t" + std::to_string((c * 3 + k * 5) % 20) + "\n";
      }
    }
    return s;
  }());
  for (const std::string solver : {"sgd-pointwise", "sgd-pairwise", "sgd-ssm",
                                   "ials", "ials-pairwise", "sgd-gramian"}) {
    std::vector<std::string> args{"train",    "--data",   path("data.tsv"),
                                  "--solver", solver,     "--dims",
                                  "3",        "--epochs", "3",
                                  "--gramian-eta", "0.5"};
    auto a = args, b = args;
    a.insert(a.end(), {"--model-out", path("a.bin")});
    b.insert(b.end(), {"--model-out", path("b.bin")});
    ASSERT_EQ(run(a), 0) << solver << ": " << err_.str();
    ASSERT_EQ(run(b), 0) << solver << ": " << err_.str();
    EXPECT_EQ(read("a.bin"), read("b.bin")) << solver;
  }
}

TEST_F(CliTest, RecommendExamples) {
  ASSERT_EQ(run({"recommend", "--model", path("mtoy.bin"), "--context", "0",
                 "--n", "2"}),
            0);
  EXPECT_EQ(out_.str(), "1\t0\t1\n2\t2\t1\n");
  ASSERT_EQ(run({"recommend", "--model", path("mtoy.bin"), "--context", "0",
                 "--exclude-seen", "--data", path("toy.tsv")}),
            0);
  EXPECT_EQ(out_.str(), "1\t2\t1\n");
  ASSERT_EQ(run({"recommend", "--model", path("mtoy.bin"), "--context", "1",
                 "--n", "10"}),
            0);
  EXPECT_EQ(out_.str(), "1\t1\t1\n2\t2\t1\n3\t0\t0\n");
  EXPECT_EQ(run({"recommend", "--model", path("mtoy.bin"), "--context", "9"}),
            kExitData);
  ASSERT_EQ(run({"recommend", "--model", path("mtoy.bin"), "--history", "0",
                 "--alpha0", "0", "--lambda", "1e-9", "--exclude-seen"}),
            0);
  EXPECT_EQ(out_.str().substr(0, 2), "1\t");
  EXPECT_EQ(out_.str().find("\t0\t"), std::string::npos);
}

TEST_F(CliTest, Evaluate) {
  ASSERT_EQ(run({"evaluate", "--model", path("mtoy.bin"), "--test",
                 path("toy.tsv"), "--metrics", "recall", "--n", "3"}),
            0)
      << err_.str();
  EXPECT_EQ(out_.str(), "recall@3\t1\n");
  EXPECT_EQ(run({"evaluate", "--model", path("mtoy.bin"), "--data",
                 path("toy.tsv"), "--metrics", "mrr"}),
            kExitData);
  ASSERT_EQ(run({"evaluate", "--model", path("mtoy.bin"), "--data",
                 path("toy.tsv"), "--format", "csv", "--metrics", "auc"}),
            0)
      << err_.str();
  EXPECT_EQ(out_.str().substr(0, 13), "metric,value\n");
}

TEST_F(CliTest, ConfigFileAndPrecedence) {
  write("run.cfg", "# comment\nsolver = ials\ndims=3\nepochs=2\nlambda=0.1\n");
  ASSERT_EQ(run({"train", "--config", path("run.cfg"), "--data", path("toy.tsv"),
                 "--dims", "2", "--model-out", path("m.bin")}),
            0)
      << err_.str();
  EXPECT_EQ(restore(path("m.bin")).dims(), 2);
  const std::string progress = out_.str();
  EXPECT_EQ(std::count(progress.begin(), progress.end(), '\n'), 2);
  write("bad.cfg", "bogus=1\n");
  EXPECT_EQ(run({"train", "--config", path("bad.cfg"), "--data", path("toy.tsv"),
                 "--model-out", path("m.bin")}),
            kExitUsage);
}

TEST_F(CliTest, DefaultsRunOnToy) {
  ASSERT_EQ(run({"train", "--data", path("toy.tsv"), "--model-out", path("d.bin")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"evaluate", "--model", path("d.bin"), "--data", path("toy.tsv")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"recommend", "--model", path("d.bin")}), 0) << err_.str();
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"serve"}), kExitUsage);
  EXPECT_EQ(run({"train", "--data", path("toy.tsv")}), kExitUsage);
  EXPECT_EQ(run({"train", "--data", path("toy.tsv"), "--model-out",
                 path("m.bin"), "--solver", "adam"}),
            kExitUsage);
  EXPECT_EQ(run({"train", "--help"}), 0);
  EXPECT_NE(out_.str().find("--alpha0"), std::string::npos);
  EXPECT_NE(out_.str().find("0.1"), std::string::npos);
}

TEST_F(CliTest, NumericErrorExitCode) {
  // A huge step size diverges.
  write("data.tsv", "0\t0\n0\t1\n1\t1\n1\t2\n2\t0\n");
  EXPECT_EQ(run({"train", "--data", path("data.tsv"), "--solver",
                 "sgd-pointwise", "--loss", "square", "--eta", "1e6",
                 "--epochs", "50", "--init-sigma", "1", "--model-out",
                 path("m.bin")}),
            kExitNumeric)
      << err_.str();
}

}  // namespace
}  // namespace imrec
