#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "drm/cli.hpp"
#include "drm/error.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using drm::testing::read_text;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = drm::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("drm_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("toy.libsvm", "1 1:1 2:0\n1 1:0.9 2:0.1\n2 1:0 2:1\n2 1:0.1 2:0.9\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, TrainReportsGroups) {
  const auto r = run({"train", path("toy.libsvm"), "--out", path("model"), "--alpha", "0.5", "--beta", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n=4 p=2 g=2 group_sizes=2,2"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "model" / "model.json"));
  EXPECT_TRUE(fs::exists(dir_ / "model" / "train.bin"));
}

TEST_F(CliTest, InvalidBetaIsAValidationError) {
  const auto r = run({"train", path("toy.libsvm"), "--out", path("model"), "--beta", "0"});
  EXPECT_EQ(r.code, 1);
  const auto j = nlohmann::json::parse(lines(r.err).at(0));
  EXPECT_EQ(j["error"]["kind"], "validation_error");
  EXPECT_FALSE(fs::exists(dir_ / "model" / "model.json"));
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  const auto r = run({"train", path("toy.libsvm")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(lines(r.err).at(0))["error"]["kind"], "usage_error");
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(CliTest, MissingInputIsAnIoError) {
  const auto r = run({"train", path("absent.libsvm"), "--out", path("model")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(lines(r.err).at(0))["error"]["kind"], "io_error");
}

TEST_F(CliTest, PredictOnTrainingDataIsSelfConsistent) {
  ASSERT_EQ(run({"train", path("toy.libsvm"), "--out", path("model"), "--kernel", "rbf", "--gamma", "1", "--alpha",
                 "0.1", "--beta", "0.01"})
                .code,
            0);
  const auto r = run({"predict", "--model", path("model"), path("toy.libsvm")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "index,label,delta_1,delta_2,iterations");
  EXPECT_EQ(rows[1].substr(0, 4), "0,1,");
  EXPECT_EQ(rows[2].substr(0, 4), "1,1,");
  EXPECT_EQ(rows[3].substr(0, 4), "2,2,");
  EXPECT_EQ(rows[4].substr(0, 4), "3,2,");

  const auto e = run({"evaluate", "--model", path("model"), path("toy.libsvm"), "--metric", "gmean"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("accuracy=1\n"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("gmean=1\n"), std::string::npos) << e.out;
}

TEST_F(CliTest, IterativeSolverAgreesWithClosedForm) {
  ASSERT_EQ(run({"train", path("toy.libsvm"), "--out", path("model"), "--alpha", "0.2", "--beta", "0.1"}).code, 0);
  write("test.libsvm", "1 1:0.7 2:0.2\n2 1:0.3 2:0.6\n1 1:2\n2 2:-1\n");
  const auto closed = run({"predict", "--model", path("model"), path("test.libsvm")});
  const auto ppa = run({"predict", "--model", path("model"), path("test.libsvm"), "--solver", "ppa", "--eps", "1e-12",
                        "--max-iter", "100000"});
  ASSERT_EQ(closed.code, 0) << closed.err;
  ASSERT_EQ(ppa.code, 0) << ppa.err;
  const auto a = lines(closed.out), b = lines(ppa.out);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i].substr(0, 3), b[i].substr(0, 3));
}

TEST_F(CliTest, EmptyTestFileGivesHeaderOnly) {
  ASSERT_EQ(run({"train", path("toy.libsvm"), "--out", path("model")}).code, 0);
  write("empty.libsvm", "");
  const auto r = run({"predict", "--model", path("model"), path("empty.libsvm"), "--out", path("pred.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(path("pred.csv")), "index,label,delta_1,delta_2,iterations\n");
}

TEST_F(CliTest, CsvInputAndMaxIterWarning) {
  write("toy.csv", "label,a,b\n1,1,0\n1,0.9,0.1\n2,0,1\n2,0.1,0.9\n");
  const auto t = run({"train", path("toy.csv"), "--has-header", "--out", path("model"), "--solver", "gd", "--max-iter",
                      "1", "--eps", "1e-15", "--alpha", "1"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto r = run({"predict", "--model", path("model"), path("toy.csv"), "--has-header"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto warn = nlohmann::json::parse(lines(r.err).at(0));
  EXPECT_EQ(warn["warning"]["kind"], "max_iter");
  EXPECT_EQ(warn["warning"]["examples"], 4);
}

TEST_F(CliTest, CvWritesOneRowPerCell) {
  write("grid.txt", "kernels=rbf:1\nalphas=0.1\nbetas=0.01\n");
  const auto r = run({"cv", path("toy.libsvm"), "--grid-file", path("grid.txt"), "--out", path("cv.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(read_text(path("cv.csv")));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "kernel,kernel_param,alpha,beta,scaled,mean_metric,std_metric");
  EXPECT_NE(r.out.find("cells=1 flagged=0 examples=4"), std::string::npos) << r.out;

  const auto multi = run({"cv", path("toy.libsvm"), "--kernels", "linear,poly:2", "--alphas", "0,1", "--betas", "1",
                          "--scaling", "both", "--out", path("cv2.csv")});
  ASSERT_EQ(multi.code, 0) << multi.err;
  EXPECT_EQ(lines(read_text(path("cv2.csv"))).size(), 1u + 2 * 2 * 1 * 2);
}

TEST_F(CliTest, LeaveOneOutIgnoresSeed) {
  std::vector<std::string> base{"cv", path("toy.libsvm"), "--kernels", "linear,rbf:0.5", "--alphas", "0,0.1",
                                "--betas", "0.1,1", "--split", "loo"};
  auto a = base, b = base;
  a.insert(a.end(), {"--seed", "1", "--out", path("a.csv")});
  b.insert(b.end(), {"--seed", "99", "--out", path("b.csv")});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(read_text(path("a.csv")), read_text(path("b.csv")));
}

TEST_F(CliTest, BenchWritesTracesAndSummary) {
  std::ostringstream data;
  drm::testing::Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2 ? 1 : -1;
    data << label << " 1:" << label + drm::testing::uniform(rng, -1, 1) << " 2:" << drm::testing::uniform(rng, -1, 1)
         << "\n";
  }
  write("bench.libsvm", data.str());
  const auto r = run({"bench", path("bench.libsvm"), "--solvers", "gd,ppa", "--sizes", "20", "--repeats", "3",
                      "--out", path("bench"), "--kernel", "rbf", "--alpha", "0.5", "--beta", "0.1", "--eps", "1e-12",
                      "--max-iter", "100000"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* s : {"gd", "ppa"})
    for (int rep = 0; rep < 3; ++rep)
      EXPECT_TRUE(fs::exists(dir_ / "bench" / ("trace_" + std::string(s) + "_n20_r" + std::to_string(rep) + ".csv")));
  const auto rows = lines(read_text(path("bench/summary.csv")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "solver,n,repeats,median_ns_per_iteration,median_iterations,final_objective,termination");
  auto objective_of = [](const std::string& row) {
    std::vector<std::string> cols;
    std::stringstream ss(row);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    return std::stod(cols.at(5));
  };
  EXPECT_NEAR(objective_of(rows[1]), objective_of(rows[2]), 1e-6);

  const auto too_big = run({"bench", path("bench.libsvm"), "--sizes", "500", "--out", path("bench2")});
  EXPECT_EQ(too_big.code, 1);
  EXPECT_EQ(nlohmann::json::parse(lines(too_big.err).at(0))["error"]["kind"], "validation_error");
}

TEST_F(CliTest, ConfigFileSuppliesDefaults) {
  write("train.cfg", "# defaults\nkernel = rbf\ngamma=2\nbeta=0\nscale=true\n");
  const auto bad = run({"train", path("toy.libsvm"), "--out", path("model"), "--config", path("train.cfg")});
  EXPECT_EQ(bad.code, 1);  // beta=0 from the file
  const auto ok =
      run({"train", path("toy.libsvm"), "--out", path("model"), "--config=" + path("train.cfg"), "--beta", "0.5"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto manifest = nlohmann::json::parse(read_text(path("model/model.json")));
  EXPECT_EQ(manifest["kernel"]["family"], "rbf");
  EXPECT_EQ(manifest["kernel"]["gamma"], 2.0);
  EXPECT_EQ(manifest["beta"], 0.5);
  EXPECT_FALSE(manifest["scaling"].is_null());
}

TEST(CliConfig, ExpandsKeyValueLines) {
  const std::string file = (fs::temp_directory_path() / ("drm_cfg_" + std::to_string(::getpid()))).string();
  std::ofstream(file) << "alpha=1\n\n# note\nscale=false\nverbose=true\n";
  const auto args = drm::cli::expand_config({"train", "x", "--config", file, "--alpha", "2"});
  EXPECT_EQ(args, (std::vector<std::string>{"train", "x", "--alpha", "2", "--verbose"}));
  std::ofstream(file) << "no equals sign\n";
  EXPECT_THROW(drm::cli::expand_config({"--config", file}), drm::ParseError);
  fs::remove(file);
}

TEST(CliErrors, JsonShape) {
  const auto j = nlohmann::json::parse(drm::cli::error_json("parse_error", "bad \"x\"", 3));
  EXPECT_EQ(j["error"]["kind"], "parse_error");
  EXPECT_EQ(j["error"]["message"], "bad \"x\"");
  EXPECT_EQ(j["error"]["example"], 3);
  EXPECT_FALSE(nlohmann::json::parse(drm::cli::error_json("x", "y"))["error"].contains("example"));
}
