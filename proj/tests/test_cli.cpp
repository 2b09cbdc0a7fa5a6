#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(QLDS_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t k;
  while ((k = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, k);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("qlds_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string o(const fs::path& sub = {}) const { return "--output-dir " + (sub.empty() ? dir : dir / sub).string(); }
  fs::path dir;
};

const std::string kGmm = "gmm --d 8 --mu-norm 3 --nl1 6 --nl2 6 --nu1 40 --nu2 40";

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("fit"), std::string::npos);
  EXPECT_NE(r.out.find("losslab"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("fit --select nope --input x.csv").code, 2);
}

TEST_F(Cli, GmmFitPredictRoundTrip) {
  ASSERT_EQ(run("--seed 4 " + o() + " " + kGmm).code, 0);
  const auto data = dir / "gmm.csv";
  ASSERT_TRUE(fs::exists(data));
  const auto fit = run(o("fit") + " fit --select th --grid-size 3 --input " + data.string());
  ASSERT_EQ(fit.code, 0) << fit.out;
  EXPECT_NE(fit.out.find("transductive_error="), std::string::npos);
  const auto pred = run(o("pred") + " predict --model " + (dir / "fit" / "model.json").string() + " --input " + data.string());
  ASSERT_EQ(pred.code, 0) << pred.out;
  const std::string a = slurp(dir / "fit" / "predictions.csv"), b = slurp(dir / "pred" / "predictions.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST_F(Cli, RerunIsByteIdentical) {
  ASSERT_EQ(run("--seed 5 " + o() + " " + kGmm).code, 0);
  const auto data = (dir / "gmm.csv").string();
  ASSERT_EQ(run(o("a") + " fit --select cv --folds 3 --grid-size 3 --input " + data).code, 0);
  ASSERT_EQ(run(o("b") + " --jobs 3 fit --select cv --folds 3 --grid-size 3 --input " + data).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "predictions.csv"), slurp(dir / "b" / "predictions.csv"));
  EXPECT_EQ(slurp(dir / "a" / "model.json"), slurp(dir / "b" / "model.json"));
}

TEST_F(Cli, TheorySelectionWritesPerPointTable) {
  ASSERT_EQ(run("--seed 6 " + o() + " " + kGmm).code, 0);
  ASSERT_EQ(run(o() + " fit --select th --grid-size 3 --input " + (dir / "gmm.csv").string()).code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "selection.json"));
  ASSERT_EQ(j["per_point"].size(), 9u);
  for (const auto& p : j["per_point"]) {
    EXPECT_TRUE(p.contains("alpha_l"));
    EXPECT_TRUE(p.contains("criterion"));
  }
  EXPECT_TRUE(j.contains("metadata"));
}

TEST_F(Cli, NumericalFailureExitsThree) {
  ASSERT_EQ(run("--seed 7 " + o() + " " + kGmm).code, 0);
  const auto r = run(o() + " fit --select fixed --alpha-l 0 --alpha-u 1 --lambda 1e-6 --input " + (dir / "gmm.csv").string());
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("NonConvex"), std::string::npos);
}

TEST_F(Cli, MissingFileExitsFour) {
  const auto r = run(o() + " fit --input " + (dir / "absent.csv").string());
  EXPECT_EQ(r.code, 4) << r.out;
}

TEST_F(Cli, MalformedCsvExitsTwo) {
  std::ofstream(dir / "bad.csv") << "x1,label,labeled\n1.0,1,1\nabc,-1,1\n";
  const auto r = run(o() + " fit --input " + (dir / "bad.csv").string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("line 3"), std::string::npos);
}

TEST_F(Cli, DiagFixedPointPrintsJson) {
  const auto r = run("diag-fixedpoint --cl1 0.05 --cl2 0.05 --cu1 0.45 --cu2 0.45 --c0 0.5 --alpha-l 1 --alpha-u 0.5 --lambda 2 "
                     "--g11 4 --g12 -4 --g22 4");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["fixed_point"].is_object());
  EXPECT_GT(j["stats"]["eps_star"].get<double>(), 0.0);
}
