#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "hmest/bivariate.hpp"
#include "hmest/cli.hpp"

namespace hmest::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hmest_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& content) {
    const auto p = (dir_ / name).string();
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

  Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hmest");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
  }

  fs::path dir_;
};

const char* kBivariateCsv =
    "pre,post\n"
    "1.0,2.0\n"
    "2.0,2.5\n"
    "3.0,5.0\n"
    "0.5,1.0\n"
    "2.5,NA\n"
    "1.5,NA\n"
    "NA,3.0\n"
    "NA,4.5\n"
    "NA,NA\n";

TEST_F(Cli, EstimateCompleteDataMatchesSampleMoments) {
  const auto in = file("d.csv", "a,b\n1,2\n2,4\n3,9\n");
  const auto r = run_cli({"estimate", "--input", in});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["theta"][0].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(j["theta"][1].get<double>(), 5.0);
  // sample covariance / J: var(a)=1, cov(a,b)=3.5, var(b)=13
  EXPECT_DOUBLE_EQ(j["covariance"][0][0].get<double>(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(j["covariance"][0][1].get<double>(), 3.5 / 3.0);
  EXPECT_DOUBLE_EQ(j["covariance"][1][1].get<double>(), 13.0 / 3.0);
  EXPECT_EQ(j["outcome"], "no correction possible");
}

TEST_F(Cli, EstimateKnownModeMatchesClosedForm) {
  const auto in = file("d.csv", kBivariateCsv);
  const auto cfg = file("c.json", R"({"mode": "known", "known_covariance": [[1.0, 0.6], [0.6, 2.0]]})");
  const auto r = run_cli({"estimate", "--input", in, "--config", cfg});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const BivariateMeans<double> m{(1 + 2 + 3 + 0.5) / 4, (2 + 2.5 + 5 + 1) / 4, 2.0, 3.75};
  const BivariateConfig<double> c{1.0, 2.0, 0.6, 4, 2, 2};
  const auto oracle = mean_vector(m, c);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(j["theta"][i].get<double>(), oracle.mu(i), 1e-12);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(j["covariance"][i][k].get<double>(), oracle.cov(i, k), 1e-12);
  }
  EXPECT_EQ(j["dropped"], 1);
}

TEST_F(Cli, EstimateCountsDroppedRow) {
  const auto in = file("d.csv", kBivariateCsv);
  const auto r = run_cli({"estimate", "--input", in, "--format", "table"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("Pattern counts"), std::string::npos);
  EXPECT_NE(r.out.find("dropped"), std::string::npos);
}

TEST_F(Cli, EstimateCsvIsRowMajorWithIndexedHeaders) {
  const auto in = file("d.csv", "a,b\n1,2\n2,4\n3,9\n");
  const auto r = run_cli({"estimate", "--input", in, "--format", "csv"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto header = r.out.substr(0, r.out.find('\n'));
  EXPECT_EQ(header, "theta[0],theta[1],cov[0][0],cov[0][1],cov[1][0],cov[1][1],J[11],dropped");
}

TEST_F(Cli, JsonIsStableAndRoundTrips) {
  const auto in = file("d.csv", kBivariateCsv);
  const auto a = run_cli({"estimate", "--input", in});
  const auto b = run_cli({"estimate", "--input", in});
  ASSERT_EQ(a.code, kOk);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(nlohmann::json::parse(a.out).dump(2) + "\n", a.out);
}

TEST_F(Cli, MalformedInputExitsTwoWithLocation) {
  const auto in = file("d.csv", "a,b\n1,2\n3,x\n");
  const auto r = run_cli({"estimate", "--input", in});
  EXPECT_EQ(r.code, kBadInput);
  EXPECT_NE(r.err.find("line 3, column 2"), std::string::npos) << r.err;
  const auto ragged = file("r.csv", "a,b\n1,2\n3\n");
  EXPECT_EQ(run_cli({"estimate", "--input", ragged}).code, kBadInput);
}

TEST_F(Cli, NoCompleteCasesExitsThree) {
  const auto in = file("d.csv", "a,b\n1,NA\nNA,2\n");
  const auto r = run_cli({"estimate", "--input", in});
  EXPECT_EQ(r.code, kNoEstimate);
  EXPECT_NE(r.err.find("no complete cases"), std::string::npos);
}

TEST_F(Cli, MissingTokenFlag) {
  const auto in = file("d.csv", "a,b\n1,2\n2,-\n3,4\n");
  EXPECT_EQ(run_cli({"estimate", "--input", in}).code, kBadInput);
  EXPECT_EQ(run_cli({"estimate", "--input", in, "--missing-token", "-"}).code, kOk);
}

TEST_F(Cli, UnwritableOutputExitsFour) {
  const auto in = file("d.csv", "a\n1\n2\n");
  const auto r = run_cli({"estimate", "--input", in, "--output", (dir_ / "no" / "such" / "out.json").string()});
  EXPECT_EQ(r.code, kUnwritableOutput);
}

TEST_F(Cli, OutputFileReceivesReport) {
  const auto in = file("d.csv", "a\n1\n2\n");
  const auto out = (dir_ / "out.json").string();
  const auto r = run_cli({"estimate", "--input", in, "--output", out});
  ASSERT_EQ(r.code, kOk);
  std::ifstream f(out);
  const auto j = nlohmann::json::parse(f);
  EXPECT_DOUBLE_EQ(j["theta"][0].get<double>(), 1.5);
}

TEST_F(Cli, KmWithOracle) {
  const auto in = file("s.csv", "time,event\n1,1\n2,0\n3,1\n");
  const auto r = run_cli({"km", "--input", in, "--oracle"});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LE(j["oracle"]["max_deviation"].get<double>(), 1e-12);
  ASSERT_EQ(j["steps"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["steps"][0]["survival"].get<double>(), 2.0 / 3.0);
}

TEST_F(Cli, KmAllEventsIsEmpirical) {
  const auto in = file("s.csv", "time,event\n1,1\n2,1\n3,1\n4,1\n");
  const auto j = nlohmann::json::parse(run_cli({"km", "--input", in}).out);
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(j["steps"][s]["cdf"].get<double>(), (s + 1) / 4.0, 1e-15);
}

TEST_F(Cli, KmAllCensoredExitsThree) {
  const auto in = file("s.csv", "time,event\n1,0\n2,0\n");
  EXPECT_EQ(run_cli({"km", "--input", in}).code, kNoEstimate);
  const auto bad = file("b.csv", "time,event\n1,1\n2,7\n");
  EXPECT_EQ(run_cli({"km", "--input", bad}).code, kBadInput);
}

TEST_F(Cli, BivariateFromConfig) {
  const auto cfg = file("b.json", R"({"means": {"x111": 0, "x112": 0, "x211": 2, "x222": 4},
      "sizes": {"J11": 10, "J21": 10, "J22": 10}, "sigma": [[1, 0], [0, 1]]})");
  const auto r = run_cli({"bivariate", "--config", cfg});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["mu"][0].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["mu"][1].get<double>(), 2.0);
}

TEST_F(Cli, BivariateVariants) {
  const auto cfg = file("b.json", R"({"means": {"x111": 1, "x112": 0.5, "x211": 0.8, "x222": 0.1},
      "sizes": {"J11": 50, "J21": 50, "J22": 20}, "sigma": [[1, 0.5], [0.5, 1]], "sd": 1, "rho": 0.5})");
  const auto cs = nlohmann::json::parse(run_cli({"bivariate", "--config", cfg, "--variant", "change-score"}).out);
  EXPECT_NEAR(cs["gain"].get<double>(), 0.25, 1e-15);
  EXPECT_NEAR(cs["variance"].get<double>(), 0.0175, 1e-15);
  const auto sym =
      nlohmann::json::parse(run_cli({"bivariate", "--config", cfg, "--variant", "compound-symmetry"}).out);
  EXPECT_EQ(sym["delta"], cs["delta"]);
  const auto shift = run_cli({"bivariate", "--config", cfg, "--variant", "shift", "--format", "csv"});
  ASSERT_EQ(shift.code, kOk);
  EXPECT_EQ(shift.out.substr(0, shift.out.find('\n')), "delta,variance,gain");
  EXPECT_EQ(run_cli({"bivariate", "--config", cfg, "--variant", "median"}).code, kBadInput);
}

TEST_F(Cli, BivariateFromCsvUsesPlugInCovariance) {
  const auto in = file("d.csv", kBivariateCsv);
  const auto r = run_cli({"bivariate", "--input", in, "--format", "table"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("Pattern counts"), std::string::npos);
}

const char* kStudy = R"({
  "population": {"mean": [0, 0], "covariance": [[1, 0.5], [0.5, 1]]},
  "mechanism": {"type": "mcar", "patterns": [{"pattern": [1, 1], "probability": 0.5},
                                             {"pattern": [1, 0], "probability": 0.5}]},
  "n": 40, "replicates": 300, "estimators": ["complete_case", "hierarchical_known", "closed_form"],
  "tolerances": {"variance_rel": 0.5}})";

TEST_F(Cli, SimulateRequiresSeed) {
  const auto cfg = file("s.json", kStudy);
  EXPECT_EQ(run_cli({"simulate", "--config", cfg}).code, kBadInput);
}

TEST_F(Cli, SimulateIsReproducible) {
  const auto cfg = file("s.json", kStudy);
  const auto a = run_cli({"simulate", "--config", cfg, "--seed", "42"});
  const auto b = run_cli({"simulate", "--config", cfg, "--seed", "42"});
  ASSERT_EQ(a.code, kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["estimators"].size(), 3u);
}

TEST_F(Cli, SimulateWritesJsonAndPrintsTable) {
  const auto cfg = file("s.json", kStudy);
  const auto out = (dir_ / "r.json").string();
  const auto r = run_cli({"simulate", "--config", cfg, "--seed", "1", "--output", out});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("Pattern counts"), std::string::npos);
  std::ifstream f(out);
  EXPECT_NO_THROW(nlohmann::json::parse(f));
}

TEST_F(Cli, ValidateExitCodes) {
  const auto cfg = file("s.json", kStudy);
  EXPECT_EQ(run_cli({"validate", "--config", cfg, "--seed", "5"}).code, kOk);
  auto strict = nlohmann::json::parse(kStudy);
  strict["tolerances"]["variance_rel"] = 0.0;
  const auto cfg2 = file("t.json", strict.dump());
  EXPECT_EQ(run_cli({"validate", "--config", cfg2, "--seed", "5"}).code, kValidationFailed);
}

TEST_F(Cli, InvalidStudyExitsTwo) {
  auto bad = nlohmann::json::parse(kStudy);
  bad["population"]["covariance"] = {{1, 2}, {2, 1}};
  const auto cfg = file("s.json", bad.dump());
  EXPECT_EQ(run_cli({"simulate", "--config", cfg, "--seed", "1"}).code, kBadInput);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, kBadInput);
  EXPECT_EQ(run_cli({"estimate"}).code, kBadInput);
  EXPECT_EQ(run_cli({"estimate", "--input", (dir_ / "missing.csv").string()}).code, kBadInput);
  EXPECT_EQ(run_cli({"--help"}).code, kOk);
}

}  // namespace
}  // namespace hmest::cli
