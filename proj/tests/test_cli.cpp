#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli_app.hpp"

using namespace bootdelta;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "bootdelta");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bootdelta_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p.string();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::vector<double> parse(const std::string& text, const std::string& label) {
  std::istringstream in(text);
  return cli::parse_data(in, label);
}

std::vector<std::string> csv_row(const std::string& text, std::size_t row) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t i = 0; i <= row; ++i) std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

TEST(ParseData, CommentsBlanksAndErrors) {
  EXPECT_EQ(parse("1\n# note\n\n 2.5 \n-3e1\n", "x"), (std::vector<double>{1.0, 2.5, -30.0}));
  try {
    parse("1\n2\nabc\n", "data.txt");
    FAIL();
  } catch (const cli::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("data.txt:3"), std::string::npos);
  }
  EXPECT_THROW(parse("1\nnan\n", "x"), cli::InputError);
  EXPECT_THROW(parse("1 2\n", "x"), cli::InputError);
  EXPECT_THROW(parse("# only\n", "x"), cli::InputError);
}

TEST(ParseFunctional, Specs) {
  EXPECT_EQ(cli::parse_functional("identity").name(), DistortionFunction::identity().name());
  EXPECT_NE(cli::parse_functional("avar:0.1").distortion(), nullptr);
  EXPECT_NE(cli::parse_functional("variance").kernel(), nullptr);
  EXPECT_NE(cli::parse_functional("pwl:0,0;0.5,0.8;1,1").distortion(), nullptr);
  EXPECT_THROW(cli::parse_functional("avar:2"), std::exception);
  EXPECT_THROW(cli::parse_functional("median"), std::exception);
}

TEST_F(CliTest, EstimateExamples) {
  const auto r = run({"estimate", file("a.txt", "1\n2\n3\n")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(csv_row(r.out, 1), (std::vector<std::string>{"3", "-2"}));
  const auto c = run({"estimate", file("c.txt", "7.25\n"), "-f", "avar:0.3"});
  EXPECT_EQ(csv_row(c.out, 1)[1], "-7.25");
  const auto d = run({"estimate", file("d.txt", "1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n"), "-f", "avar:0.2"});
  EXPECT_EQ(csv_row(d.out, 1)[1], "-1.5");
}

TEST_F(CliTest, EstimateJsonAndOutFile) {
  const std::string data = file("a.txt", "1\n2\n3\n");
  const auto r = run({"estimate", data, "--format", "json"});
  EXPECT_EQ(nlohmann::json::parse(r.out)["estimate"], -2.0);
  const auto w = run({"estimate", data, "--out", path("est.csv")});
  EXPECT_EQ(w.code, 0);
  std::ifstream in(path("est.csv"));
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "n,estimate\n3,-2\n");
}

TEST_F(CliTest, ParseErrorNamesLine) {
  const auto r = run({"estimate", file("bad.txt", "1\n2\nx\n")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":3"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"estimate"}).code, 2);
  EXPECT_EQ(run({"estimate", path("missing.txt")}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"estimate", file("a.txt", "1\n"), "--format", "xml"}).code, 2);
}

TEST_F(CliTest, BlExamples) {
  const std::string zero = file("zero.txt", "0\n");
  EXPECT_EQ(csv_row(run({"bl", zero, zero}).out, 1)[0], "0");
  EXPECT_EQ(csv_row(run({"bl", zero, file("three.txt", "3\n")}).out, 1)[0], "2");
  EXPECT_EQ(csv_row(run({"bl", zero, file("half.txt", "0.5\n")}).out, 1)[0], "0.5");
}

TEST_F(CliTest, BootstrapCiConstantData) {
  const auto r = run({"bootstrap-ci", file("c.txt", "3\n3\n3\n3\n3\n"), "-B", "50", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = csv_row(r.out, 1);
  EXPECT_EQ(row[1], "-3");
  EXPECT_EQ(row[2], "-3");
  EXPECT_EQ(row[3], "-3");
}

TEST_F(CliTest, BootstrapCiLevelZeroIsMedian) {
  const auto r = run({"bootstrap-ci", file("x.txt", "1\n4\n2\n8\n5\n7\n"), "-B", "40", "--seed", "2", "--level", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = csv_row(r.out, 1);
  EXPECT_EQ(row[2], row[3]);
}

TEST_F(CliTest, BootstrapCiMeanWidth) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::ostringstream data;
  double sum = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double v = z(rng);
    sum += v;
    data << format_double(v) << '\n';
  }
  const auto r = run({"bootstrap-ci", file("n.txt", data.str()), "-B", "2000", "--seed", "4", "--level", "0.95"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = csv_row(r.out, 1);
  const double lower = std::stod(row[2]);
  const double upper = std::stod(row[3]);
  const double target = -sum / 400.0;
  EXPECT_LE(lower, target);
  EXPECT_GE(upper, target);
  const double width = 2.0 * 1.96 / 20.0;
  EXPECT_NEAR(upper - lower, width, 0.2 * width);
}

TEST_F(CliTest, BootstrapCiRejections) {
  const std::string data = file("x.txt", "1\n2\n3\n4\n5\n");
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "10", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50"}).code, 2);
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50", "--seed", "1", "--level", "1"}).code, 2);
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50", "--seed", "1", "--scheme", "circular"}).code, 2);
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50", "--seed", "1", "--block-length", "2"}).code, 2);
  // Two blocks of length 2 cover 4 of 5 points: the identity functional diverges on the mass deficit.
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50", "--seed", "1", "--scheme", "circular", "--block-length", "2"}).code, 3);
  EXPECT_EQ(run({"bootstrap-ci", data, "-B", "50", "--seed", "1", "--scheme", "circular", "--block-length", "2", "-f",
                 "avar:0.5"}).code,
            0);
}

TEST_F(CliTest, BootstrapCiIsSeeded) {
  const std::string data = file("x.txt", "1\n4\n2\n8\n5\n7\n3\n");
  const auto a = run({"bootstrap-ci", data, "-B", "30", "--seed", "9", "--scheme", "bayesian"});
  const auto b = run({"bootstrap-ci", data, "-B", "30", "--seed", "9", "--scheme", "bayesian"});
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, ExperimentBlockExponentViolation) {
  const auto r = run({"experiment", file("cfg.json", R"({"model":{"type":"ar1","rho":0.5},"functional":"avar:0.1",
    "scheme":{"type":"circular","gamma":0.6},"p":4,"b":"inf","seed":1})")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("(c)"), std::string::npos);
}

TEST_F(CliTest, ExperimentMissingSeed) {
  const auto r = run({"experiment", file("cfg.json", R"({"model":{"type":"iid","dist":"normal"},"functional":"identity","n_grid":[20,40],"M":3,"B":20,"limit_draws":50,"grid_size":21})")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
  const auto s = run({"experiment", path("cfg.json"), "--seed", "5", "--out", path("o")});
  EXPECT_NE(s.code, 2) << s.err;
}

TEST_F(CliTest, ExperimentStrictSchema) {
  const auto r = run({"experiment", file("cfg.json", R"({"seed":1,"colour":"red"})")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  EXPECT_EQ(run({"experiment", file("bad.json", "{ not json")}).code, 2);
  EXPECT_EQ(run({"experiment", file("m.json", R"({"model":{"type":"iid","dist":"normal"},"seed":1,"M":-3})")}).code, 2);
}

TEST_F(CliTest, ExperimentRuntimeFailure) {
  const auto r = run({"experiment", file("cfg.json", R"({"model":{"type":"iid","dist":"student_t","params":[1]},
    "functional":"identity","seed":1,"n_grid":[20,40],"M":4,"B":20})")});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(CliTest, ExperimentWritesCsvAndJson) {
  const std::string cfg = file("cfg.json", R"({"model":{"type":"iid","dist":"normal"},"functional":"avar:0.2","n_grid":[40,80],"M":6,"B":40,
    "limit_draws":300,"grid_size":51,"seed":3})");
  const auto r = run({"experiment", cfg, "--out", path("out")});
  EXPECT_TRUE(r.code == 0 || r.code == 1) << r.err;
  EXPECT_NE(r.err.find("median_d_bl_limit_non_increasing"), std::string::npos);
  std::ifstream jin(path("out.json"));
  const auto j = nlohmann::json::parse(jin);
  EXPECT_EQ(j["passed"], r.code == 0);
  EXPECT_EQ(j["config"]["seed"], 3);
  std::ifstream cin(path("out.csv"));
  std::stringstream csv;
  csv << cin.rdbuf();
  const auto threaded = run({"experiment", cfg, "--threads", "3"});
  EXPECT_EQ(threaded.out, csv.str());
}

TEST_F(CliTest, ProcessExperimentCsv) {
  const auto r = run({"experiment", file("cfg.json", R"({"kind":"process","model":{"type":"iid","dist":"uniform"},
    "n_grid":[40,80],"M":5,"B":5,"limit_draws":7,"grid_size":21,"seed":4})")});
  EXPECT_TRUE(r.code == 0 || r.code == 1) << r.err;
  EXPECT_EQ(csv_row(r.out, 0), (std::vector<std::string>{"n", "source", "rep", "value"}));
  EXPECT_EQ(csv_row(r.out, 1)[1], "sampling");
}

TEST_F(CliTest, LimitCommand) {
  const std::string cfg = file("cfg.json", R"({"model":{"type":"iid","dist":"uniform"},"limit_draws":25,"seed":5})");
  const auto r = run({"limit", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_row(r.out, 0), (std::vector<std::string>{"draw", "value"}));
  EXPECT_EQ(csv_row(r.out, 25)[0], "24");
  const auto g = run({"limit", file("g.json", R"({"model":{"type":"garch11","omega":0.1,"alpha":0.1,"beta":0.8},"seed":5})")});
  EXPECT_EQ(g.code, 3);
}
