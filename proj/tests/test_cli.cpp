#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wgsim/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result wgsim_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "wgsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = wgsim::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

nlohmann::json summary(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "summary.json")); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("wgsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenPriceExample) {
  const auto r = wgsim_cli({"gen-price", "--p-l", "0.4", "--p-s", "-0.4", "--steps", "1000", "--seed", "7", "--out", out("g")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = lines(slurp(dir_ / "g" / "prices.csv"));
  ASSERT_EQ(rows.size(), 1002u);
  EXPECT_EQ(rows[0], "step,price");
  EXPECT_EQ(rows[1], "0,1000");
  const auto j = summary(dir_ / "g");
  EXPECT_EQ(j["command"], "gen-price");
  EXPECT_EQ(j["config"]["steps"], "1000");
  EXPECT_EQ(j["config"]["p-l"], "0.4");
  EXPECT_EQ(j["config"]["seed"], "7");
  EXPECT_EQ(j["points"], 1001);
  EXPECT_TRUE(fs::exists(dir_ / "g" / "timing.json"));
  EXPECT_FALSE(j.contains("wall_time_s"));
}

TEST_F(Cli, GenPriceMatchesLibrary) {
  ASSERT_EQ(wgsim_cli({"gen-price", "--table", "0.9,0.1,0.6,0.2", "--steps", "50", "--seed", "3", "--out", out("t")}).status, 0);
  const auto s = wgsim::generate(wgsim::MarkovTable(2, {0.9, 0.1, 0.6, 0.2}), 50, 1000,
                                 wgsim::derive_seed(3, wgsim::tag(wgsim::Stream::kPrice)));
  std::ostringstream expected;
  wgsim::write_series_csv(s, expected);
  EXPECT_EQ(slurp(dir_ / "t" / "prices.csv"), expected.str());
}

TEST_F(Cli, DefaultStepsDependOnSubcommand) {
  ASSERT_EQ(wgsim_cli({"gen-price", "--out", out("g")}).status, 0);
  EXPECT_EQ(lines(slurp(dir_ / "g" / "prices.csv")).size(), 1002u);
  EXPECT_EQ(summary(dir_ / "g")["config"]["steps"], "1000");
  ASSERT_EQ(wgsim_cli({"run", "-N", "10", "--out", out("r")}).status, 0);
  EXPECT_EQ(lines(slurp(dir_ / "r" / "timeseries.csv")).size(), 2002u);
  EXPECT_EQ(summary(dir_ / "r")["config"]["steps"], "2000");
}

TEST_F(Cli, IdenticalInvocationsAreByteIdentical) {
  const std::vector<std::string> cmd = {"run", "-N", "50", "--p-l", "0.2", "--p-s", "-0.1", "--steps", "300",
                                        "--schemes", "WG,MinG,DMajG:20", "--seed", "99", "--out", out("a")};
  ASSERT_EQ(wgsim_cli(cmd).status, 0);
  const auto ts = slurp(dir_ / "a" / "timeseries.csv");
  const auto sm = slurp(dir_ / "a" / "summary.json");
  ASSERT_EQ(wgsim_cli(cmd).status, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "timeseries.csv"), ts);
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), sm);
  EXPECT_EQ(lines(ts)[0], "t,P,WG_w,WG_nswitch,MinG_w,MinG_nswitch,DMajG_T20_w,DMajG_T20_nswitch");
}

TEST_F(Cli, SweepIsInvariantToWorkers) {
  auto sweep = [&](const std::string& workers, const std::string& sub) {
    return wgsim_cli({"sweep-grid", "-N", "30", "--samples", "4", "--steps", "120", "--p-l", "-0.4,0.4", "--p-s",
                      "0.4", "--workers", workers, "--out", out(sub)});
  };
  ASSERT_EQ(sweep("1", "w1").status, 0);
  ASSERT_EQ(sweep("3", "w3").status, 0);
  const auto grid = slurp(dir_ / "w1" / "grid.csv");
  EXPECT_EQ(grid, slurp(dir_ / "w3" / "grid.csv"));
  EXPECT_EQ(lines(grid)[0], "p_L,p_S,group,scheme,mean_w,std_w,chance_best,n");
  EXPECT_EQ(lines(grid).size(), 1u + 2 * 3);
}

TEST_F(Cli, SweepWalkAndMemory) {
  ASSERT_EQ(wgsim_cli({"sweep-walk", "-N", "20", "--samples", "2", "--steps", "50", "--out", out("w")}).status, 0);
  EXPECT_EQ(lines(slurp(dir_ / "w" / "grid.csv")).size(), 1u + 5 * 3);

  const auto r = wgsim_cli({"sweep-memory", "-N", "20", "--samples", "2", "--steps", "60", "--memory", "5,50", "--out", out("m")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir_ / "m" / "grid.csv")).size(), 1u + 5 * 3 * 3);
  const auto j = summary(dir_ / "m");
  EXPECT_TRUE(j["winner_agreement"].contains("T=5"));
  EXPECT_TRUE(j["winner_agreement"].contains("T=50"));
}

TEST_F(Cli, EstimateReadsGeneratedPrices) {
  ASSERT_EQ(wgsim_cli({"gen-price", "--p-l", "0.4", "--p-s", "0.4", "--steps", "20000", "--out", out("g")}).status, 0);
  const auto file = (dir_ / "g" / "prices.csv").string();
  const auto r = wgsim_cli({"estimate", "--input", file, "--date-col", "step", "--close-col", "price", "--out", out("e")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = lines(slurp(dir_ / "e" / "estimate.csv"));
  ASSERT_EQ(csv.size(), 5u);
  // UU rises with probability 0.9; 0.03 is many standard errors wide here.
  const auto uu = csv[4];
  ASSERT_EQ(uu.rfind("UU,", 0), 0u);
  EXPECT_NEAR(std::stod(uu.substr(uu.rfind(',') + 1)), 0.9, 0.03);
}

TEST_F(Cli, EstimatePrintsEveryPattern) {
  std::string text = "Date,Close\n";
  const double closes[] = {100, 101, 102, 101, 100, 101, 100, 101, 102, 103, 102};
  for (int d = 0; d < 11; ++d) text += "2005-06-" + std::string(d + 1 < 10 ? "0" : "") + std::to_string(d + 1) + "," + std::to_string(closes[d]) + "\n";
  const auto file = write("idx.csv", text);
  const auto r = wgsim_cli({"estimate", "--input", file.string(), "--out", out("e")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto printed = lines(r.out);
  ASSERT_EQ(printed.size(), 4u);
  EXPECT_EQ(printed[0].rfind("p_up(DD) = ", 0), 0u);
  EXPECT_EQ(printed[3].rfind("p_up(UU) = ", 0), 0u);
  const auto csv = lines(slurp(dir_ / "e" / "estimate.csv"));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "pattern,occurrences,rises,p_up");
  const auto j = summary(dir_ / "e");
  EXPECT_EQ(j["points"], 11);
}

TEST_F(Cli, RunOnFile) {
  std::string text = "Date,Close\n";
  for (int d = 1; d <= 28; ++d) text += "2007-02-" + std::string(d < 10 ? "0" : "") + std::to_string(d) + "," + std::to_string(900 + (d * 7) % 11) + "\n";
  const auto file = write("k.csv", text);
  const auto r = wgsim_cli({"run", "--input", file.string(), "-N", "20", "--out", out("r")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir_ / "r" / "timeseries.csv")).size(), 29u);
  const auto j = summary(dir_ / "r");
  EXPECT_EQ(j["first_date"], "2007-02-01");
  EXPECT_TRUE(j["final_average_wealth"].contains("MajG"));
  EXPECT_FALSE(j.contains("price_seed"));
}

TEST_F(Cli, ConfigFileSitsBetweenFlagsAndDefaults) {
  const auto cfg = write("c.ini", "# desk run\nagents = 12\nsteps=40\nwealth_mult = 3\nstrategies = 1\n");
  ASSERT_EQ(wgsim_cli({"run", "--config", cfg.string(), "--steps", "30", "--out", out("c")}).status, 0);
  const auto j = summary(dir_ / "c");
  EXPECT_EQ(j["config"]["agents"], "12");
  EXPECT_EQ(j["config"]["steps"], "30");
  EXPECT_EQ(j["config"]["wealth-mult"], "3");
  EXPECT_EQ(j["config"]["history"], "2");
  EXPECT_EQ(lines(slurp(dir_ / "c" / "timeseries.csv"))[1], "0,1000,3000,0,3000,0,3000,0");
}

TEST_F(Cli, ConfigRejectsUnknownKeys) {
  const auto cfg = write("c.ini", "agentz = 12\n");
  const auto r = wgsim_cli({"run", "--config", cfg.string(), "--out", out("c")});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("unknown config key 'agentz'"), std::string::npos);
  const auto bad = write("d.ini", "just text\n");
  EXPECT_EQ(wgsim_cli({"run", "--config", bad.string(), "--out", out("d")}).status, 1);
  EXPECT_EQ(wgsim_cli({"run", "--config", (dir_ / "missing.ini").string()}).status, 1);
}

TEST_F(Cli, ErrorsAreOneLineAndNonZero) {
  auto expect_error = [](const Result& r) {
    EXPECT_NE(r.status, 0);
    EXPECT_FALSE(r.err.empty());
  };
  expect_error(wgsim_cli({}));
  expect_error(wgsim_cli({"fly"}));
  expect_error(wgsim_cli({"run", "--agents", "0"}));
  expect_error(wgsim_cli({"run", "--bogus"}));
  expect_error(wgsim_cli({"estimate"}));

  auto one_line = [](const Result& r) {
    EXPECT_EQ(r.status, 1);
    EXPECT_EQ(r.err.rfind("wgsim: error: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  };
  one_line(wgsim_cli({"estimate", "--input", (dir_ / "none.csv").string(), "--out", out("x")}));
  one_line(wgsim_cli({"run", "--p-up", "0.5", "--p-l", "0.1", "--out", out("x")}));
  one_line(wgsim_cli({"run", "--schemes", "DWG", "--out", out("x")}));
  one_line(wgsim_cli({"gen-price", "--p-l", "0.8", "--out", out("x")}));
  one_line(wgsim_cli({"gen-price", "--table", "0.1,0.2,0.3", "--out", out("x")}));
  one_line(wgsim_cli({"gen-price", "--p-up", "0", "--p0", "5", "--steps", "20", "--out", out("x")}));
  one_line(wgsim_cli({"sweep-walk", "--p-up", "1.5", "--out", out("x")}));
}

TEST_F(Cli, HelpListsSubcommands) {
  const auto r = wgsim_cli({"--help"});
  EXPECT_EQ(r.status, 0);
  for (const char* sub : {"gen-price", "estimate", "run", "sweep-walk", "sweep-grid", "sweep-memory"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
}
