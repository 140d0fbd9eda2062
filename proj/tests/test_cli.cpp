#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = qkf::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp_dir(const std::string& name) {
  const char* base = std::getenv("QKF_TEST_TMP");
  fs::path p = fs::path(base ? base : fs::temp_directory_path().string()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) - header.begin();
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) cells.push_back(c);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, line);
  csv.header = split(line);
  while (std::getline(ss, line)) csv.rows.push_back(split(line));
  return csv;
}

}  // namespace

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

TEST(Analyze, Example1) {
  const Result r = run({"analyze", "--example", "1", "--set", "m=1,omega=1,alpha=0.5,eta=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j["theorem"]["det_V_inf"].get<double>(), 0.25, 1e-10);
  EXPECT_DOUBLE_EQ(j["theorem"]["bound"].get<double>(), 0.25);
  EXPECT_EQ(j["stability"]["class"], "not_asymptotically_stable");
  EXPECT_TRUE(j["existence"]["exists"].get<bool>());
  EXPECT_EQ(j["manifest"]["command"], "analyze");
  EXPECT_EQ(j["manifest"]["version"], qkf::cli::kVersion);
}

TEST(Analyze, SpecFileExample2) {
  const fs::path dir = tmp_dir("analyze_file");
  write(dir / "sys.json",
        R"({"G": [[0, 2], [2, 0]], "C_re": [1.5, 0], "C_im": [0, 1.5], "eta": 0.6})");
  const Result r = run({"analyze", "--spec", (dir / "sys.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j["theorem"]["kappa"].get<double>(), 2.25, 1e-12);
  EXPECT_EQ(j["theorem"]["kappa_class"], "positive");
  EXPECT_DOUBLE_EQ(j["theorem"]["bound"].get<double>(), 0.25);
}

TEST(Analyze, ZeroCouplingExits3) {
  const fs::path dir = tmp_dir("analyze_zero");
  write(dir / "zero_coupling.json",
        R"({"G": [[1, 0], [0, 1]], "C_re": [0, 0], "C_im": [0, 0], "eta": 1})");
  const Result r = run({"analyze", "--spec", (dir / "zero_coupling.json").string(), "--out",
                        (dir / "out").string()});
  EXPECT_EQ(r.code, 3);
  const Json j = Json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_FALSE(j["existence"]["exists"].get<bool>());
  EXPECT_FALSE(j["theorem"]["has_steady_state"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Analyze, InvalidSpecExits2) {
  const fs::path dir = tmp_dir("analyze_bad");
  write(dir / "bad.json", R"({"G": [[1, 0], [0, 1]], "C_re": [1, 0], "C_im": [0, 0], "eta": 0})");
  EXPECT_EQ(run({"analyze", "--spec", (dir / "bad.json").string()}).code, 2);
  write(dir / "broken.json", "{not json");
  EXPECT_EQ(run({"analyze", "--spec", (dir / "broken.json").string()}).code, 2);
  EXPECT_EQ(run({"analyze", "--spec", (dir / "missing.json").string()}).code, 2);
}

TEST(Analyze, UsageErrors) {
  EXPECT_EQ(run({"analyze"}).code, 2);
  EXPECT_EQ(run({"analyze", "--example", "3"}).code, 2);
  EXPECT_EQ(run({"analyze", "--example", "1", "--set", "beta=2"}).code, 2);
  EXPECT_EQ(run({"analyze", "--example", "1", "--set", "alpha"}).code, 2);
  EXPECT_EQ(run({"analyze", "--example", "1", "--method", "bogus"}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Analyze, MethodsAgree) {
  const Json a = Json::parse(run({"analyze", "--example", "2", "--method", "hamiltonian"}).out);
  const Json b = Json::parse(run({"analyze", "--example", "2", "--method", "ode"}).out);
  EXPECT_EQ(a["steady_state"]["method"], "hamiltonian");
  EXPECT_EQ(b["steady_state"]["method"], "ode_limit");
  EXPECT_NEAR(a["steady_state"]["det"].get<double>(), b["steady_state"]["det"].get<double>(),
              1e-9);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

TEST(Sweep, PhaseAgainstDetFormula) {
  const Result r = run({"sweep", "--example", "1", "--set", "eta=0.5", "--param", "phi", "--min",
                        "-1", "--max", "1", "--steps", "21"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Csv csv = parse_csv(r.out);
  ASSERT_EQ(csv.rows.size(), 21u);
  const std::size_t c = csv.col("abs_diff_det");
  double worst = 0;
  for (const auto& row : csv.rows) worst = std::max(worst, std::stod(row.at(c)));
  EXPECT_LE(worst, 1e-8);
}

TEST(Sweep, R2ReachesHeisenbergLimit) {
  const Result r = run({"sweep", "--example", "2", "--set", "eta=0.5", "--param", "r2", "--min",
                        "1e-4", "--max", "10", "--steps", "9", "--log"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Csv csv = parse_csv(r.out);
  ASSERT_EQ(csv.rows.size(), 9u);
  const std::size_t p = csv.col("product");
  const std::size_t d = csv.col("abs_diff_product");
  EXPECT_NEAR(std::stod(csv.rows.front().at(p)), 0.25, 1e-3);
  EXPECT_GT(std::stod(csv.rows.back().at(p)), 0.25);
  for (const auto& row : csv.rows) EXPECT_LE(std::stod(row.at(d)), 1e-6);
}

TEST(Sweep, EtaBoundFollowsEfficiencyBranch) {
  const Result r = run({"sweep", "--example", "1", "--param", "eta", "--min", "0.1", "--max", "1",
                        "--steps", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Csv csv = parse_csv(r.out);
  const std::size_t v = csv.col("value"), b = csv.col("bound");
  for (const auto& row : csv.rows) {
    const double eta = std::stod(row.at(v));
    EXPECT_NEAR(std::stod(row.at(b)), 1.0 / (4 * eta), 1e-14);
  }
}

TEST(Sweep, WritesFilesWithManifest) {
  const fs::path dir = tmp_dir("sweep_out");
  const Result r = run({"sweep", "--example", "2", "--param", "gamma", "--min", "0.5", "--max",
                        "2", "--steps", "4", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_csv(slurp(dir / "sweep.csv")).rows.size(), 4u);
  const Json m = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["command"], "sweep");
}

TEST(Sweep, UnknownParameterExits2) {
  EXPECT_EQ(run({"sweep", "--example", "1", "--param", "zeta"}).code, 2);
  EXPECT_EQ(run({"sweep", "--example", "1", "--param", "beta"}).code, 2);
  EXPECT_EQ(run({"sweep", "--example", "1", "--param", "eta", "--min", "0", "--max", "1", "--log"})
                .code,
            2);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

TEST(Simulate, Example2EnsembleConsistent) {
  const Result r = run({"simulate", "--example", "2", "--set", "beta=1,gamma=1", "--dt", "1e-3",
                        "--t-final", "5", "--ensemble", "2000", "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["stats"]["riccati_consistent"].get<bool>());
  EXPECT_EQ(j["stats"]["ensemble"], 2000);
  EXPECT_EQ(j["manifest"]["seed"], 7);
}

TEST(Simulate, ByteIdenticalOutputs) {
  const fs::path a = tmp_dir("sim_a"), b = tmp_dir("sim_b");
  const std::vector<std::string> base = {"simulate", "--example", "1",  "--t-final", "2",
                                         "--ensemble", "50",      "--seed", "3", "--out"};
  auto args_a = base, args_b = base;
  args_a.push_back(a.string());
  args_b.push_back(b.string());
  ASSERT_EQ(run(args_a).code, 0);
  ASSERT_EQ(run(args_b).code, 0);
  EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
  const Json sa = Json::parse(slurp(a / "stats.json"));
  const Json sb = Json::parse(slurp(b / "stats.json"));
  EXPECT_EQ(sa["stats"], sb["stats"]);
  EXPECT_EQ(slurp(a / "trajectory.csv").substr(0, 36), "t,q_true,p_true,q_hat,p_hat,dy,innov");
}

TEST(Simulate, SingleTrajectoryOmitsStats) {
  const fs::path dir = tmp_dir("sim_single");
  const Result r = run({"simulate", "--example", "1", "--t-final", "1", "--ensemble", "1",
                        "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("notice"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(dir / "stats.json"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Simulate, DriveFlags) {
  const Result r = run({"simulate", "--example", "1", "--t-final", "1", "--drive-b", "0,1",
                        "--drive-u", "sine:1:1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"simulate", "--example", "1", "--drive-b", "0,1", "--drive-u", "square"}).code, 2);
  EXPECT_EQ(run({"simulate", "--example", "1", "--drive-b", "01"}).code, 2);
}

TEST(Simulate, BadFlagsExit2) {
  EXPECT_EQ(run({"simulate", "--example", "1", "--dt", "0"}).code, 2);
  EXPECT_EQ(run({"simulate", "--example", "1", "--dt", "2", "--t-final", "1"}).code, 2);
  EXPECT_EQ(run({"simulate", "--example", "1", "--ensemble", "abc"}).code, 2);
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

TEST(Verify, FilterRunsOnlyMatchingRows) {
  const Result r = run({"verify", "--filter", "theorem"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("theorem"), std::string::npos);
  EXPECT_EQ(r.out.find("monte_carlo"), std::string::npos);
  EXPECT_EQ(r.out.find("stability"), std::string::npos);
}

TEST(Verify, InjectedFaultFailsHeisenbergRow) {
  const Result r = run({"verify", "--filter", "theorem", "--inject-fault", "d-sign"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST(Verify, UnknownFilterExits2) { EXPECT_EQ(run({"verify", "--filter", "nothing"}).code, 2); }

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

TEST(Rerun, ReproducesSimulation) {
  const fs::path a = tmp_dir("rerun_a"), b = tmp_dir("rerun_b");
  ASSERT_EQ(run({"simulate", "--example", "2", "--set", "eta=0.5", "--t-final", "1", "--ensemble",
                 "20", "--seed", "11", "--out", a.string()})
                .code,
            0);
  const Result r = run({"rerun", "--manifest", (a / "manifest.json").string(), "--out", b.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
  EXPECT_EQ(Json::parse(slurp(a / "stats.json"))["stats"],
            Json::parse(slurp(b / "stats.json"))["stats"]);
}

TEST(Rerun, ReproducesAnalysis) {
  const fs::path a = tmp_dir("rerun_an_a"), b = tmp_dir("rerun_an_b");
  ASSERT_EQ(run({"analyze", "--example", "1", "--set", "phi=0.4", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"rerun", "--manifest", (a / "manifest.json").string(), "--out", b.string()}).code,
            0);
  const Json ra = Json::parse(slurp(a / "report.json"));
  const Json rb = Json::parse(slurp(b / "report.json"));
  EXPECT_EQ(ra["theorem"], rb["theorem"]);
  EXPECT_EQ(ra["steady_state"], rb["steady_state"]);
}

TEST(Rerun, MissingManifestExits2) {
  EXPECT_EQ(run({"rerun", "--manifest", "/nonexistent/manifest.json"}).code, 2);
}
