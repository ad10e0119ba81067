#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "anisokpp/cli.hpp"
#include "support.hpp"

using namespace anisokpp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = cli::run(std::move(args), o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

/// Writes `config` into a fresh directory and runs `command` with output in dir/out.
Run run_config(const std::string& name, const std::string& command, const json& config,
               std::vector<std::string> extra = {}) {
  const auto dir = anisokpp::testing::temp_dir(name);
  const auto cfg = write_config(dir, config.dump(2));
  std::vector<std::string> args{command, "--config", cfg.string(), "--out", (dir / "out").string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

fs::path out_of(const std::string& name) { return std::filesystem::temp_directory_path() / ("anisokpp_test_" + name) / "out"; }

json dn_config(int cells) {
  return {{"norm", {{"kind", "euclidean"}}},
          {"grid", {{"dim", 1}, {"cells", cells}, {"labels", {{"left", "dirichlet"}, {"right", "neumann"}}}}},
          {"weight", {{"kind", "constant"}, {"value", 1.0}}}};
}

}  // namespace

TEST(Cli, EigenDnValue) {
  const auto r = run_config("eigen", "eigen", dn_config(1024));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(out_of("eigen") / "eigen.json");
  EXPECT_NEAR(j["value"].get<double>(), M_PI * M_PI / 4, 1e-3);
  EXPECT_TRUE(fs::exists(out_of("eigen") / "eigenfunction.csv"));
  const auto m = read_json(out_of("eigen") / "manifest.json");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["artifacts"].size(), 2u);
}

TEST(Cli, EigenMuProblem) {
  auto c = dn_config(256);
  c["eigen"] = {{"problem", "mu"}, {"d", 1.0}};
  ASSERT_EQ(run_config("eigen_mu", "eigen", c).code, 0);
  EXPECT_NEAR(read_json(out_of("eigen_mu") / "eigen.json")["value"].get<double>(), M_PI * M_PI / 4 - 1, 1e-2);
}

TEST(Cli, InfeasibleWeightExits3) {
  auto c = dn_config(32);
  c["weight"]["value"] = -1.0;
  EXPECT_EQ(run_config("infeasible", "eigen", c).code, 3);
}

TEST(Cli, InvalidNormExits4) {
  auto c = dn_config(32);
  c["norm"] = {{"kind", "asym1d"}, {"a", 1.0}, {"b", 1.0}};
  EXPECT_EQ(run_config("badnorm", "eigen", c).code, 4);
  c["norm"] = {{"kind", "asym1d"}, {"a", -1.0}, {"b", 1.0}};
  EXPECT_EQ(run_config("badnorm2", "check-norm", c).code, 4);
}

TEST(Cli, AllNeumannExits5) {
  auto c = dn_config(32);
  c["grid"]["labels"]["left"] = "neumann";
  EXPECT_EQ(run_config("neumann", "eigen", c).code, 5);
}

TEST(Cli, UsageErrorsExit64) {
  const auto dir = anisokpp::testing::temp_dir("usage");
  const auto cfg = write_config(dir, "{\n  \"grid\": {\"dim\": 1,,}\n}\n");
  const auto bad = run({"eigen", "--config", cfg.string(), "--out", (dir / "out").string()});
  EXPECT_EQ(bad.code, 64);
  EXPECT_NE(bad.err.find("config.json:2:"), std::string::npos) << bad.err;

  auto c = dn_config(32);
  c["grid"]["cels"] = 4;
  const auto unknown = run_config("unknown_key", "eigen", c);
  EXPECT_EQ(unknown.code, 64);
  EXPECT_NE(unknown.err.find("/grid/cels"), std::string::npos) << unknown.err;

  EXPECT_EQ(run({"eigen"}).code, 64);
  EXPECT_EQ(run({}).code, 64);
  EXPECT_EQ(run({"bogus"}).code, 64);
  EXPECT_EQ(run({"eigen", "--config", (dir / "missing.json").string()}).code, 64);
}

TEST(Cli, HelpListsExitCodes) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Exit codes"), std::string::npos);
  EXPECT_NE(r.out.find("64"), std::string::npos);
}

TEST(Cli, SetOverridesConfig) {
  const auto r = run_config("set", "eigen", dn_config(8), {"--set", "grid.cells=512"});
  ASSERT_EQ(r.code, 0);
  std::ifstream f(out_of("set") / "eigenfunction.csv");
  int lines = 0;
  for (std::string s; std::getline(f, s);) ++lines;
  EXPECT_EQ(lines, 514);
}

TEST(Cli, Threshold) {
  const auto r = run_config("threshold", "threshold", dn_config(1024));
  ASSERT_EQ(r.code, 0);
  const auto j = read_json(out_of("threshold") / "threshold.json");
  EXPECT_NEAR(j["d_star"].get<double>(), 4 / (M_PI * M_PI), 1e-3);
  EXPECT_TRUE(j["sign_check"].get<bool>());

  auto c = dn_config(2048);
  c["norm"] = {{"kind", "asym1d"}, {"a", 1.0}, {"b", 2.0}};
  c["weight"] = {{"kind", "interval"}, {"lo", 0.3}, {"hi", 0.8}, {"beta", 0.5}};
  ASSERT_EQ(run_config("threshold_bb", "threshold", c).code, 0);
  const double shoot = shooting_eigenvalue_1d(1.0, 2.0, 0.5, {0.3, 0.8}, MixedBoundary::DN);
  const double ds = read_json(out_of("threshold_bb") / "threshold.json")["d_star"].get<double>();
  EXPECT_LE(std::abs(ds * shoot - 1.0), 2e-3);
}

TEST(Cli, OptimizeMeasure) {
  auto c = dn_config(256);
  c["weight"] = {{"kind", "class"}, {"beta", 1.0}, {"m0", 0.0}};
  ASSERT_EQ(run_config("optimize", "optimize", c).code, 0);
  const auto j = read_json(out_of("optimize") / "optimize.json");
  EXPECT_NEAR(j["omega_measure"].get<double>(), 0.5, 1.0 / 256);
  EXPECT_TRUE(j["fixed_point"].get<bool>());
  EXPECT_EQ(j["stop_reason"], "fixed_point");
  for (const char* f : {"omega.csv", "lambda_trace.csv", "weight.csv", "eigenfunction.csv"})
    EXPECT_TRUE(fs::exists(out_of("optimize") / f)) << f;
}

TEST(Cli, OptimizeNeedsClassWeight) { EXPECT_EQ(run_config("optimize_bad", "optimize", dn_config(16)).code, 64); }

TEST(Cli, SweepAndEvolve) {
  auto c = dn_config(64);
  c["sweep"] = {{"points", 13}, {"horizon", 20}};
  ASSERT_EQ(run_config("sweep", "sweep", c).code, 0);
  const auto j = read_json(out_of("sweep") / "sweep.json");
  EXPECT_EQ(j["sign_changes"], 1);
  EXPECT_TRUE(j["bracket_contains_d_star"].get<bool>());

  c["evolve"] = {{"d_factor", 0.5}, {"horizon", 5}, {"snapshots", {1.0, 2.0}}};
  ASSERT_EQ(run_config("evolve", "evolve", c).code, 0);
  EXPECT_TRUE(fs::exists(out_of("evolve") / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(out_of("evolve") / "evolve.json"));
}

TEST(Cli, VerifyAndCheckNorm) {
  json c{{"norm", {{"kind", "asym1d"}, {"a", 2.0}, {"b", 1.0}}}, {"verify", {{"cells", 256}, {"samples", 20}}}};
  const auto v = run_config("verify", "verify", c);
  EXPECT_EQ(v.code, 0) << v.out << v.err;
  EXPECT_TRUE(read_json(out_of("verify") / "verify.json")["passed"].get<bool>());

  ASSERT_EQ(run_config("check_norm", "check-norm", c).code, 0);
  const auto n = read_json(out_of("check_norm") / "norm.json");
  EXPECT_EQ(n["alpha_lo"], 1.0);
  EXPECT_EQ(n["alpha_hi"], 2.0);
  EXPECT_EQ(n["convexity"], 1.0);
}

TEST(Cli, ShippedConfigsParse) {
  const fs::path dir = ANISOKPP_CONFIG_DIR;
  int seen = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW((void)cli::load_config(e.path().string())) << e.path();
    ++seen;
  }
  EXPECT_GE(seen, 5);
}

TEST(Cli, DeterministicArtifacts) {
  ::setenv("ANISOKPP_DETERMINISTIC", "1", 1);
  auto c = dn_config(64);
  c["norm"] = {{"kind", "asym1d"}, {"a", 1.0}, {"b", 2.0}};
  c["weight"] = {{"kind", "class"}, {"beta", 0.5}, {"m0", 0.0}};
  c["optimize"] = {{"initial", "random"}, {"starts", 3}};
  std::vector<std::string> artifacts;
  for (const char* name : {"det_a", "det_b"}) {
    const auto r = run_config(name, "optimize", c, {"--seed", "7", "--threads", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto ma = read_json(out_of("det_a") / "manifest.json"), mb = read_json(out_of("det_b") / "manifest.json");
  EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
  EXPECT_EQ(ma["threads"], 1);
  for (const auto& f : ma["artifacts"]) {
    const std::string name = f.get<std::string>();
    EXPECT_EQ(slurp(out_of("det_a") / name), slurp(out_of("det_b") / name)) << name;
  }
  ::unsetenv("ANISOKPP_DETERMINISTIC");
}
