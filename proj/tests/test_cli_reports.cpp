#include "serrin/config.hpp"
#include "serrin/reports.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

using namespace serrin;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("serrin_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SERRIN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ParseConfig, MinimalBraceFormFillsDefaults) {
  const auto cfg = parse_config(R"({profile:"laplacian", alpha:1.5708, R0:1, grid:"64x64"})");
  EXPECT_EQ(cfg.profile, "laplacian");
  EXPECT_EQ(cfg.alpha, 1.5708);
  EXPECT_EQ(cfg.nr, 64);
  EXPECT_EQ(cfg.nt, 64);
  const ExperimentConfig defaults;
  EXPECT_EQ(cfg.space_form, defaults.space_form);
  EXPECT_EQ(cfg.epsilons, defaults.epsilons);
  EXPECT_EQ(cfg.k, defaults.k);
  EXPECT_EQ(cfg.grids, defaults.grids);
}

TEST(ParseConfig, AlphaAboveTwoPiIsRejected) {
  try {
    (void)parse_config("profile = \"laplacian\"\nalpha = 7.0\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
}

TEST(ParseConfig, PowerProfileIdentifier) {
  const auto cfg = parse_config("profile: \"p-laplacian:3\"\n");
  const auto prof = make_profile(cfg.profile);
  ASSERT_TRUE(prof.degeneracy_exponent);
  EXPECT_EQ(*prof.degeneracy_exponent, 3.0);
}

TEST(ParseConfig, ErrorsCarryLineContext) {
  try {
    (void)parse_config("# comment\nalpha = 1\nbogus = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW((void)parse_config("alpha = 1\nalpha = 2\n"), ConfigError);
  EXPECT_THROW((void)parse_config("alpha = one\n"), ConfigError);
  EXPECT_THROW((void)parse_config("grids = [32, 48, 96]\n"), ConfigError);
  EXPECT_THROW((void)parse_config("epsilons = [0, -0.1]\n"), ConfigError);
  EXPECT_THROW((void)parse_config("space_form = \"hyperbolic\"\nprofile = \"p-laplacian:3\"\n"), ConfigError);
  EXPECT_THROW((void)parse_config("grid = \"64by64\"\n"), ConfigError);
  EXPECT_THROW((void)parse_config("omega = 1.5\n"), ConfigError);
  EXPECT_THROW((void)parse_config("just a line\n"), ConfigError);
}

TEST(ParseConfig, ListsAndComments) {
  const auto cfg = parse_config(
      "space_form = hyperbolic   # model\n"
      "epsilons = [0, 0.05, 0.1]\n"
      "grids = 16, 32, 64\n"
      "convexity_off = true\n"
      "omega = 0.5\n"
      "output_dir = \"out/dir\"\n");
  EXPECT_EQ(cfg.space_form, "hyperbolic");
  EXPECT_EQ(cfg.epsilons, (std::vector<double>{0.0, 0.05, 0.1}));
  EXPECT_EQ(cfg.grids, (std::vector<int>{16, 32, 64}));
  EXPECT_TRUE(cfg.convexity_off);
  ASSERT_TRUE(cfg.omega);
  EXPECT_EQ(*cfg.omega, 0.5);
  EXPECT_EQ(cfg.output_dir, "out/dir");
}

TEST(ParseConfig, RoundTripIsIdentity) {
  ExperimentConfig cfg;
  cfg.space_form = "sphere";
  cfg.alpha = 1.0 / 3.0;
  cfg.R0 = 0.7;
  cfg.epsilons = {0.0, 0.1 / 3.0, 0.3};
  cfg.k = 3;
  cfg.nr = 48;
  cfg.nt = 24;
  cfg.grids = {8, 16, 32, 64};
  cfg.linear_tol = 3e-11;
  cfg.omega = 0.7;
  cfg.sigma_rel_tol = 0.02;
  cfg.output_dir = "results";
  const auto once = parse_config(serialize_config(cfg));
  EXPECT_EQ(once, cfg);
  EXPECT_EQ(serialize_config(once), serialize_config(cfg));
  EXPECT_EQ(parse_config(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Reports, CsvNumbersUseSeventeenDigits) {
  EXPECT_EQ(csv_number(0.1), "0.10000000000000001");
  EXPECT_EQ(csv_number(1.0), "1");
  EXPECT_EQ(csv_number(std::nan("")), "nan");
  EXPECT_EQ(std::stod(csv_number(std::numbers::pi)), std::numbers::pi);
}

TEST(Reports, RigidityCsvHeaderAndJsonRoundTrip) {
  ExperimentConfig cfg;
  cfg.nr = cfg.nt = 16;
  cfg.epsilons = {0.0, 0.1};
  const auto rep = deviation_scan(cfg);
  const std::string csv = rigidity_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epsilon,sigma,c_mean,c_formula,defect,pass");
  const Json j = to_json(rep);
  const Json back = Json::parse(dump_json(j));
  EXPECT_EQ(back, j);
  EXPECT_EQ(dump_json(back), dump_json(j));
  // keys are emitted in sorted order
  std::string prev;
  for (const auto& [k, v] : j.items()) {
    EXPECT_LT(prev, k);
    prev = k;
  }
}

TEST(Reports, RepeatedRunsAreByteIdentical) {
  ExperimentConfig cfg;
  cfg.nr = cfg.nt = 16;
  cfg.grids = {16, 32, 64};
  const auto a = deviation_scan(cfg);
  const auto b = deviation_scan(cfg);
  EXPECT_EQ(rigidity_csv(a), rigidity_csv(b));
  EXPECT_EQ(dump_json(to_json(a)), dump_json(to_json(b)));
  cfg.epsilons = {0.0};
  EXPECT_EQ(convergence_csv(convergence_study(cfg)), convergence_csv(convergence_study(cfg)));
}

TEST(Reports, SolutionCsvRoundTrip) {
  const auto g = build_grid(ConeSection(), 16, 16, {1.0, 0.1, 2});
  const auto sol = solve_linear_spaceform(g, 2, 0);
  const auto back = read_solution_csv(g, solution_csv(sol.u));
  EXPECT_EQ(back.values, sol.u.values);
  const auto other = build_grid(ConeSection(), 16, 16, {1.0, 0.0, 2});
  EXPECT_THROW((void)read_solution_csv(other, solution_csv(sol.u)), std::runtime_error);
  EXPECT_THROW((void)read_solution_csv(g, "x,y\n"), std::runtime_error);
}

TEST(Reports, ManifestListsOutputs) {
  RunManifest m;
  m.subcommand = "rigidity";
  m.outputs = {"rigidity.csv", "rigidity.json"};
  const Json j = m.to_json();
  EXPECT_EQ(j.at("tool_version"), tool_version);
  EXPECT_EQ(j.at("outputs").size(), 2u);
  EXPECT_TRUE(j.at("timing_seconds").is_null());
}

TEST(Reports, WriteFailureSurfaces) {
  EXPECT_THROW(write_text_file("/nonexistent_dir/x/y.csv", "a"), std::runtime_error);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("exit");
  const std::string out = " --out " + (dir / "o").string();
  EXPECT_EQ(run_cli("oracle --profile p-laplacian:3" + out), 0);
  EXPECT_EQ(run_cli("solve --grid 64x64 --eps 0.1" + out), 0);
  // a perturbed field held to the radial equalities fails them once h is small enough to resolve the defect
  EXPECT_EQ(run_cli("audit --grid 64x64 --eps 0.1 --radial --solution " + (dir / "o" / "solution.csv").string() +
                    " --out " + (dir / "a").string()),
            2);
  EXPECT_EQ(run_cli("solve --grid 16x16 --tol 1e-30" + out), 3);
  EXPECT_EQ(run_cli("solve --alpha 7" + out), 4);
  EXPECT_EQ(run_cli("solve --profile bogus" + out), 4);
  EXPECT_EQ(run_cli("frobnicate"), 4);
  write_text_file((dir / "bad.cfg").string(), "alpha = 7.0\n");
  EXPECT_EQ(run_cli("rigidity --config " + (dir / "bad.cfg").string()), 4);
  EXPECT_EQ(run_cli("rigidity --config " + (dir / "missing.cfg").string()), 4);
}

TEST(Cli, RigidityOutputsAreDeterministicAndReferenced) {
  const auto dir = scratch_dir("rigidity");
  write_text_file((dir / "scan.cfg").string(), "grid = \"16x16\"\nepsilons = [0, 0.1]\n");
  const std::string cmd = "rigidity --config " + (dir / "scan.cfg").string() + " --out " + (dir / "r1").string();
  const std::vector<std::string> files = {"rigidity.csv", "rigidity.json", "manifest.json"};
  ASSERT_EQ(run_cli(cmd), 0);
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(read_text_file((dir / "r1" / f).string()));
  ASSERT_EQ(run_cli(cmd), 0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    EXPECT_EQ(first[i], read_text_file((dir / "r1" / files[i]).string())) << files[i];
  }
  const Json m = Json::parse(read_text_file((dir / "r1" / "manifest.json").string()));
  EXPECT_EQ(m.at("subcommand"), "rigidity");
  for (const auto& name : m.at("outputs")) EXPECT_TRUE(fs::exists(dir / "r1" / name.get<std::string>()));
}

TEST(Cli, OracleFieldAuditsThroughFiles) {
  const auto dir = scratch_dir("compose");
  const std::string o = (dir / "o").string();
  ASSERT_EQ(run_cli("oracle --on-grid --grid 32x32 --out " + o), 0);
  EXPECT_EQ(run_cli("audit --grid 32x32 --radial --solution " + o + "/solution.csv --out " + (dir / "a").string()), 0);
  EXPECT_EQ(run_cli("pfunction --grid 32x32 --radial --solution " + o + "/solution.csv --out " + (dir / "p").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "p" / "pfunction.json"));
}
