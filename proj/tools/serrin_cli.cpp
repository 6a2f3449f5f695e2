#include "serrin/serrin.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace serrin;

namespace {

enum ExitCode : int { ok = 0, failure = 1, audit_failed = 2, not_converged = 3, config_error = 4 };

/// Domain and discretization flags shared by the field subcommands.
struct DomainFlags {
  std::string space_form = "euclidean";
  double alpha = std::numbers::pi / 2.0;
  double R0 = 1.0;
  double eps = 0.0;
  int k = 2;
  std::string grid = "64x64";

  void attach(CLI::App* cmd) {
    cmd->add_option("--space-form", space_form, "euclidean | hyperbolic | sphere")->capture_default_str();
    cmd->add_option("--alpha", alpha, "cone opening angle in (0, 2 pi]")->capture_default_str();
    cmd->add_option("--R0", R0, "mean radius of Gamma0")->capture_default_str();
    cmd->add_option("--eps", eps, "boundary perturbation amplitude")->capture_default_str();
    cmd->add_option("--k", k, "boundary perturbation mode")->capture_default_str();
    cmd->add_option("--grid", grid, "cells as NrxNt")->capture_default_str();
  }

  [[nodiscard]] GridPtr build() const {
    const auto [nr, nt] = detail::parse_grid(grid, "grid", 0);
    if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError(0, "eps must lie in [0, 1)");
    return build_grid(ConeSection(SpaceForm::from_name(space_form), alpha), nr, nt, {R0, eps, k});
  }

  [[nodiscard]] Json to_json() const {
    return Json{{"space_form", space_form}, {"alpha", alpha}, {"R0", R0},
                {"eps", eps},               {"k", k},         {"grid", grid}};
  }
};

/// Collects written files and emits the manifest that references them.
class OutputSet {
 public:
  OutputSet(std::string dir, std::string subcommand, bool timing)
      : dir_(std::move(dir)), timing_(timing), start_(std::chrono::steady_clock::now()) {
    manifest_.subcommand = std::move(subcommand);
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    write_text_file((fs::path(dir_) / name).string(), content);
    manifest_.outputs.push_back(name);
  }

  RunManifest& manifest() { return manifest_; }

  void finish() {
    if (timing_) {
      manifest_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    write_text_file((fs::path(dir_) / "manifest.json").string(), dump_json(manifest_.to_json()));
  }

 private:
  std::string dir_;
  bool timing_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

/// Radial oracle sampled at the cell centres (r is the distance to the vertex).
ScalarField oracle_field(const GridPtr& grid, const OperatorProfile& profile) {
  const SpaceForm sf = grid->space_form();
  if (sf.curvature() == 0) {
    RadialSolutionEuclidean o(profile, 2, grid->boundary().R0);
    return ScalarField::sample(grid, [&](int c) { return o.u(grid->r(c)); });
  }
  if (!profile.is_laplacian) throw std::invalid_argument("space-form oracles exist for the laplacian only");
  RadialSolutionSpaceForm o(sf, 2, grid->boundary().R0);
  return ScalarField::sample(grid, [&](int c) { return o.u(grid->r(c)); });
}

void require_symmetric(const DomainFlags& d) {
  if (d.eps != 0.0) throw ConfigError(0, "oracle fields live on the unperturbed domain (eps = 0)");
}

ScalarField load_field(const GridPtr& grid, const std::string& solution, bool oracle, const OperatorProfile& profile,
                       const DomainFlags& d) {
  if (oracle == !solution.empty()) throw ConfigError(0, "give exactly one of --solution or --oracle");
  if (oracle) {
    require_symmetric(d);
    return oracle_field(grid, profile);
  }
  return read_solution_csv(grid, read_text_file(solution));
}

int run_oracle(const DomainFlags& d, const std::string& profile_id, int samples, bool on_grid, const std::string& out,
               bool timing) {
  if (samples < 2) throw ConfigError(0, "samples must be >= 2");
  const OperatorProfile profile = make_profile(profile_id);
  const SpaceForm sf = SpaceForm::from_name(d.space_form);
  std::function<double(double)> u, du, res;
  double c = 0.0, minus_du_R = 0.0;
  if (sf.curvature() == 0) {
    auto o = std::make_shared<RadialSolutionEuclidean>(profile, 2, d.R0);
    u = [o](double r) { return o->u(r); };
    du = [o](double r) { return o->du(r); };
    res = [o](double r) { return o->pde_residual(r); };
    c = o->overdetermined_constant();
    minus_du_R = -o->du(d.R0);
  } else {
    if (!profile.is_laplacian) throw ConfigError(0, "space-form oracles exist for the laplacian only");
    auto o = std::make_shared<RadialSolutionSpaceForm>(sf, 2, d.R0);
    u = [o](double r) { return o->u(r); };
    du = [o](double r) { return o->du(r); };
    res = [o](double r) { return o->pde_residual(r); };
    c = o->overdetermined_constant();
    minus_du_R = -o->du(d.R0);
  }

  OutputSet files(out, "oracle", timing);
  std::string csv = "r,u,du,pde_residual\n";
  double max_res = 0.0;
  for (int i = 0; i < samples; ++i) {
    // interior radii (i + 1/2) R / samples
    const double r = (i + 0.5) * d.R0 / samples;
    const double rr = res(r);
    max_res = std::max(max_res, std::abs(rr));
    csv += csv_number(r) + "," + csv_number(u(r)) + "," + csv_number(du(r)) + "," + csv_number(rr) + "\n";
  }
  files.write("oracle.csv", csv);
  const bool pass = max_res <= 1e-9 && std::abs(c - minus_du_R) <= 1e-10;
  Json summary{{"profile", profile.name},
               {"space_form", sf.name()},
               {"R0", d.R0},
               {"overdetermined_constant", json_number(c)},
               {"minus_du_at_R", json_number(minus_du_R)},
               {"max_abs_pde_residual", json_number(max_res)},
               {"pass", pass}};
  if (on_grid) {
    require_symmetric(d);
    const GridPtr grid = d.build();
    files.write("solution.csv", solution_csv(oracle_field(grid, profile)));
    files.manifest().grid_hash = grid->hash();
  }
  files.write("oracle.json", dump_json(summary));
  Json cfg = d.to_json();
  cfg["profile"] = profile_id;
  cfg["samples"] = samples;
  files.manifest().config = cfg;
  files.finish();
  std::printf("oracle %s on %s: c = %.17g, max |residual| = %.3g\n", profile.name.c_str(), sf.name().c_str(), c,
              max_res);
  return pass ? ok : audit_failed;
}

int run_solve(const DomainFlags& d, const std::string& profile_id, double tol, std::optional<double> omega,
              const std::string& out, bool timing) {
  const OperatorProfile profile = make_profile(profile_id);
  ExperimentConfig cfg;
  cfg.linear_tol = tol;
  cfg.picard_tol = tol;
  cfg.omega = omega;
  if (!(tol > 0.0)) throw ConfigError(0, "tol must be positive");
  if (omega && !(*omega > 0.0 && *omega <= 1.0)) throw ConfigError(0, "omega must lie in (0, 1]");
  const GridPtr grid = d.build();
  if (grid->space_form().curvature() != 0 && !profile.is_laplacian) {
    throw ConfigError(0, "space forms with K != 0 support the laplacian profile only");
  }
  const SolveResult sol = solve_experiment(grid, profile, cfg);

  OutputSet files(out, "solve", timing);
  files.write("solution.csv", solution_csv(sol.u));
  files.write("solve.json", dump_json(to_json(sol.report)));
  Json c = d.to_json();
  c["profile"] = profile_id;
  c["tol"] = tol;
  c["omega"] = omega ? Json(*omega) : Json(nullptr);
  files.manifest().config = c;
  files.manifest().grid_hash = grid->hash();
  files.finish();
  std::printf("solve %s: %s after %d iterations, residual %.3g\n", profile.name.c_str(),
              sol.report.converged ? "converged" : "NOT converged", sol.report.iterations, sol.report.final_residual);
  return sol.report.converged ? ok : not_converged;
}

int run_audit(const DomainFlags& d, const std::string& profile_id, const std::string& solution, bool oracle,
              bool radial, const std::string& out, bool timing) {
  const OperatorProfile profile = make_profile(profile_id);
  const GridPtr grid = d.build();
  if (grid->space_form().curvature() != 0) throw ConfigError(0, "identity audits need --space-form euclidean");
  const ScalarField u = load_field(grid, solution, oracle, profile, d);
  IdentityAuditOptions io;
  io.expect_radial = radial || oracle;
  const AuditReport rep = audit_identities(u, profile, io);

  OutputSet files(out, "audit", timing);
  files.write("audit.csv", audit_csv(rep));
  files.write("audit.json", dump_json(to_json(rep)));
  Json c = d.to_json();
  c["profile"] = profile_id;
  c["source"] = oracle ? std::string("oracle") : solution;
  c["expect_radial"] = io.expect_radial;
  files.manifest().config = c;
  files.manifest().grid_hash = grid->hash();
  files.finish();
  for (const auto& e : rep.entries) {
    std::printf("%-24s %s\n", e.name.c_str(), e.informational ? "info" : (e.pass ? "pass" : "FAIL"));
  }
  return rep.all_pass() ? ok : audit_failed;
}

int run_pfunction(const DomainFlags& d, const std::string& solution, bool oracle, bool radial, const std::string& out,
                  bool timing) {
  const OperatorProfile laplacian = make_laplacian_profile();
  const GridPtr grid = d.build();
  const ScalarField u = load_field(grid, solution, oracle, laplacian, d);
  PFunctionOptions po;
  po.expect_radial = radial || oracle;
  const PFieldReport rep = pfunction_audit(u, po);

  OutputSet files(out, "pfunction", timing);
  std::string pcsv = "r,theta,P\n";
  for (int c = 0; c < grid->cell_count(); ++c) {
    pcsv += csv_number(grid->r(c)) + "," + csv_number(grid->cell_theta(c)) + "," + csv_number(rep.P[c]) + "\n";
  }
  files.write("pfield.csv", pcsv);
  files.write("pfunction.json", dump_json(to_json(rep)));
  Json c = d.to_json();
  c["source"] = oracle ? std::string("oracle") : solution;
  c["expect_radial"] = po.expect_radial;
  files.manifest().config = c;
  files.manifest().grid_hash = grid->hash();
  files.finish();
  for (const auto& e : rep.verdicts.entries) {
    std::printf("%-24s %s\n", e.name.c_str(), e.informational ? "info" : (e.pass ? "pass" : "FAIL"));
  }
  return rep.verdicts.all_pass() ? ok : audit_failed;
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(0, e.what());
  }
  ExperimentConfig cfg = parse_config(text);
  if (!out_override.empty()) cfg.output_dir = out_override;
  return cfg;
}

int run_rigidity(const std::string& config_path, const std::string& out, bool contrast, bool timing) {
  const ExperimentConfig cfg = load_config(config_path, out);
  OutputSet files(cfg.output_dir, contrast ? "rigidity-contrast" : "rigidity", timing);
  files.manifest().config = to_json(cfg);
  files.manifest().grid_hash = experiment_grid(cfg, cfg.epsilons.front(), cfg.nr, cfg.nt)->hash();
  if (contrast) {
    const ContrastReport rep = convexity_contrast(cfg);
    files.write("contrast.csv", contrast_csv(rep));
    files.write("contrast.json", dump_json(to_json(rep)));
    files.finish();
    bool converged = true, pass = true;
    for (const auto& row : rep.rows) {
      converged = converged && row.converged;
      pass = pass && row.equality_audits_pass;
      std::printf("eps=%-6g gap=%s dnuP_wall=%s\n", row.epsilon,
                  row.inequality_gap ? csv_number(*row.inequality_gap).c_str() : "-",
                  row.max_wall_dnu_P ? csv_number(*row.max_wall_dnu_P).c_str() : "-");
    }
    if (!converged) return not_converged;
    return pass ? ok : audit_failed;
  }
  const RigidityReport rep = deviation_scan(cfg);
  files.write("rigidity.csv", rigidity_csv(rep));
  files.write("rigidity.json", dump_json(to_json(rep)));
  files.finish();
  bool converged = true, pass = rep.sigma_increasing && rep.symmetric_case_small;
  for (const auto& row : rep.rows) {
    converged = converged && row.converged;
    pass = pass && row.pass;
    std::printf("eps=%-6g sigma=%.6e c=%.10f %s\n", row.epsilon, row.sigma, row.c_mean, row.pass ? "pass" : "FAIL");
  }
  if (!converged) return not_converged;
  return pass ? ok : audit_failed;
}

int run_convergence(const std::string& config_path, const std::string& out, bool timing) {
  const ExperimentConfig cfg = load_config(config_path, out);
  const ConvergenceReport rep = convergence_study(cfg);
  OutputSet files(cfg.output_dir, "convergence", timing);
  files.manifest().config = to_json(cfg);
  files.manifest().grid_hash = experiment_grid(cfg, 0.0, cfg.grids.front(), cfg.grids.front())->hash();
  files.write("convergence.csv", convergence_csv(rep));
  files.write("convergence.json", dump_json(to_json(rep)));
  files.finish();
  bool converged = true;
  for (const auto& row : rep.rows) {
    converged = converged && row.converged;
    std::printf("n=%-5d linf=%.6e order=%s\n", row.n, row.linf,
                row.order_linf ? csv_number(*row.order_linf).c_str() : "-");
  }
  if (!converged) return not_converged;
  return rep.errors_decreasing ? ok : audit_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for overdetermined problems in sector-like domains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version));
  bool timing = false;
  app.add_flag("--timing", timing, "record wall time in manifest.json (breaks byte-identical manifests)");

  std::string out = ".";
  std::string profile_id = "laplacian";
  DomainFlags domain;

  auto* oracle_cmd = app.add_subcommand("oracle", "sample a radial solution and its PDE residual");
  int samples = 100;
  bool on_grid = false;
  domain.attach(oracle_cmd);
  oracle_cmd->add_option("--profile", profile_id, "laplacian | p-laplacian:<p> | mean-curvature")->capture_default_str();
  oracle_cmd->add_option("--samples", samples, "number of interior radii")->capture_default_str();
  oracle_cmd->add_flag("--on-grid", on_grid, "also write the oracle at the cell centres as solution.csv");
  oracle_cmd->add_option("--out", out, "output directory")->capture_default_str();

  auto* solve_cmd = app.add_subcommand("solve", "solve the mixed problem on a sector grid");
  double tol = 1e-9;
  std::optional<double> omega;
  domain.attach(solve_cmd);
  solve_cmd->add_option("--profile", profile_id, "operator profile")->capture_default_str();
  solve_cmd->add_option("--tol", tol, "residual tolerance")->capture_default_str();
  solve_cmd->add_option("--omega", omega, "Picard relaxation in (0, 1]");
  solve_cmd->add_option("--out", out, "output directory")->capture_default_str();

  std::string solution;
  bool use_oracle = false;
  bool radial = false;

  auto* audit_cmd = app.add_subcommand("audit", "identity and inequality audits on a field (euclidean)");
  domain.attach(audit_cmd);
  audit_cmd->add_option("--profile", profile_id, "operator profile")->capture_default_str();
  audit_cmd->add_option("--solution", solution, "solution CSV written by solve or oracle --on-grid");
  audit_cmd->add_flag("--oracle", use_oracle, "audit the radial oracle field instead of a file");
  audit_cmd->add_flag("--radial", radial, "hold the field to the radial equality cases");
  audit_cmd->add_option("--out", out, "output directory")->capture_default_str();

  auto* pf_cmd = app.add_subcommand("pfunction", "P-function audits on a solution of Delta u + N K u = -1");
  domain.attach(pf_cmd);
  pf_cmd->add_option("--solution", solution, "solution CSV");
  pf_cmd->add_flag("--oracle", use_oracle, "audit the radial oracle field instead of a file");
  pf_cmd->add_flag("--radial", radial, "hold the field to the radial equality cases");
  pf_cmd->add_option("--out", out, "output directory")->capture_default_str();

  std::string config_path;
  bool contrast = false;
  std::string out_override;
  auto* rig_cmd = app.add_subcommand("rigidity", "deviation scan over boundary perturbations");
  rig_cmd->add_option("--config", config_path, "experiment configuration")->required();
  rig_cmd->add_option("--out", out_override, "override output_dir");
  rig_cmd->add_flag("--contrast", contrast, "run the non-convex contrast instead (alpha in [pi, 2 pi))");

  auto* conv_cmd = app.add_subcommand("convergence", "grid refinement study against the radial oracle");
  conv_cmd->add_option("--config", config_path, "experiment configuration")->required();
  conv_cmd->add_option("--out", out_override, "override output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*oracle_cmd) return run_oracle(domain, profile_id, samples, on_grid, out, timing);
    if (*solve_cmd) return run_solve(domain, profile_id, tol, omega, out, timing);
    if (*audit_cmd) return run_audit(domain, profile_id, solution, use_oracle, radial, out, timing);
    if (*pf_cmd) return run_pfunction(domain, solution, use_oracle, radial, out, timing);
    if (*rig_cmd) return run_rigidity(config_path, out_override, contrast, timing);
    if (*conv_cmd) return run_convergence(config_path, out_override, timing);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return failure;
}
