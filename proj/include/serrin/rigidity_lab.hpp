#pragma once

#include "serrin/identity_auditor.hpp"
#include "serrin/mixed_bvp_solver.hpp"
#include "serrin/operator_profiles.hpp"
#include "serrin/pfunction_auditor.hpp"
#include "serrin/radial_oracles.hpp"
#include "serrin/sector_mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace serrin {

struct ExperimentConfig {
  std::string space_form = "euclidean";
  std::string profile = "laplacian";
  double alpha = std::numbers::pi / 2.0;
  double R0 = 1.0;
  std::vector<double> epsilons{0.0, 0.05, 0.1, 0.2};
  int k = 2;
  int nr = 64;
  int nt = 64;
  /// Grid levels (cells per direction) for convergence studies.
  std::vector<int> grids{32, 64, 128};
  double linear_tol = 1e-9;
  double picard_tol = 1e-8;
  std::optional<double> omega;
  /// sigma(0) <= sigma_rel_tol * c is the symmetric-domain check.
  double sigma_rel_tol = 1e-2;
  /// Allow alpha > pi in a deviation scan.
  bool convexity_off = false;
  std::string output_dir = ".";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Maximum worker threads: SERRIN_THREADS if set and positive, else the
/// hardware concurrency.
inline unsigned worker_limit() {
  if (const char* env = std::getenv("SERRIN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on up to worker_limit() threads. Each job
/// writes only its own slot, so the result does not depend on scheduling.
template <typename Job>
void run_indexed(std::size_t count, Job&& job) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_limit(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline GridPtr experiment_grid(const ExperimentConfig& cfg, double epsilon, int nr, int nt) {
  return build_grid(ConeSection(SpaceForm::from_name(cfg.space_form), cfg.alpha), nr, nt, {cfg.R0, epsilon, cfg.k});
}

/// Linear space-form solver for the Laplacian (any K), Picard for other
/// profiles (K = 0 only).
inline SolveResult solve_experiment(const GridPtr& grid, const OperatorProfile& profile, const ExperimentConfig& cfg) {
  const int K = grid->space_form().curvature();
  if (profile.is_laplacian) return solve_linear_spaceform(grid, 2, K, {cfg.linear_tol});
  if (K != 0) throw std::invalid_argument("non-Laplacian profiles are solved on Euclidean grids only");
  PicardOptions po;
  po.tol = cfg.picard_tol;
  po.omega = cfg.omega;
  return solve_Lf(grid, profile, po);
}

struct RigidityRow {
  double epsilon = 0.0;
  double sigma = 0.0;      // length-weighted std of -d_nu u over Gamma0
  double sigma_max = 0.0;  // max |(-d_nu u) - c_mean|
  double c_mean = 0.0;
  double c_formula = 0.0;
  double defect = 0.0;  // ||W + Id/N|| (K = 0) or Hessian defect (K != 0)
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  double audit_pass_rate = 0.0;
  bool pass = false;
  std::string message;
  AuditReport audits;
};

struct RigidityReport {
  ExperimentConfig config;
  std::string grid_hash;  // hash of the epsilon = first entry grid
  std::vector<RigidityRow> rows;
  bool sigma_increasing = false;
  bool symmetric_case_small = false;  // sigma(0) <= sigma_rel_tol * c when epsilon = 0 is scanned
};

inline double pass_rate(const AuditReport& rep) {
  int total = 0, ok = 0;
  for (const auto& e : rep.entries) {
    if (e.informational) continue;
    ++total;
    ok += e.pass ? 1 : 0;
  }
  return total ? static_cast<double>(ok) / total : 1.0;
}

/// Audits for one solved field: identities and W on Euclidean grids,
/// the P-function set on space forms.
inline AuditReport audit_field(const ScalarField& u, const OperatorProfile& profile, bool radial, double* defect) {
  const int K = u.grid->space_form().curvature();
  if (K == 0) {
    IdentityAuditOptions io;
    io.expect_radial = radial;
    AuditReport rep = audit_identities(u, profile, io);
    if (defect) *defect = rep.find("W_radial_defect")->values.at("max_norm_W_plus_id_over_N");
    return rep;
  }
  PFunctionOptions po;
  po.expect_radial = radial;
  PFieldReport pr = pfunction_audit(u, po);
  if (defect) *defect = pr.hessian_defect;
  return pr.verdicts;
}

inline void validate_scan(const ExperimentConfig& cfg) {
  if (cfg.epsilons.empty()) throw std::invalid_argument("perturbation list is empty");
  for (double e : cfg.epsilons)
    if (!(e >= 0.0)) throw std::invalid_argument("perturbation amplitudes must be >= 0");
}

/// One row per epsilon: solve, measure the Neumann-data spread, audit.
/// Solver failures are recorded in their row and do not stop the scan.
inline RigidityReport deviation_scan(const ExperimentConfig& cfg) {
  validate_scan(cfg);
  if (!cfg.convexity_off && cfg.alpha > std::numbers::pi) {
    throw std::invalid_argument("deviation scan needs a convex cone (alpha <= pi) unless convexity_off is set");
  }
  const OperatorProfile profile = make_profile(cfg.profile);
  RigidityReport rep;
  rep.config = cfg;
  rep.rows.resize(cfg.epsilons.size());
  rep.grid_hash = experiment_grid(cfg, cfg.epsilons.front(), cfg.nr, cfg.nt)->hash();

  run_indexed(cfg.epsilons.size(), [&](std::size_t i) {
    RigidityRow& row = rep.rows[i];
    row.epsilon = cfg.epsilons[i];
    const GridPtr grid = experiment_grid(cfg, row.epsilon, cfg.nr, cfg.nt);
    const SolveResult sol = solve_experiment(grid, profile, cfg);
    row.converged = sol.report.converged;
    row.iterations = sol.report.iterations;
    row.residual = sol.report.final_residual;
    row.message = sol.report.message;
    const CConsistency cc = c_consistency(sol.u, profile);
    row.sigma = cc.spread;
    row.sigma_max = cc.max_deviation;
    row.c_mean = cc.c_mean;
    row.c_formula = cc.c_formula;
    row.audits = audit_field(sol.u, profile, row.epsilon == 0.0, &row.defect);
    row.audit_pass_rate = pass_rate(row.audits);
    row.pass = row.converged && row.audits.all_pass();
  });

  rep.sigma_increasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    if (!(b.epsilon > a.epsilon && b.sigma > a.sigma)) rep.sigma_increasing = false;
  }
  rep.symmetric_case_small = true;
  for (const auto& row : rep.rows) {
    if (row.epsilon == 0.0) rep.symmetric_case_small = row.sigma <= cfg.sigma_rel_tol * std::abs(row.c_mean);
  }
  return rep;
}

struct ContrastRow {
  double epsilon = 0.0;
  bool converged = false;
  std::optional<double> inequality_gap;   // Euclidean grids
  std::optional<double> inequality_scale;
  std::optional<double> max_wall_dnu_P;   // Laplacian fields
  bool equality_audits_pass = true;       // radial case only
  AuditReport audits;
};

struct ContrastReport {
  ExperimentConfig config;
  bool convex = false;
  std::vector<ContrastRow> rows;
};

/// Same audits with the convexity hypothesis dropped; the signs of the
/// integral inequality gap and of d_nu P on the walls are recorded, not judged.
inline ContrastReport convexity_contrast(const ExperimentConfig& cfg) {
  validate_scan(cfg);
  if (!(cfg.alpha >= std::numbers::pi && cfg.alpha < 2.0 * std::numbers::pi)) {
    throw std::invalid_argument("convexity contrast needs alpha in [pi, 2 pi)");
  }
  const OperatorProfile profile = make_profile(cfg.profile);
  ContrastReport rep;
  rep.config = cfg;
  rep.convex = cfg.alpha <= std::numbers::pi;
  rep.rows.resize(cfg.epsilons.size());
  run_indexed(cfg.epsilons.size(), [&](std::size_t i) {
    ContrastRow& row = rep.rows[i];
    row.epsilon = cfg.epsilons[i];
    const GridPtr grid = experiment_grid(cfg, row.epsilon, cfg.nr, cfg.nt);
    const SolveResult sol = solve_experiment(grid, profile, cfg);
    row.converged = sol.report.converged;
    const bool radial = row.epsilon == 0.0;
    row.audits = audit_field(sol.u, profile, radial, nullptr);
    if (grid->space_form().curvature() == 0) {
      const MatrixField W = hessian_W_field(sol.u, profile);
      const InequalityGap ig = integral_inequality_gap(sol.u, W, profile);
      row.inequality_gap = ig.gap;
      row.inequality_scale = ig.scale;
    }
    if (profile.is_laplacian) {
      const ScalarField P = p_field(sol.u, 2, grid->space_form().curvature());
      const auto dn = wall_normal_derivative(P);
      row.max_wall_dnu_P = *std::max_element(dn.begin(), dn.end());
      if (grid->space_form().curvature() == 0) {
        // P-function equalities for the radial field on the Euclidean grid
        PFunctionOptions po;
        po.expect_radial = radial;
        row.audits.append(pfunction_audit(sol.u, po).verdicts);
      }
    }
    if (radial) row.equality_audits_pass = row.converged && row.audits.all_pass();
  });
  return rep;
}

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double linf = 0.0;
  double l2 = 0.0;
  std::optional<double> order_linf;
  std::optional<double> order_l2;
  double c_error = 0.0;  // |mean(-d_nu u) - c|
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ConvergenceReport {
  ExperimentConfig config;
  std::vector<ConvergenceRow> rows;
  bool errors_decreasing = false;
};

/// Errors against the radial oracle on the symmetric domain over dyadic grids.
inline ConvergenceReport convergence_study(const ExperimentConfig& cfg) {
  if (cfg.grids.size() < 3) throw std::invalid_argument("convergence study needs at least 3 grid levels");
  for (std::size_t i = 1; i < cfg.grids.size(); ++i) {
    if (cfg.grids[i] != 2 * cfg.grids[i - 1]) throw std::invalid_argument("convergence grids must be dyadic");
  }
  if (std::any_of(cfg.epsilons.begin(), cfg.epsilons.end(), [](double e) { return e != 0.0; })) {
    throw std::invalid_argument("convergence study runs on the unperturbed domain (epsilon = 0)");
  }
  const OperatorProfile profile = make_profile(cfg.profile);
  const SpaceForm sf = SpaceForm::from_name(cfg.space_form);
  std::function<double(double)> exact;
  double c_exact = 0.0;
  if (sf.curvature() == 0) {
    auto o = std::make_shared<RadialSolutionEuclidean>(profile, 2, cfg.R0);
    exact = [o](double r) { return o->u(r); };
    c_exact = o->overdetermined_constant();
  } else {
    if (!profile.is_laplacian) throw std::invalid_argument("space-form oracles exist for the Laplacian only");
    auto o = std::make_shared<RadialSolutionSpaceForm>(sf, 2, cfg.R0);
    exact = [o](double r) { return o->u(r); };
    c_exact = o->overdetermined_constant();
  }

  ConvergenceReport rep;
  rep.config = cfg;
  rep.rows.resize(cfg.grids.size());
  run_indexed(cfg.grids.size(), [&](std::size_t i) {
    ConvergenceRow& row = rep.rows[i];
    row.n = cfg.grids[i];
    const GridPtr grid = experiment_grid(cfg, 0.0, row.n, row.n);
    row.h = grid->mesh_size();
    const SolveResult sol = solve_experiment(grid, profile, cfg);
    row.converged = sol.report.converged;
    row.residual = sol.report.final_residual;
    row.iterations = sol.report.iterations;
    double l2 = 0.0;
    for (int c = 0; c < grid->cell_count(); ++c) {
      const double e = sol.u[c] - exact(grid->r(c));
      row.linf = std::max(row.linf, std::abs(e));
      l2 += grid->volume(c) * e * e;
    }
    row.l2 = std::sqrt(l2);
    row.c_error = std::abs(gamma0_statistics(*grid, normal_derivative_gamma0(sol.u)).c_mean - c_exact);
  });
  rep.errors_decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    auto& r = rep.rows[i];
    const auto& p = rep.rows[i - 1];
    if (r.linf > 0.0 && p.linf > 0.0) r.order_linf = std::log2(p.linf / r.linf);
    if (r.l2 > 0.0 && p.l2 > 0.0) r.order_l2 = std::log2(p.l2 / r.l2);
    if (!(r.linf < p.linf)) rep.errors_decreasing = false;
  }
  return rep;
}

}  // namespace serrin
