#pragma once

#include "serrin/fields.hpp"
#include "serrin/mixed_bvp_solver.hpp"
#include "serrin/operator_profiles.hpp"
#include "serrin/sector_mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace serrin {

/// One named check: recorded values, the tolerance it was judged against and
/// the verdict. Informational entries carry no contract and always pass.
struct AuditEntry {
  std::string name;
  std::map<std::string, double> values;
  double tolerance = 0.0;
  bool pass = true;
  bool informational = false;
  std::string note;
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  int masked_cells = 0;
  int total_cells = 0;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.pass; });
  }
  [[nodiscard]] const AuditEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  void append(const AuditReport& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    masked_cells = std::max(masked_cells, other.masked_cells);
    total_cells = std::max(total_cells, other.total_cells);
  }
};

/// Default discrete tolerance: 5 * (grid size) * (field scale).
inline double tol_discrete(const SectorGrid& grid, double scale) { return 5.0 * grid.mesh_size() * scale; }

// --- symmetric functions of matrices ----------------------------------------

inline void require_square(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument("matrix must be square and non-empty");
}

/// Second elementary symmetric function of the eigenvalues: the sum of all
/// principal 2x2 minors, computed as ((Tr A)^2 - Tr(A^2)) / 2.
inline double s2_of_matrix(const Eigen::MatrixXd& A) {
  require_square(A);
  const double tr = A.trace();
  return 0.5 * (tr * tr - (A * A).trace());
}

/// S^2_ij(A) = -a_ji + delta_ij Tr A.
inline Eigen::MatrixXd s2_minor_form(const Eigen::MatrixXd& A) {
  require_square(A);
  const Eigen::Index n = A.rows();
  return Eigen::MatrixXd(-A.transpose() + A.trace() * Eigen::MatrixXd::Identity(n, n));
}

/// | (1/2) sum_ij S^2_ij(A) a_ij - S2(A) |, which vanishes identically.
inline double s2_consistency(const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd S = s2_minor_form(A);
  return std::abs(0.5 * (S.array() * A.array()).sum() - s2_of_matrix(A));
}

/// (N-1)/(2N) (Tr A)^2 - S2(A).
inline double newton_gap(const Eigen::MatrixXd& A) {
  require_square(A);
  const double n = static_cast<double>(A.rows());
  const double tr = A.trace();
  return (n - 1.0) / (2.0 * n) * tr * tr - s2_of_matrix(A);
}

struct NewtonWitness {
  Eigen::MatrixXd B;  // symmetric positive semidefinite
  Eigen::MatrixXd C;  // symmetric
};

struct NewtonCheck {
  double gap = 0.0;
  bool equality_case = false;      // |Tr A| > 0 and gap <= tol
  double proportionality = 0.0;    // || A - (Tr A / N) Id ||_inf
  double equality_tolerance = 0.0;
  bool equality_holds = true;      // meaningful only when equality_case
};

/// Newton's inequality with an optional witness A = B C.
///
/// The witness is validated (symmetry, B >= 0 and the product) and rejected
/// with std::invalid_argument if any part fails at a scale-relative 1e-12.
/// For a witnessed product the eigenvalues of A are real and the gap equals half
/// their squared spread around the mean, so a gap at the tolerance level bounds
/// the spread by sqrt(2 gap); that, plus rounding, is the equality tolerance.
inline NewtonCheck newton_gap(const Eigen::MatrixXd& A, const std::optional<NewtonWitness>& witness,
                              double tol = 1e-12) {
  require_square(A);
  const Eigen::Index n = A.rows();
  const double scale = 1.0 + A.cwiseAbs().maxCoeff();
  if (witness) {
    const auto& B = witness->B;
    const auto& C = witness->C;
    if (B.rows() != n || B.cols() != n || C.rows() != n || C.cols() != n) {
      throw std::invalid_argument("witness dimensions do not match A");
    }
    const double bs = 1.0 + B.cwiseAbs().maxCoeff();
    const double cs = 1.0 + C.cwiseAbs().maxCoeff();
    if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * bs) throw std::invalid_argument("witness B is not symmetric");
    if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cs) throw std::invalid_argument("witness C is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * bs) throw std::invalid_argument("witness B is not positive semidefinite");
    if ((A - B * C).cwiseAbs().maxCoeff() > 1e-12 * bs * cs * static_cast<double>(n)) {
      throw std::invalid_argument("A differs from the witness product B C");
    }
  }
  NewtonCheck out;
  out.gap = newton_gap(A);
  const double tr = A.trace();
  const Eigen::MatrixXd D = A - (tr / static_cast<double>(n)) * Eigen::MatrixXd::Identity(n, n);
  out.proportionality = D.rowwise().lpNorm<1>().maxCoeff();
  out.equality_case = std::abs(tr) > 0.0 && out.gap <= tol * scale * scale;
  out.equality_tolerance = std::sqrt(2.0 * std::max(out.gap, 0.0)) + 1e-12 * scale;
  if (out.equality_case) out.equality_holds = out.proportionality <= out.equality_tolerance;
  return out;
}

// --- audits on fields ---------------------------------------------------------

/// Power profiles other than the Laplacian degenerate or become singular at
/// zero gradient.
inline bool is_degenerate(const OperatorProfile& profile) {
  return profile.degeneracy_exponent && *profile.degeneracy_exponent != 2.0;
}

inline void require_euclidean(const SectorGrid& grid, const char* what) {
  if (grid.space_form().curvature() != 0) throw std::invalid_argument(std::string(what) + " needs a Euclidean grid");
}

struct AuditWOptions {
  /// Report || W + Id/N ||_inf as a contract (radial reference fields).
  bool expect_radial = false;
  /// Power profile with p != 2: the radial gradient behaves like rho^(1/(p-1))
  /// at the vertex, and differencing it leaves an O(1) error in the first
  /// cells at every resolution, so the pointwise W = -Id/N check is recorded
  /// without a verdict.
  bool degenerate = false;
  /// Tolerance for |Tr W + 1| and ||W + Id/N||; defaults to tol_discrete(grid, 1).
  std::optional<double> tol;
  /// Lower tolerance for the Newton gap; defaults to tol_discrete(grid, 1).
  /// The discrete W of a non-radial field is only approximately a product
  /// DV(grad u) Hess u, so its gap can dip below zero at that level.
  std::optional<double> gap_tol;
};

/// Pointwise audits of W: Tr W = -1 on interior cells, Newton gap >= 0 on all
/// unmasked cells and, for radial references, W = -Id/N.
inline AuditReport audit_W(const MatrixField& W, const AuditWOptions& opts = {}) {
  const SectorGrid& g = *W.grid;
  require_euclidean(g, "audit_W");
  const double n = 2.0;
  const double tol = opts.tol.value_or(tol_discrete(g, 1.0));
  const double gap_tol = opts.gap_tol.value_or(tol_discrete(g, 1.0));
  double trace_dev = 0.0;
  double gap_min = std::numeric_limits<double>::infinity();
  double radial_dev = 0.0;
  int interior_used = 0;
  int used = 0;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!W.usable(c)) continue;
    const Eigen::Matrix2d& w = W.values[static_cast<std::size_t>(c)];
    ++used;
    gap_min = std::min(gap_min, newton_gap(Eigen::MatrixXd(w)));
    radial_dev = std::max(radial_dev, (w + Eigen::Matrix2d::Identity() / n).rowwise().lpNorm<1>().maxCoeff());
    if (W.usable_interior(c)) {
      ++interior_used;
      trace_dev = std::max(trace_dev, std::abs(w.trace() + 1.0));
    }
  }
  if (used == 0) gap_min = 0.0;

  AuditReport rep;
  rep.masked_cells = W.degenerate_count;
  rep.total_cells = g.cell_count();
  rep.entries.push_back({"trace_W", {{"max_abs_trace_plus_one", trace_dev}, {"cells", double(interior_used)}}, tol,
                         trace_dev <= tol, false, "interior unmasked cells"});
  rep.entries.push_back({"newton_gap_W", {{"min_gap", gap_min}, {"cells", double(used)}}, gap_tol,
                         gap_min >= -gap_tol, false, "all unmasked cells"});
  const bool radial_contract = opts.expect_radial && !opts.degenerate;
  AuditEntry radial{"W_radial_defect", {{"max_norm_W_plus_id_over_N", radial_dev}}, tol, true, !radial_contract,
                    radial_contract        ? "radial reference field"
                    : opts.expect_radial ? "measured; degenerate profile, vertex layer does not refine away"
                                         : "measured; no contract off the radial case"};
  if (radial_contract) radial.pass = radial_dev <= tol;
  rep.entries.push_back(radial);
  return rep;
}

struct PohozaevResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double relative = 0.0;  // |residual| / max(|lhs|, |rhs|), 0 when both vanish
};

/// Both sides of the Pohozaev identity
///   int_Omega [(N+1) u - N f(|grad u|)] = int_Gamma0 [f'(|grad u|)|grad u| - f(|grad u|)] x.nu
/// by cell-midpoint and face-midpoint quadrature. On Gamma0, |grad u| is the
/// one-sided normal derivative and x.nu = R nu_r with the computed outer normal.
inline PohozaevResult pohozaev_residual(const ScalarField& u, const OperatorProfile& profile) {
  const SectorGrid& g = *u.grid;
  require_euclidean(g, "pohozaev_residual");
  const double n = 2.0;
  const VectorField grad = gradient_field(u);
  PohozaevResult out;
  for (int c = 0; c < g.cell_count(); ++c) {
    const double t = grad.values[static_cast<std::size_t>(c)].norm();
    out.lhs += g.volume(c) * ((n + 1.0) * u[c] - n * profile.f(t));
  }
  const auto dn = normal_derivative_gamma0(u);
  std::size_t q = 0;
  for (const auto& face : g.faces()) {
    if (face.tag != BoundaryTag::Gamma0) continue;
    const double t = std::abs(dn[q++]);
    const double nu_r = g.outward_normal(face)[0];
    const double x_dot_nu = g.radius_at(face.theta) * nu_r;
    out.rhs += face.length * (profile.f_prime(t) * t - profile.f(t)) * x_dot_nu;
  }
  out.residual = out.lhs - out.rhs;
  const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  out.relative = scale > 0.0 ? std::abs(out.residual) / scale : 0.0;
  return out;
}

struct InequalityGap {
  double gap = 0.0;
  double scale = 0.0;  // integral of the absolute integrands
  double tolerance = 0.0;
  bool equality = false;  // |gap| <= tolerance
  bool convex = true;
};

/// 2 int S2(W) u + int S^2_ij(W) V_i(grad u) u_j over unmasked cells. On
/// convex cones the integral inequality makes this non-negative; equality
/// holds for radial solutions because 2-D walls carry no second fundamental
/// form.
inline InequalityGap integral_inequality_gap(const ScalarField& u, const MatrixField& W, const OperatorProfile& profile,
                                             std::optional<double> tol = std::nullopt) {
  const SectorGrid& g = *u.grid;
  require_euclidean(g, "integral_inequality_gap");
  const VectorField grad = gradient_field(u);
  const VectorField V = mapped_gradient_field(grad, profile);
  InequalityGap out;
  out.convex = cone_convexity(g.cone());
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!W.usable(c)) continue;
    const auto k = static_cast<std::size_t>(c);
    const Eigen::MatrixXd w = W.values[k];
    const double a = 2.0 * s2_of_matrix(w) * u[c];
    const double b = V.values[k].dot(s2_minor_form(w) * grad.values[k]);
    out.gap += g.volume(c) * (a + b);
    out.scale += g.volume(c) * (std::abs(a) + std::abs(b));
  }
  out.tolerance = tol.value_or(tol_discrete(g, out.scale));
  out.equality = std::abs(out.gap) <= out.tolerance;
  return out;
}

struct CConsistency {
  double c_mean = 0.0;    // length-weighted mean of -d_nu u on Gamma0
  double c_formula = 0.0;
  double spread = 0.0;    // length-weighted standard deviation
  double max_deviation = 0.0;
};

inline CConsistency gamma0_statistics(const SectorGrid& g, const std::vector<double>& dn) {
  CConsistency out;
  double wsum = 0.0;
  std::size_t q = 0;
  for (const auto& face : g.faces()) {
    if (face.tag != BoundaryTag::Gamma0) continue;
    out.c_mean += face.length * -dn[q++];
    wsum += face.length;
  }
  out.c_mean /= wsum;
  q = 0;
  double var = 0.0;
  for (const auto& face : g.faces()) {
    if (face.tag != BoundaryTag::Gamma0) continue;
    const double d = -dn[q++] - out.c_mean;
    var += face.length * d * d;
    out.max_deviation = std::max(out.max_deviation, std::abs(d));
  }
  out.spread = std::sqrt(var / wsum);
  return out;
}

/// Measured Neumann data against the value forced by integrating the equation:
/// g'(|Omega| / |Gamma0|) for L_f u = -1 on Euclidean grids, and
/// (|Omega| + N K int u) / |Gamma0| for the linear space-form problem.
inline CConsistency c_consistency(const ScalarField& u, const OperatorProfile& profile) {
  const SectorGrid& g = *u.grid;
  CConsistency out = gamma0_statistics(g, normal_derivative_gamma0(u));
  const int K = g.space_form().curvature();
  if (K == 0) {
    out.c_formula = profile.g_prime(g.area() / g.gamma0_length());
  } else {
    if (!profile.is_laplacian) throw std::invalid_argument("space-form c formula is defined for the Laplacian only");
    double integral = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) integral += g.volume(c) * u[c];
    out.c_formula = (g.area() + 2.0 * K * integral) / g.gamma0_length();
  }
  return out;
}

/// Discrete L2 norm of W over unmasked cells.
inline double w12_diagnostic(const MatrixField& W) {
  const SectorGrid& g = *W.grid;
  double acc = 0.0;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!W.usable(c)) continue;
    acc += g.volume(c) * W.values[static_cast<std::size_t>(c)].squaredNorm();
  }
  return std::sqrt(acc);
}

struct FluxBalance {
  double outflow = 0.0;  // sum over Gamma0 faces of f'(|d_nu u|) * length
  double area = 0.0;
  double relative = 0.0;
};

/// Integrated form of L_f u = -1: the Gamma0 outflow equals |Omega|.
inline FluxBalance flux_balance(const ScalarField& u, const OperatorProfile& profile) {
  const SectorGrid& g = *u.grid;
  require_euclidean(g, "flux_balance");
  const auto dn = normal_derivative_gamma0(u);
  FluxBalance out;
  std::size_t q = 0;
  for (const auto& face : g.faces()) {
    if (face.tag != BoundaryTag::Gamma0) continue;
    out.outflow += face.length * profile.f_prime(std::abs(dn[q++]));
  }
  out.area = g.area();
  out.relative = std::abs(out.outflow - out.area) / out.area;
  return out;
}

struct IdentityAuditOptions {
  bool expect_radial = false;
  std::optional<double> w_tol;
  std::optional<double> gap_tol;
  double pohozaev_tol = 1e-2;
  double flux_tol = 1e-2;
  /// Relative tolerance on the inequality gap (times its integrand scale).
  std::optional<double> inequality_rel_tol;
  double gradient_floor_rel = 1e-8;
};

/// Every Euclidean identity and inequality on one field.
inline AuditReport audit_identities(const ScalarField& u, const OperatorProfile& profile,
                                    const IdentityAuditOptions& opts = {}) {
  const SectorGrid& g = *u.grid;
  require_euclidean(g, "audit_identities");
  const MatrixField W = hessian_W_field(u, profile, opts.gradient_floor_rel);
  AuditWOptions wo;
  wo.expect_radial = opts.expect_radial;
  wo.degenerate = is_degenerate(profile);
  wo.tol = opts.w_tol;
  wo.gap_tol = opts.gap_tol;
  AuditReport rep = audit_W(W, wo);

  const PohozaevResult poh = pohozaev_residual(u, profile);
  rep.entries.push_back({"pohozaev",
                         {{"lhs", poh.lhs}, {"rhs", poh.rhs}, {"residual", poh.residual}, {"relative", poh.relative}},
                         opts.pohozaev_tol, poh.relative <= opts.pohozaev_tol, false, "relative residual"});

  InequalityGap ig = integral_inequality_gap(u, W, profile);
  if (opts.inequality_rel_tol) {
    ig.tolerance = *opts.inequality_rel_tol * ig.scale;
    ig.equality = std::abs(ig.gap) <= ig.tolerance;
  }
  AuditEntry ie{"integral_inequality",
                {{"gap", ig.gap}, {"scale", ig.scale}, {"equality", ig.equality ? 1.0 : 0.0}},
                ig.tolerance,
                true,
                false,
                ""};
  if (ig.convex) {
    ie.pass = ig.gap >= -ig.tolerance;
    if (opts.expect_radial) ie.pass = ie.pass && ig.equality;
    ie.note = opts.expect_radial ? "convex cone, radial field: equality expected" : "convex cone: gap >= -tol";
  } else {
    ie.informational = true;
    ie.note = "non-convex cone: sign recorded, no contract";
  }
  rep.entries.push_back(ie);

  const CConsistency cc = c_consistency(u, profile);
  const double ctol = tol_discrete(g, std::abs(cc.c_formula));
  const bool c_contract = opts.expect_radial || profile.is_laplacian;
  AuditEntry ce{"c_consistency",
                {{"c_mean", cc.c_mean}, {"c_formula", cc.c_formula}, {"spread", cc.spread},
                 {"max_deviation", cc.max_deviation}},
                ctol,
                !c_contract || std::abs(cc.c_mean - cc.c_formula) <= ctol,
                !c_contract,
                c_contract ? "mean of -d_nu u against the integrated equation"
                           : "measured; the mean of -d_nu u and g' of the mean flux differ off the radial case"};
  if (opts.expect_radial) ce.pass = ce.pass && cc.spread <= ctol;
  rep.entries.push_back(ce);

  const FluxBalance fb = flux_balance(u, profile);
  rep.entries.push_back({"flux_balance", {{"outflow", fb.outflow}, {"area", fb.area}, {"relative", fb.relative}},
                         opts.flux_tol, fb.relative <= opts.flux_tol, false, ""});

  rep.entries.push_back({"w12_norm", {{"l2_norm_W", w12_diagnostic(W)}}, 0.0, true, true, "stability diagnostic"});
  return rep;
}

}  // namespace serrin
