#pragma once

#include "serrin/fields.hpp"
#include "serrin/identity_auditor.hpp"
#include "serrin/mixed_bvp_solver.hpp"
#include "serrin/quadrature.hpp"
#include "serrin/radial_oracles.hpp"
#include "serrin/sector_mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace serrin {

/// P(u) = |grad u|^2 + (2/N) u + K u^2 per cell, with the metric gradient.
inline ScalarField p_field(const ScalarField& u, int N, int K) {
  const SectorGrid& g = *u.grid;
  return ScalarField::sample(u.grid, [&](int c) {
    const Eigen::Vector2d du = coordinate_gradient(g, u.view(), c, EdgeRule::Solution);
    return metric_norm2(g.cell_metric(c), du) + (2.0 / N) * u[c] + K * u[c] * u[c];
  });
}

/// P from analytic derivatives of a radial space-form solution, per cell.
inline ScalarField p_field(const GridPtr& grid, const RadialSolutionSpaceForm& oracle) {
  const int N = oracle.dimension();
  const int K = oracle.space_form().curvature();
  return ScalarField::sample(grid, [&](int c) {
    const double d = grid->r(c);
    const double u = oracle.u(d);
    const double du = oracle.du(d);
    return du * du + (2.0 / N) * u + K * u * u;
  });
}

struct SubharmonicityProbe {
  double min_laplacian = 0.0;
  double violation_fraction = 0.0;  // cells with Delta P < -tol
  double tolerance = 0.0;
  int cells = 0;
};

/// Discrete Laplace-Beltrami of P on interior cells with the solver's stencil.
inline SubharmonicityProbe subharmonicity_probe(const ScalarField& P, std::optional<double> tol = std::nullopt) {
  const SectorGrid& g = *P.grid;
  const FluxOperator op(P.grid);
  SubharmonicityProbe out;
  out.tolerance = tol.value_or(tol_discrete(g, 1.0));
  out.min_laplacian = std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!g.is_interior(c)) continue;
    const double lap = op.laplace_beltrami_interior(P.view(), c);
    out.min_laplacian = std::min(out.min_laplacian, lap);
    bad += lap < -out.tolerance ? 1 : 0;
    ++out.cells;
  }
  if (out.cells == 0) out.min_laplacian = 0.0;
  out.violation_fraction = out.cells ? static_cast<double>(bad) / out.cells : 0.0;
  return out;
}

struct MaxPrincipleResult {
  double max_P = 0.0;
  double c_squared = 0.0;
  double max_wall_dnu_P = 0.0;  // largest outward derivative of P over wall faces
  double tolerance = 0.0;
  double below_fraction = 0.0;  // share of cells with P < c^2 - tol
  double max_gamma0_P = 0.0;    // max over Gamma0 faces of |d_nu u|^2, the value of P there
  bool bound_holds = false;     // max P <= c^2 + tol
  bool boundary_bound_holds = false;  // max P <= max_Gamma0 P + tol
  bool wall_sign_holds = false;  // d_nu P <= tol on walls
};

/// Outward normal derivative of cell data at each wall face, from the
/// one-sided quadratic through the first three cell centres off the wall.
inline std::vector<double> wall_normal_derivative(const ScalarField& v) {
  const SectorGrid& g = *v.grid;
  const double dt = g.dtheta();
  const std::array<double, 3> nodes{0.5 * dt, 1.5 * dt, 2.5 * dt};
  const auto w = fd_weights(0.0, nodes, 1);
  std::vector<double> out;
  for (const auto& face : g.faces()) {
    if (face.tag != BoundaryTag::Gamma1) continue;
    const int i = g.radial_index(face.cell);
    const bool low = face.side == FaceSide::WallLow;
    double v_t = 0.0;
    for (int q = 0; q < 3; ++q) {
      const int j = low ? q : g.nt() - 1 - q;
      // nodes measured away from the wall; flip the sign on the high wall
      v_t += (low ? 1.0 : -1.0) * w[static_cast<std::size_t>(q)] * v[g.index(i, j)];
    }
    const double v_s = g.d_s(i, low ? 0 : g.nt() - 1, EdgeRule::OneSided).apply(v.view());
    const Metric m = g.metric(face.s, face.theta);
    // nu = -/+ d theta / |d theta|; d_nu v = -/+ g^{theta i} v_i / sqrt(g^{theta theta})
    const double sign = low ? -1.0 : 1.0;
    out.push_back(sign * (m.inv_st * v_s + m.inv_tt * v_t) / std::sqrt(m.inv_tt));
  }
  return out;
}

/// max P <= c^2 in the domain and d_nu P <= 0 on the walls. With u = 0 on
/// Gamma0, P equals |d_nu u|^2 there, so the bound against the largest Gamma0
/// value holds for any solution while the bound against c^2 needs constant
/// Neumann data; both are reported.
inline MaxPrincipleResult max_principle_check(const ScalarField& u, const ScalarField& P, double c,
                                              std::optional<double> tol = std::nullopt) {
  const SectorGrid& g = *P.grid;
  MaxPrincipleResult out;
  for (double d : normal_derivative_gamma0(u)) out.max_gamma0_P = std::max(out.max_gamma0_P, d * d);
  out.c_squared = c * c;
  out.tolerance = tol.value_or(tol_discrete(g, std::max(out.c_squared, 1e-300)));
  out.max_P = *std::max_element(P.values.begin(), P.values.end());
  int below = 0;
  for (double p : P.values) below += p < out.c_squared - out.tolerance ? 1 : 0;
  out.below_fraction = static_cast<double>(below) / g.cell_count();
  const auto dn = wall_normal_derivative(P);
  out.max_wall_dnu_P = dn.empty() ? 0.0 : *std::max_element(dn.begin(), dn.end());
  out.bound_holds = out.max_P <= out.c_squared + out.tolerance;
  out.boundary_bound_holds = out.max_P <= out.max_gamma0_P + out.tolerance;
  out.wall_sign_holds = out.max_wall_dnu_P <= out.tolerance;
  return out;
}

struct Step3Result {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double relative = 0.0;
};

inline Step3Result finish_step3(double lhs, double rhs) {
  Step3Result out{lhs, rhs, lhs - rhs, 0.0};
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  out.relative = scale > 0.0 ? std::abs(out.residual) / scale : 0.0;
  return out;
}

/// c^2 int h_dot  against  (1 + 2/N)(int h_dot u - K int h u d_r u), by cell
/// quadrature; c is supplied (normally the measured Gamma0 mean).
inline Step3Result step3_identity(const ScalarField& u, int N, int K, double c) {
  const SectorGrid& g = *u.grid;
  const SpaceForm& sf = g.space_form();
  double a = 0.0, b = 0.0, d = 0.0;
  for (int c_ = 0; c_ < g.cell_count(); ++c_) {
    const double r = g.r(c_);
    const double vol = g.volume(c_);
    const int i = g.radial_index(c_);
    const int j = g.angular_index(c_);
    // d_r at fixed theta is d_s / R(theta)
    const double u_r = g.d_s(i, j, EdgeRule::Solution).apply(u.view()) / g.radius_at(g.theta(j));
    a += vol * sf.h_dot(r);
    b += vol * sf.h_dot(r) * u[c_];
    d += vol * sf.h(r) * u[c_] * u_r;
  }
  return finish_step3(c * c * a, (1.0 + 2.0 / N) * (b - K * d));
}

/// The same identity for a radial oracle by adaptive radial quadrature with
/// the volume weight h^(N-1); the angular factor is common to both sides.
inline Step3Result step3_identity(const RadialSolutionSpaceForm& oracle) {
  const SpaceForm& sf = oracle.space_form();
  const int N = oracle.dimension();
  const int K = sf.curvature();
  const double R = oracle.radius();
  const double c = oracle.overdetermined_constant();
  auto w = [&](double r) { return std::pow(sf.h(r), N - 1); };
  const double a = adaptive_integrate([&](double r) { return sf.h_dot(r) * w(r); }, 0.0, R);
  const double b = adaptive_integrate([&](double r) { return sf.h_dot(r) * oracle.u(r) * w(r); }, 0.0, R);
  const double d = adaptive_integrate([&](double r) { return sf.h(r) * oracle.u(r) * oracle.du(r) * w(r); }, 0.0, R);
  return finish_step3(c * c * a, (1.0 + 2.0 / N) * (b - K * d));
}

/// Norm of E = Hess u - lambda g with lambda = -1/N - K u, as
/// sqrt(g^{ik} g^{jl} E_ij E_kl), from coordinate derivatives and Christoffel symbols.
inline double hessian_defect_norm(const Metric& m, const Christoffel& G, const Eigen::Vector2d& du,
                                  const Eigen::Matrix2d& d2u, double lambda) {
  Eigen::Matrix2d g;
  g << m.g_ss, m.g_st, m.g_st, m.g_tt;
  Eigen::Matrix2d ginv;
  ginv << m.inv_ss, m.inv_st, m.inv_st, m.inv_tt;
  Eigen::Matrix2d H;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) H(i, j) = d2u(i, j) - G[0][i][j] * du[0] - G[1][i][j] * du[1];
  const Eigen::Matrix2d E = H - lambda * g;
  const Eigen::Matrix2d M = ginv * E * ginv * E.transpose();
  return std::sqrt(std::max(0.0, M.trace()));
}

/// Max over interior cells of the covariant Hessian's departure from (-1/N - K u) g.
inline double hessian_proportionality_defect(const ScalarField& u, int N, int K) {
  const SectorGrid& g = *u.grid;
  double worst = 0.0;
  for (int c = 0; c < g.cell_count(); ++c) {
    if (!g.is_interior(c)) continue;
    const int i = g.radial_index(c);
    const int j = g.angular_index(c);
    const double s = g.s(i);
    const double th = g.theta(j);
    const auto v = u.view();
    const Eigen::Vector2d du(g.d_s(i, j, EdgeRule::Solution).apply(v), g.d_theta(i, j, EdgeRule::Solution).apply(v));
    Eigen::Matrix2d d2u;
    const double ust = g.d_st(i, j, EdgeRule::Solution).apply(v);
    d2u << g.d_ss(i, j, EdgeRule::Solution).apply(v), ust, ust, g.d_tt(i, j, EdgeRule::Solution).apply(v);
    const double lambda = -1.0 / N - K * u[c];
    worst = std::max(worst, hessian_defect_norm(g.metric(s, th), g.christoffel(s, th), du, d2u, lambda));
  }
  return worst;
}

/// Same defect for a radial oracle with analytic derivatives, in geodesic
/// polar coordinates (metric diag(1, h^2)): sampled at the grid's cells.
inline double hessian_proportionality_defect(const GridPtr& grid, const RadialSolutionSpaceForm& oracle) {
  const SpaceForm& sf = oracle.space_form();
  const int N = oracle.dimension();
  const int K = sf.curvature();
  double worst = 0.0;
  for (int c = 0; c < grid->cell_count(); ++c) {
    const double r = grid->r(c);
    const double h = sf.h(r);
    const double lambda = -1.0 / N - K * oracle.u(r);
    const double e_rr = oracle.d2u(r) - lambda;
    const double e_tt = h * sf.h_dot(r) * oracle.du(r) - lambda * h * h;
    worst = std::max(worst, std::sqrt(e_rr * e_rr + e_tt * e_tt / (h * h * h * h)));
  }
  return worst;
}

/// Solves f'' = -1/N - K f, f(0) = u_p, f'(0) = 0 by classical RK4 with steps
/// no longer than max_step, returning f at the requested abscissae (any order).
inline std::vector<double> obata_ode_profile(int N, int K, double u_p, std::span<const double> s_grid,
                                             double max_step = 1e-3) {
  if (N < 1) throw std::invalid_argument("dimension must be >= 1");
  std::vector<std::size_t> order(s_grid.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!(s_grid[k] >= 0.0)) throw std::invalid_argument("obata_ode_profile needs s >= 0");
    order[k] = k;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s_grid[a] < s_grid[b]; });
  auto rhs = [&](const std::array<double, 2>& y) { return std::array<double, 2>{y[1], -1.0 / N - K * y[0]}; };
  std::vector<double> out(s_grid.size());
  std::array<double, 2> y{u_p, 0.0};
  double s = 0.0;
  for (std::size_t idx : order) {
    const double target = s_grid[idx];
    const double span = target - s;
    const int steps = std::max(0, static_cast<int>(std::ceil(span / max_step)));
    const double h = steps ? span / steps : 0.0;
    for (int q = 0; q < steps; ++q) {
      const auto k1 = rhs(y);
      const auto k2 = rhs({y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]});
      const auto k3 = rhs({y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]});
      const auto k4 = rhs({y[0] + h * k3[0], y[1] + h * k3[1]});
      y[0] += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      y[1] += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    }
    s = target;
    out[idx] = y[0];
  }
  return out;
}

/// Closed form of the same initial value problem:
/// u_p - s^2/(2N) for K = 0, otherwise -1/(NK) + (u_p + 1/(NK)) h_dot(s).
inline double obata_closed_form(int N, int K, double u_p, double s) {
  if (K == 0) return u_p - s * s / (2.0 * N);
  const double a = 1.0 / (N * static_cast<double>(K));
  return -a + (u_p + a) * SpaceForm(K).h_dot(s);
}

/// Everything the P-function argument produces for one field.
struct PFieldReport {
  ScalarField P;
  double c = 0.0;
  double c_squared = 0.0;
  double c_spread = 0.0;
  double max_P = 0.0;
  double max_abs_P_minus_c2 = 0.0;
  SubharmonicityProbe laplacian;
  MaxPrincipleResult max_principle;
  Step3Result step3;
  double hessian_defect = 0.0;
  AuditReport verdicts;
};

struct PFunctionOptions {
  int dimension = 2;
  /// Treat the field as a radial oracle: demand P constant and equalities.
  bool expect_radial = false;
  std::optional<double> tol;
  double step3_tol = 1e-2;
};

/// Runs the P-function audits on a solution of Delta u + N K u = -1. The
/// constant c is the length-weighted mean of -d_nu u over Gamma0.
inline PFieldReport pfunction_audit(const ScalarField& u, const PFunctionOptions& opts = {}) {
  const SectorGrid& g = *u.grid;
  const int N = opts.dimension;
  const int K = g.space_form().curvature();
  PFieldReport rep;
  const CConsistency stats = gamma0_statistics(g, normal_derivative_gamma0(u));
  rep.c = stats.c_mean;
  rep.c_squared = rep.c * rep.c;
  rep.c_spread = stats.spread;
  rep.P = p_field(u, N, K);
  rep.max_P = *std::max_element(rep.P.values.begin(), rep.P.values.end());
  for (double p : rep.P.values) rep.max_abs_P_minus_c2 = std::max(rep.max_abs_P_minus_c2, std::abs(p - rep.c_squared));
  const double tol = opts.tol.value_or(tol_discrete(g, std::max(rep.c_squared, 1e-300)));
  rep.laplacian = subharmonicity_probe(rep.P, opts.tol.value_or(tol_discrete(g, 1.0)));
  rep.max_principle = max_principle_check(u, rep.P, rep.c, tol);
  rep.step3 = step3_identity(u, N, K, rep.c);
  rep.hessian_defect = hessian_proportionality_defect(u, N, K);

  auto& e = rep.verdicts.entries;
  rep.verdicts.total_cells = g.cell_count();
  e.push_back({"p_constancy", {{"max_abs_P_minus_c2", rep.max_abs_P_minus_c2}, {"c2", rep.c_squared}}, tol,
               !opts.expect_radial || rep.max_abs_P_minus_c2 <= tol, !opts.expect_radial,
               opts.expect_radial ? "radial field: P constant" : "measured"});
  e.push_back({"subharmonicity",
               {{"min_laplacian_P", rep.laplacian.min_laplacian},
                {"violation_fraction", rep.laplacian.violation_fraction},
                {"cells", double(rep.laplacian.cells)}},
               rep.laplacian.tolerance, rep.laplacian.min_laplacian >= -rep.laplacian.tolerance, false,
               "interior cells, solver stencil"});
  e.push_back({"max_principle",
               {{"max_P", rep.max_principle.max_P},
                {"c2", rep.max_principle.c_squared},
                {"below_fraction", rep.max_principle.below_fraction}},
               tol, !opts.expect_radial || rep.max_principle.bound_holds, !opts.expect_radial,
               opts.expect_radial ? "max P <= c^2" : "max P against c^2 measured; needs constant Neumann data"});
  e.push_back({"max_principle_gamma0",
               {{"max_P", rep.max_principle.max_P}, {"max_gamma0_P", rep.max_principle.max_gamma0_P}}, tol,
               rep.max_principle.boundary_bound_holds, false, "max P attained on Gamma0"});
  e.push_back({"wall_normal_derivative_P", {{"max_dnu_P", rep.max_principle.max_wall_dnu_P}}, tol,
               rep.max_principle.wall_sign_holds, false, "d_nu P <= 0 on the walls"});
  AuditEntry s3{"step3_identity",
                {{"lhs", rep.step3.lhs}, {"rhs", rep.step3.rhs}, {"relative", rep.step3.relative}},
                opts.step3_tol,
                true,
                false,
                ""};
  if (opts.expect_radial) {
    s3.pass = rep.step3.relative <= opts.step3_tol;
    s3.note = "radial field: equality";
  } else {
    s3.informational = true;
    s3.note = "measured; lhs - rhs = int h_dot (c^2 - P) has no fixed sign without constant Neumann data";
  }
  e.push_back(s3);
  e.push_back({"hessian_proportionality", {{"defect", rep.hessian_defect}}, tol,
               !opts.expect_radial || rep.hessian_defect <= tol, !opts.expect_radial,
               opts.expect_radial ? "radial field" : "measured"});
  return rep;
}

}  // namespace serrin
