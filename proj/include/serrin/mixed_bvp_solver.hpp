#pragma once

#include "serrin/fields.hpp"
#include "serrin/operator_profiles.hpp"
#include "serrin/sector_mesh.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace serrin {

struct SolveReport {
  int iterations = 0;
  double final_residual = std::numeric_limits<double>::infinity();
  std::vector<double> epsilon_schedule;
  std::vector<int> stage_iterations;
  double omega = 1.0;
  bool converged = false;
  std::string message;
};

struct SolveResult {
  ScalarField u;
  SolveReport report;
};

/// Finite-volume discretization of div(a grad u) on a SectorGrid with u = 0 on
/// Gamma0 and zero conormal flux through the walls.
///
/// Every face flux is  length * a * (A_nn D_n u + A_nt D_t u)  where A = sqrt(g) g^{..}
/// in (s, theta) coordinates, D_n is the two-point normal difference and D_t
/// the average of the neighbouring cell-centred tangential derivatives. Face
/// coefficients a are supplied per face; the sparsity pattern is independent
/// of them, so one symbolic factorization serves a whole Picard run.
class FluxOperator {
 public:
  struct Face {
    int left = -1;   // cell on the low side
    int right = -1;  // cell on the high side, -1 on Gamma0
    double length = 0.0;
    double a_nn = 0.0;
    double a_nt = 0.0;
    Stencil d_n;
    Stencil d_t;
    // inverse metric at the face, for |grad u|
    Metric metric{};
    bool radial = true;  // s = const face
  };

  explicit FluxOperator(GridPtr grid) : grid_(std::move(grid)) {
    const SectorGrid& g = *grid_;
    const int nr = g.nr();
    const int nt = g.nt();
    const double ds = g.ds();
    const double dt = g.dtheta();
    // s = const faces at s = (i + 1) ds; the last one is Gamma0.
    for (int j = 0; j < nt; ++j) {
      const double th = g.theta(j);
      for (int i = 0; i < nr; ++i) {
        Face f;
        f.radial = true;
        f.left = g.index(i, j);
        const double sf = (i + 1) * ds;
        const auto A = g.flux_coefficients(sf, th);
        f.length = dt;
        f.a_nn = A.ss;
        f.metric = g.metric(sf, th);
        if (i + 1 < nr) {
          f.right = g.index(i + 1, j);
          f.a_nt = A.st;
          f.d_n.add(f.right, 1.0 / ds);
          f.d_n.add(f.left, -1.0 / ds);
          f.d_t.add(g.d_theta(i, j, EdgeRule::Solution), 0.5);
          f.d_t.add(g.d_theta(i + 1, j, EdgeRule::Solution), 0.5);
        } else {
          // quadratic through u = 0 on the face and the last two centres;
          // the tangential derivative vanishes along Gamma0
          f.d_n.add(f.left, -3.0 / ds);
          f.d_n.add(g.index(i - 1, j), 1.0 / (3.0 * ds));
        }
        faces_.push_back(std::move(f));
      }
    }
    // theta = const interior faces
    for (int j = 0; j + 1 < nt; ++j) {
      const double th = (j + 1) * dt;
      for (int i = 0; i < nr; ++i) {
        Face f;
        f.radial = false;
        f.left = g.index(i, j);
        f.right = g.index(i, j + 1);
        const auto A = g.flux_coefficients(g.s(i), th);
        f.length = ds;
        f.a_nn = A.tt;
        f.a_nt = A.st;
        f.metric = g.metric(g.s(i), th);
        f.d_n.add(f.right, 1.0 / dt);
        f.d_n.add(f.left, -1.0 / dt);
        f.d_t.add(g.d_s(i, j, EdgeRule::Solution), 0.5);
        f.d_t.add(g.d_s(i, j + 1, EdgeRule::Solution), 0.5);
        faces_.push_back(std::move(f));
      }
    }
    build_pattern();
  }

  [[nodiscard]] const GridPtr& grid() const { return grid_; }
  [[nodiscard]] const std::vector<Face>& faces() const { return faces_; }
  [[nodiscard]] std::size_t face_count() const { return faces_.size(); }

  /// |grad u| at every face, from the same differences the fluxes use.
  [[nodiscard]] std::vector<double> face_gradient_norms(std::span<const double> u) const {
    std::vector<double> out(faces_.size());
    for (std::size_t k = 0; k < faces_.size(); ++k) {
      const Face& f = faces_[k];
      const double dn = f.d_n.apply(u);
      const double dt = f.d_t.size() ? f.d_t.apply(u) : 0.0;
      const Eigen::Vector2d du = f.radial ? Eigen::Vector2d(dn, dt) : Eigen::Vector2d(dt, dn);
      out[k] = std::sqrt(std::max(0.0, metric_norm2(f.metric, du)));
    }
    return out;
  }

  /// Matrix of u -> sum of outward fluxes + reaction * vol * u, per cell.
  [[nodiscard]] Eigen::SparseMatrix<double> assemble(std::span<const double> face_coeff, double reaction) const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(pattern_.size());
    const SectorGrid& g = *grid_;
    for (int c = 0; c < g.cell_count(); ++c) trips.emplace_back(c, c, reaction * g.volume(c));
    for (std::size_t k = 0; k < faces_.size(); ++k) {
      const Face& f = faces_[k];
      const double scale = f.length * face_coeff[k];
      auto emit = [&](const Stencil& st, double w) {
        for (std::size_t q = 0; q < st.size(); ++q) {
          const double val = scale * w * st.weight(q);
          trips.emplace_back(f.left, st.index(q), val);
          if (f.right >= 0) trips.emplace_back(f.right, st.index(q), -val);
        }
      };
      emit(f.d_n, f.a_nn);
      emit(f.d_t, f.a_nt);
    }
    // keep the full pattern even where weights vanish
    for (const auto& [r, c] : pattern_) trips.emplace_back(r, c, 0.0);
    Eigen::SparseMatrix<double> A(g.cell_count(), g.cell_count());
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
  }

  /// Max-norm residual of the cell balance  flux sum + reaction u vol + vol,
  /// normalized by the mean cell volume |Omega| / n.
  ///
  /// Dividing each balance by its own volume instead would give the pointwise
  /// residual, whose rounding floor near the vertex grows like eps / (ds dtheta)^2
  /// (about 1e-8 at 128x128) because the vertex cells shrink cubically. The
  /// pointwise values are still available through per_cell.
  [[nodiscard]] double residual(const Eigen::SparseMatrix<double>& A, std::span<const double> u,
                                std::vector<double>* per_cell = nullptr) const {
    const SectorGrid& g = *grid_;
    const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
    const Eigen::VectorXd Au = A * uv;
    const double mean_volume = g.area() / g.cell_count();
    double worst = 0.0;
    if (per_cell) per_cell->assign(u.size(), 0.0);
    for (int c = 0; c < g.cell_count(); ++c) {
      const double balance = Au[c] + g.volume(c);
      if (per_cell) (*per_cell)[static_cast<std::size_t>(c)] = balance / g.volume(c);
      const double r = balance / mean_volume;
      if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(r));
    }
    return worst;
  }

  /// Applies the operator with unit coefficients and no reaction, divided by
  /// the cell volume: the discrete Laplace-Beltrami of arbitrary cell data on
  /// cells whose stencil stays inside the grid.
  [[nodiscard]] double laplace_beltrami_interior(std::span<const double> v, int cell) const {
    const SectorGrid& g = *grid_;
    if (!g.is_interior(cell)) throw std::invalid_argument("laplace_beltrami_interior needs an interior cell");
    const int i = g.radial_index(cell);
    const int j = g.angular_index(cell);
    const int nr = g.nr();
    const std::size_t theta_base = static_cast<std::size_t>(nr) * static_cast<std::size_t>(g.nt());
    auto flux = [&](std::size_t k) {
      const Face& f = faces_[k];
      return f.length * (f.a_nn * f.d_n.apply(v) + f.a_nt * f.d_t.apply(v));
    };
    const auto s_out = static_cast<std::size_t>(j * nr + i);
    const auto t_out = theta_base + static_cast<std::size_t>(j * nr + i);
    const double total = flux(s_out) - flux(s_out - 1) + flux(t_out) - flux(t_out - static_cast<std::size_t>(nr));
    return total / g.volume(cell);
  }

  [[nodiscard]] const std::vector<std::pair<int, int>>& pattern() const { return pattern_; }

 private:
  void build_pattern() {
    std::vector<std::pair<int, int>> entries;
    const SectorGrid& g = *grid_;
    for (int c = 0; c < g.cell_count(); ++c) entries.emplace_back(c, c);
    for (const Face& f : faces_) {
      for (const Stencil* st : {&f.d_n, &f.d_t}) {
        for (std::size_t q = 0; q < st->size(); ++q) {
          entries.emplace_back(f.left, st->index(q));
          if (f.right >= 0) entries.emplace_back(f.right, st->index(q));
        }
      }
    }
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    pattern_ = std::move(entries);
  }

  GridPtr grid_;
  std::vector<Face> faces_;
  std::vector<std::pair<int, int>> pattern_;
};

namespace detail {

class LinearSolver {
 public:
  explicit LinearSolver(const Eigen::SparseMatrix<double>& pattern_matrix) {
    lu_.analyzePattern(pattern_matrix);
  }
  bool solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, Eigen::VectorXd& x) {
    lu_.factorize(A);
    if (lu_.info() != Eigen::Success) return false;
    x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) return false;
    // one step of iterative refinement
    {
      const Eigen::VectorXd r = b - A * x;
      x += lu_.solve(r);
    }
    return x.allFinite();
  }

 private:
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

inline Eigen::VectorXd negative_volumes(const SectorGrid& g) {
  Eigen::VectorXd b(g.cell_count());
  for (int c = 0; c < g.cell_count(); ++c) b[c] = -g.volume(c);
  return b;
}

}  // namespace detail

struct LinearSolveOptions {
  double tol = 1e-9;
};

/// Delta u + N K u = -1 with u = 0 on Gamma0 and d_nu u = 0 on the walls.
///
/// For K = +1 a non-positive solution means the mixed problem is past its first
/// eigenvalue; that is reported as non-convergence rather than returned as a
/// valid solution.
inline SolveResult solve_linear_spaceform(const GridPtr& grid, int dimension, int curvature,
                                          const LinearSolveOptions& opts = {}) {
  if (curvature != grid->space_form().curvature()) {
    throw std::invalid_argument("curvature does not match the grid's space form");
  }
  const FluxOperator op(grid);
  const std::vector<double> ones(op.face_count(), 1.0);
  const double reaction = static_cast<double>(dimension) * curvature;
  const auto A = op.assemble(ones, reaction);

  SolveResult out{ScalarField(grid), {}};
  out.report.epsilon_schedule = {};
  detail::LinearSolver solver(A);
  Eigen::VectorXd x;
  if (!solver.solve(A, detail::negative_volumes(*grid), x)) {
    out.report.message = "linear factorization failed (singular or indefinite operator)";
    out.report.iterations = 1;
    return out;
  }
  out.u.values.assign(x.data(), x.data() + x.size());
  out.report.iterations = 1;
  out.report.stage_iterations = {1};
  out.report.final_residual = op.residual(A, out.u.view());
  out.report.converged = out.report.final_residual <= opts.tol;
  if (!out.report.converged) out.report.message = "residual above tolerance";
  if (curvature == 1) {
    const double umin = *std::min_element(out.u.values.begin(), out.u.values.end());
    if (!(umin > 0.0)) {
      out.report.converged = false;
      out.report.message = "solution not positive: Delta + N K is past its first mixed eigenvalue";
    }
  }
  return out;
}

struct PicardOptions {
  std::vector<double> schedule{1e-1, 1e-2, 1e-3, 1e-4};
  double tol = 1e-8;
  /// Looser target for every stage but the last.
  double stage_tol = 1e-5;
  std::optional<double> omega;
  int max_iters = 400;
};

/// Default under-relaxation. The frozen-coefficient map of a power profile
/// satisfies T(lambda u) = lambda^(2-p) T(u), so along the solution itself it
/// has the eigenvalue 2 - p; omega = 1 / (p - 1) removes that mode for p >= 2
/// (1 for the Laplacian, 0.5 at p = 3). Other profiles use 0.5.
inline double default_omega(const OperatorProfile& profile) {
  if (profile.degeneracy_exponent) {
    const double p = *profile.degeneracy_exponent;
    if (p >= 2.0) return 1.0 / (p - 1.0);
  }
  return 0.5;
}

/// L_f u = -1 on a Euclidean grid by Picard iteration on the epsilon-regularized
/// operator: freeze a = f_eps'(|grad u|)/|grad u| on faces, solve
/// div(a grad u) = -1, relax, and walk down the epsilon schedule with warm
/// starts. The reported residual is that of the last regularized operator.
inline SolveResult solve_Lf(const GridPtr& grid, const OperatorProfile& profile, const PicardOptions& opts = {}) {
  if (grid->space_form().curvature() != 0) {
    throw std::invalid_argument("solve_Lf works on Euclidean grids; use solve_linear_spaceform for K != 0");
  }
  if (opts.schedule.empty()) throw std::invalid_argument("epsilon schedule is empty");
  for (std::size_t k = 0; k < opts.schedule.size(); ++k) {
    if (!(opts.schedule[k] >= 1e-6)) throw std::invalid_argument("epsilon schedule entries must be >= 1e-6");
    if (k > 0 && !(opts.schedule[k] < opts.schedule[k - 1])) {
      throw std::invalid_argument("epsilon schedule must be strictly decreasing");
    }
  }

  const FluxOperator op(grid);
  const std::size_t nf = op.face_count();
  const int n = grid->cell_count();
  const Eigen::VectorXd rhs = detail::negative_volumes(*grid);

  SolveResult out{ScalarField(grid), {}};
  SolveReport& rep = out.report;
  rep.epsilon_schedule = opts.schedule;
  double omega = opts.omega.value_or(default_omega(profile));
  bool halved = false;

  std::vector<double> coeff(nf, 1.0);
  detail::LinearSolver solver(op.assemble(coeff, 0.0));
  std::vector<double>& u = out.u.values;
  Eigen::VectorXd x(n);

  for (std::size_t stage = 0; stage < opts.schedule.size(); ++stage) {
    const bool last = stage + 1 == opts.schedule.size();
    const double target = last ? opts.tol : std::max(opts.tol, opts.stage_tol);
    const RegularizedProfile reg(profile, opts.schedule[stage]);
    const std::vector<double> warm = u;
    int it = 0;
    double res = std::numeric_limits<double>::infinity();
    double start_res = -1.0;
    bool stage_ok = false;
    while (true) {
      const auto grads = op.face_gradient_norms(u);
      for (std::size_t k = 0; k < nf; ++k) coeff[k] = reg.coefficient(grads[k]);
      const auto A = op.assemble(coeff, 0.0);
      res = op.residual(A, u);
      if (start_res < 0.0) start_res = res;
      if (res <= target) {
        stage_ok = true;
        break;
      }
      const bool diverging = !std::isfinite(res) || res > 1e6 * std::max(start_res, 1.0);
      if (diverging || it >= opts.max_iters) {
        if (diverging && !halved) {
          halved = true;
          omega *= 0.5;
          u = warm;
          it = 0;
          start_res = -1.0;
          continue;
        }
        break;
      }
      if (!solver.solve(A, rhs, x)) {
        rep.message = "linear factorization failed at epsilon=" + std::to_string(reg.epsilon());
        break;
      }
      for (int c = 0; c < n; ++c) u[static_cast<std::size_t>(c)] = (1.0 - omega) * u[static_cast<std::size_t>(c)] + omega * x[c];
      ++it;
      ++rep.iterations;
    }
    rep.stage_iterations.push_back(it);
    rep.final_residual = res;
    if (!stage_ok) {
      if (rep.message.empty()) {
        rep.message = "no convergence at epsilon=" + std::to_string(reg.epsilon()) + " (residual " +
                      std::to_string(res) + ")";
      }
      rep.omega = omega;
      rep.converged = false;
      return out;
    }
  }
  rep.omega = omega;
  rep.converged = rep.final_residual <= opts.tol;
  return out;
}

/// d_nu u on each Gamma0 face (ordered by angle), from the one-sided quadratic
/// through u = 0 on the face and the last two cell centres.
inline std::vector<double> normal_derivative_gamma0(const SectorGrid& grid, std::span<const double> u) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(grid.nt()));
  const int nr = grid.nr();
  for (const auto& face : grid.faces()) {
    if (face.tag != BoundaryTag::Gamma0) continue;
    const int j = grid.angular_index(face.cell);
    const double a = u[static_cast<std::size_t>(grid.index(nr - 1, j))];
    const double b = u[static_cast<std::size_t>(grid.index(nr - 2, j))];
    const double u_s = -(9.0 * a - b) / (3.0 * grid.ds());
    const Metric m = grid.metric(1.0, face.theta);
    out.push_back(u_s * std::sqrt(m.inv_ss));
  }
  return out;
}

inline std::vector<double> normal_derivative_gamma0(const ScalarField& u) {
  return normal_derivative_gamma0(*u.grid, u.view());
}

/// Cartesian grad u per cell (Euclidean grids).
inline VectorField gradient_field(const ScalarField& u) {
  const SectorGrid& g = *u.grid;
  if (g.space_form().curvature() != 0) throw std::invalid_argument("gradient_field needs a Euclidean grid");
  VectorField out{u.grid, std::vector<Eigen::Vector2d>(static_cast<std::size_t>(g.cell_count()))};
  for (int c = 0; c < g.cell_count(); ++c) {
    const Eigen::Vector2d du = coordinate_gradient(g, u.view(), c, EdgeRule::Solution);
    const Eigen::Matrix2d J = g.chart_jacobian(g.cell_s(c), g.cell_theta(c));
    out.values[static_cast<std::size_t>(c)] = J.transpose().fullPivLu().solve(du);
  }
  return out;
}

/// V_xi(grad u) = f'(|grad u|) grad u / |grad u| per cell.
inline VectorField mapped_gradient_field(const VectorField& grad, const OperatorProfile& profile) {
  VectorField out{grad.grid, std::vector<Eigen::Vector2d>(grad.values.size())};
  for (std::size_t c = 0; c < grad.values.size(); ++c) {
    const double t = grad.values[c].norm();
    out.values[c] = t > 0.0 ? Eigen::Vector2d(profile.f_prime(t) / t * grad.values[c]) : Eigen::Vector2d::Zero();
  }
  return out;
}

/// W = (d_j V_{xi_i}(grad u)), differencing the mapped gradient field in grid
/// coordinates (one-sided at edges) and pulling back with the chart Jacobian.
/// Cells with |grad u| < floor_rel * max |grad u| are masked.
inline MatrixField hessian_W_field(const ScalarField& u, const OperatorProfile& profile, double floor_rel = 1e-8) {
  const SectorGrid& g = *u.grid;
  const VectorField grad = gradient_field(u);
  const VectorField V = mapped_gradient_field(grad, profile);
  const int n = g.cell_count();
  std::vector<double> v0(static_cast<std::size_t>(n)), v1(static_cast<std::size_t>(n));
  double gmax = 0.0;
  for (int c = 0; c < n; ++c) {
    v0[static_cast<std::size_t>(c)] = V.values[static_cast<std::size_t>(c)][0];
    v1[static_cast<std::size_t>(c)] = V.values[static_cast<std::size_t>(c)][1];
    gmax = std::max(gmax, grad.values[static_cast<std::size_t>(c)].norm());
  }
  MatrixField W;
  W.grid = u.grid;
  W.values.resize(static_cast<std::size_t>(n));
  W.interior.resize(static_cast<std::size_t>(n));
  W.degenerate.resize(static_cast<std::size_t>(n));
  W.gradient_floor = floor_rel * gmax;
  for (int c = 0; c < n; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const Eigen::Vector2d d0 = coordinate_gradient(g, v0, c, EdgeRule::OneSided);
    const Eigen::Vector2d d1 = coordinate_gradient(g, v1, c, EdgeRule::OneSided);
    Eigen::Matrix2d DV;
    DV << d0[0], d0[1], d1[0], d1[1];
    const Eigen::Matrix2d J = g.chart_jacobian(g.cell_s(c), g.cell_theta(c));
    W.values[k] = DV * J.inverse();
    W.interior[k] = g.is_interior(c) ? 1 : 0;
    const bool masked = !(grad.values[k].norm() >= W.gradient_floor) || gmax == 0.0;
    W.degenerate[k] = masked ? 1 : 0;
    W.degenerate_count += masked ? 1 : 0;
  }
  return W;
}

}  // namespace serrin
