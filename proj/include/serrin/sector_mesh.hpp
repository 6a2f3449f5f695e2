#pragma once

#include "serrin/finite_difference.hpp"
#include "serrin/space_form.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace serrin {

/// Outer boundary r = R(theta) = R0 (1 + epsilon cos(k theta)).
struct BoundaryRadius {
  double R0 = 1.0;
  double epsilon = 0.0;
  int k = 2;

  [[nodiscard]] double value(double theta) const {
    if (epsilon == 0.0) return R0;
    return R0 * (1.0 + epsilon * std::cos(k * theta));
  }
  [[nodiscard]] double derivative(double theta) const {
    if (epsilon == 0.0) return 0.0;
    return -R0 * epsilon * k * std::sin(k * theta);
  }
  [[nodiscard]] double second_derivative(double theta) const {
    if (epsilon == 0.0) return 0.0;
    return -R0 * epsilon * k * k * std::cos(k * theta);
  }
};

enum class BoundaryTag : std::uint8_t { Gamma0, Gamma1 };
enum class FaceSide : std::uint8_t { Outer, WallLow, WallHigh };

struct BoundaryFace {
  BoundaryTag tag;
  FaceSide side;
  int cell;       // adjacent cell index
  double s;       // face midpoint in grid coordinates
  double theta;
  double length;  // Riemannian length of the face
};

/// Metric dr^2 + h(r)^2 dtheta^2 pulled back to (s, theta) with r = s R(theta).
struct Metric {
  double g_ss, g_st, g_tt;
  double inv_ss, inv_st, inv_tt;
  double sqrt_g;
};

/// Christoffel symbols Gamma^k_ij of the (s, theta) metric; index 0 = s, 1 = theta.
using Christoffel = std::array<std::array<std::array<double, 2>, 2>, 2>;

/// How a one-dimensional derivative treats the end of the grid line.
enum class EdgeRule : std::uint8_t {
  /// Scalar solution data: u = 0 on Gamma0 (s = 1), even reflection at walls.
  Solution,
  /// Generic grid data: one-sided second-order formulas at every edge.
  OneSided,
};

/// Boundary-fitted curvilinear grid over the sector-like domain
/// { 0 < r < R(theta), 0 < theta < alpha } of a space form.
///
/// Cells are centred in s = r / R(theta) in (0, 1) and theta in (0, alpha); the
/// first radial centre is at ds/2, so the vertex is never a node. Cell index is
/// i + Nr * j (radial index fastest).
class SectorGrid {
 public:
  SectorGrid(ConeSection cone, int nr, int nt, BoundaryRadius boundary)
      : cone_(cone), nr_(nr), nt_(nt), boundary_(boundary) {
    if (nr < 8 || nt < 8) throw std::invalid_argument("sector grid needs Nr, Nt >= 8");
    if (!(boundary.R0 > 0.0)) throw std::invalid_argument("sector grid needs R0 > 0");
    if (!(std::abs(boundary.epsilon) < 1.0)) throw std::invalid_argument("perturbation |epsilon| must be < 1");
    if (boundary.k < 1) throw std::invalid_argument("perturbation mode k must be >= 1");
    ds_ = 1.0 / nr;
    dt_ = cone.alpha / nt;

    const SpaceForm& sf = cone_.space_form;
    auto check_radius = [&](double th) {
      const double R = boundary_.value(th);
      if (!(R > 0.0) || !sf.contains(R) || (sf.curvature() == 1 && R >= sf.r_max())) {
        throw std::out_of_range("boundary radius " + std::to_string(R) + " at theta=" + std::to_string(th) +
                                " exceeds the radial interval of " + sf.name());
      }
    };
    for (int j = 0; j <= 2 * nt; ++j) check_radius(0.5 * j * dt_);

    const auto n = static_cast<std::size_t>(nr * nt);
    volume_.resize(n);
    for (int j = 0; j < nt; ++j) {
      const double th = theta(j);
      const double R = boundary_.value(th);
      for (int i = 0; i < nr; ++i) {
        volume_[static_cast<std::size_t>(index(i, j))] = R * sf.h(s(i) * R) * ds_ * dt_;
      }
    }

    for (int j = 0; j < nt; ++j) {
      const double th = theta(j);
      const double R = boundary_.value(th);
      const double Rp = boundary_.derivative(th);
      const double len = std::sqrt(Rp * Rp + sf.h(R) * sf.h(R)) * dt_;
      faces_.push_back({BoundaryTag::Gamma0, FaceSide::Outer, index(nr - 1, j), 1.0, th, len});
    }
    for (int i = 0; i < nr; ++i) {
      faces_.push_back({BoundaryTag::Gamma1, FaceSide::WallLow, index(i, 0), s(i), 0.0,
                        boundary_.value(0.0) * ds_});
    }
    for (int i = 0; i < nr; ++i) {
      faces_.push_back({BoundaryTag::Gamma1, FaceSide::WallHigh, index(i, nt - 1), s(i), cone.alpha,
                        boundary_.value(cone.alpha) * ds_});
    }
  }

  [[nodiscard]] const ConeSection& cone() const { return cone_; }
  [[nodiscard]] const SpaceForm& space_form() const { return cone_.space_form; }
  [[nodiscard]] const BoundaryRadius& boundary() const { return boundary_; }
  [[nodiscard]] int nr() const { return nr_; }
  [[nodiscard]] int nt() const { return nt_; }
  [[nodiscard]] int cell_count() const { return nr_ * nt_; }
  [[nodiscard]] double ds() const { return ds_; }
  [[nodiscard]] double dtheta() const { return dt_; }
  [[nodiscard]] int index(int i, int j) const { return i + nr_ * j; }
  [[nodiscard]] int radial_index(int cell) const { return cell % nr_; }
  [[nodiscard]] int angular_index(int cell) const { return cell / nr_; }
  [[nodiscard]] double s(int i) const { return (i + 0.5) * ds_; }
  [[nodiscard]] double theta(int j) const { return (j + 0.5) * dt_; }
  [[nodiscard]] double radius_at(double theta) const { return boundary_.value(theta); }
  /// Geodesic distance from the vertex to the centre of a cell.
  [[nodiscard]] double r(int cell) const {
    const int j = angular_index(cell);
    return s(radial_index(cell)) * boundary_.value(theta(j));
  }
  [[nodiscard]] double cell_theta(int cell) const { return theta(angular_index(cell)); }
  [[nodiscard]] double cell_s(int cell) const { return s(radial_index(cell)); }
  /// Midpoint-rule area weight sqrt(g) ds dtheta = R h(r) ds dtheta.
  [[nodiscard]] double volume(int cell) const { return volume_[static_cast<std::size_t>(cell)]; }
  [[nodiscard]] const std::vector<double>& volumes() const { return volume_; }
  [[nodiscard]] const std::vector<BoundaryFace>& faces() const { return faces_; }
  /// Largest cell extent, the "h" of refinement statements.
  [[nodiscard]] double mesh_size() const {
    const double rmax = boundary_.R0 * (1.0 + std::abs(boundary_.epsilon));
    return std::max(ds_ * rmax, dt_ * cone_.space_form.h(rmax));
  }
  /// An interior cell has a full stencil: one-cell margin from every edge.
  [[nodiscard]] bool is_interior(int cell) const {
    const int i = radial_index(cell);
    const int j = angular_index(cell);
    return i >= 1 && i <= nr_ - 2 && j >= 1 && j <= nt_ - 2;
  }

  [[nodiscard]] Metric metric(double s, double th) const {
    const double R = boundary_.value(th);
    const double Rp = boundary_.derivative(th);
    const double h = cone_.space_form.h(s * R);
    Metric m{};
    m.g_ss = R * R;
    m.g_st = s * R * Rp;
    m.g_tt = s * s * Rp * Rp + h * h;
    const double det = R * R * h * h;
    m.inv_ss = m.g_tt / det;
    m.inv_st = -m.g_st / det;
    m.inv_tt = m.g_ss / det;
    m.sqrt_g = R * h;
    return m;
  }
  [[nodiscard]] Metric cell_metric(int cell) const { return metric(cell_s(cell), cell_theta(cell)); }

  /// Conservative flux coefficients sqrt(g) g^{ij} at a point; the (s, s)
  /// coefficient vanishes at the vertex.
  struct FluxCoefficients {
    double ss, st, tt;
  };
  [[nodiscard]] FluxCoefficients flux_coefficients(double s, double th) const {
    if (s == 0.0) return {0.0, 0.0, 0.0};
    const double R = boundary_.value(th);
    const double Rp = boundary_.derivative(th);
    const double h = cone_.space_form.h(s * R);
    return {(s * s * Rp * Rp + h * h) / (R * h), -s * Rp / h, R / h};
  }

  [[nodiscard]] Christoffel christoffel(double s, double th) const {
    const double R = boundary_.value(th);
    const double Rp = boundary_.derivative(th);
    const double Rpp = boundary_.second_derivative(th);
    const SpaceForm& sf = cone_.space_form;
    const double h = sf.h(s * R);
    const double hd = sf.h_dot(s * R);
    // dg[l][i][j] = d_l g_ij
    double dg[2][2][2];
    dg[0][0][0] = 0.0;
    dg[1][0][0] = 2.0 * R * Rp;
    dg[0][0][1] = dg[0][1][0] = R * Rp;
    dg[1][0][1] = dg[1][1][0] = s * (Rp * Rp + R * Rpp);
    dg[0][1][1] = 2.0 * s * Rp * Rp + 2.0 * h * hd * R;
    dg[1][1][1] = 2.0 * s * s * Rp * Rpp + 2.0 * h * hd * s * Rp;
    const Metric m = metric(s, th);
    const double inv[2][2] = {{m.inv_ss, m.inv_st}, {m.inv_st, m.inv_tt}};
    Christoffel G{};
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double acc = 0.0;
          for (int l = 0; l < 2; ++l) acc += inv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
          G[k][i][j] = 0.5 * acc;
        }
    return G;
  }

  /// Chart position (r cos theta, r sin theta); Euclidean position when K = 0.
  [[nodiscard]] Eigen::Vector2d position(int cell) const {
    const double rr = r(cell);
    const double th = cell_theta(cell);
    return {rr * std::cos(th), rr * std::sin(th)};
  }

  /// d(x, y)/d(s, theta) for the chart position.
  [[nodiscard]] Eigen::Matrix2d chart_jacobian(double s, double th) const {
    const double R = boundary_.value(th);
    const double Rp = boundary_.derivative(th);
    const double c = std::cos(th);
    const double sn = std::sin(th);
    Eigen::Matrix2d J;
    J << R * c, s * (Rp * c - R * sn), R * sn, s * (Rp * sn + R * c);
    return J;
  }

  /// Unit outward normal in the orthonormal frame (e_r, e_theta / h).
  [[nodiscard]] Eigen::Vector2d outward_normal(const BoundaryFace& face) const {
    switch (face.side) {
      case FaceSide::WallLow: return {0.0, -1.0};
      case FaceSide::WallHigh: return {0.0, 1.0};
      case FaceSide::Outer: break;
    }
    // conormal of r - R(theta) = 0: dr - R' dtheta
    const double R = boundary_.value(face.theta);
    const double Rp = boundary_.derivative(face.theta);
    const double h = cone_.space_form.h(R);
    const Eigen::Vector2d v(1.0, -Rp / h);
    return v / v.norm();
  }

  [[nodiscard]] double area() const {
    double a = 0.0;
    for (double v : volume_) a += v;
    return a;
  }
  [[nodiscard]] double gamma0_length() const {
    double a = 0.0;
    for (const auto& f : faces_)
      if (f.tag == BoundaryTag::Gamma0) a += f.length;
    return a;
  }
  [[nodiscard]] double gamma1_length() const {
    double a = 0.0;
    for (const auto& f : faces_)
      if (f.tag == BoundaryTag::Gamma1) a += f.length;
    return a;
  }
  [[nodiscard]] int count_faces(BoundaryTag tag) const {
    int n = 0;
    for (const auto& f : faces_) n += f.tag == tag ? 1 : 0;
    return n;
  }

  /// Corners where Gamma0 meets a wall at a non-right angle (R' != 0 there).
  [[nodiscard]] bool corners_orthogonal(double tol = 1e-12) const {
    return std::abs(boundary_.derivative(0.0)) <= tol * boundary_.R0 &&
           std::abs(boundary_.derivative(cone_.alpha)) <= tol * boundary_.R0;
  }

  /// FNV-1a digest of the defining parameters, hex encoded.
  [[nodiscard]] std::string hash() const {
    std::uint64_t hv = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t k = 0; k < n; ++k) {
        hv ^= b[k];
        hv *= 1099511628211ull;
      }
    };
    const int K = cone_.space_form.curvature();
    mix(&K, sizeof K);
    mix(&cone_.alpha, sizeof cone_.alpha);
    mix(&cone_.dimension, sizeof cone_.dimension);
    mix(&boundary_.R0, sizeof boundary_.R0);
    mix(&boundary_.epsilon, sizeof boundary_.epsilon);
    mix(&boundary_.k, sizeof boundary_.k);
    mix(&nr_, sizeof nr_);
    mix(&nt_, sizeof nt_);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hv));
    return buf;
  }

  // --- derivative stencils at cell centres --------------------------------

  /// d/ds at a cell centre.
  [[nodiscard]] Stencil d_s(int i, int j, EdgeRule rule) const { return line_stencil(i, j, true, 1, rule); }
  /// d/dtheta at a cell centre.
  [[nodiscard]] Stencil d_theta(int i, int j, EdgeRule rule) const { return line_stencil(i, j, false, 1, rule); }
  [[nodiscard]] Stencil d_ss(int i, int j, EdgeRule rule) const { return line_stencil(i, j, true, 2, rule); }
  [[nodiscard]] Stencil d_tt(int i, int j, EdgeRule rule) const { return line_stencil(i, j, false, 2, rule); }
  /// Mixed derivative: d/ds applied to the cell-centred d/dtheta.
  [[nodiscard]] Stencil d_st(int i, int j, EdgeRule rule) const {
    const Stencil outer = d_s(i, j, rule);
    Stencil out;
    for (std::size_t k = 0; k < outer.size(); ++k) {
      const int c = outer.index(k);
      out.add(d_theta(radial_index(c), angular_index(c), rule), outer.weight(k));
    }
    return out;
  }

 private:
  // Derivative of order m along one grid line through cell (i, j).
  [[nodiscard]] Stencil line_stencil(int i, int j, bool radial, int m, EdgeRule rule) const {
    const int n = radial ? nr_ : nt_;
    const int p = radial ? i : j;
    const double h = radial ? ds_ : dt_;
    auto cell_at = [&](int q) { return radial ? index(q, j) : index(i, q); };

    Stencil st;
    if (p >= 1 && p <= n - 2) {
      if (m == 1) {
        st.add(cell_at(p + 1), 0.5 / h);
        st.add(cell_at(p - 1), -0.5 / h);
      } else {
        st.add(cell_at(p + 1), 1.0 / (h * h));
        st.add(cell_at(p), -2.0 / (h * h));
        st.add(cell_at(p - 1), 1.0 / (h * h));
      }
      return st;
    }

    const bool low = p == 0;
    if (rule == EdgeRule::Solution && !radial) {
      // Even reflection across the wall: ghost value equals the edge cell.
      const int inner = low ? p + 1 : p - 1;
      const double dir = low ? 1.0 : -1.0;
      if (m == 1) {
        st.add(cell_at(inner), dir * 0.5 / h);
        st.add(cell_at(p), -dir * 0.5 / h);
      } else {
        st.add(cell_at(inner), 1.0 / (h * h));
        st.add(cell_at(p), -1.0 / (h * h));
      }
      return st;
    }
    if (rule == EdgeRule::Solution && radial && !low) {
      // u = 0 on the outer face, half a cell beyond the last centre.
      const std::array<double, 3> nodes{-h, 0.0, 0.5 * h};
      const auto w = fd_weights(0.0, nodes, m);
      st.add(cell_at(p - 1), w[0]);
      st.add(cell_at(p), w[1]);
      return st;
    }
    // One-sided formulas (second order for m = 1 and m = 2).
    const int count = m + 2;
    std::vector<double> nodes(static_cast<std::size_t>(count));
    for (int q = 0; q < count; ++q) nodes[static_cast<std::size_t>(q)] = (low ? q : -q) * h;
    const auto w = fd_weights(0.0, nodes, m);
    for (int q = 0; q < count; ++q) st.add(cell_at(low ? p + q : p - q), w[static_cast<std::size_t>(q)]);
    return st;
  }

  ConeSection cone_;
  int nr_;
  int nt_;
  BoundaryRadius boundary_;
  double ds_ = 0.0;
  double dt_ = 0.0;
  std::vector<double> volume_;
  std::vector<BoundaryFace> faces_;
};

using GridPtr = std::shared_ptr<const SectorGrid>;

inline GridPtr build_grid(const ConeSection& cone, int nr, int nt, const BoundaryRadius& boundary) {
  return std::make_shared<const SectorGrid>(cone, nr, nt, boundary);
}

struct BoundaryMeasures {
  double area;
  double gamma0_length;
};

inline BoundaryMeasures boundary_measures(const SectorGrid& grid) {
  return {grid.area(), grid.gamma0_length()};
}

inline Eigen::Vector2d outward_normal(const SectorGrid& grid, const BoundaryFace& face) {
  return grid.outward_normal(face);
}

}  // namespace serrin
