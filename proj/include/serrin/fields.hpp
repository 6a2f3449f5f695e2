#pragma once

#include "serrin/sector_mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace serrin {

/// One real value per grid cell.
struct ScalarField {
  GridPtr grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, double fill = 0.0)
      : grid(std::move(g)), values(static_cast<std::size_t>(grid->cell_count()), fill) {}
  ScalarField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(grid->cell_count())) {
      throw std::invalid_argument("field size does not match the grid");
    }
  }

  [[nodiscard]] double operator[](int cell) const { return values[static_cast<std::size_t>(cell)]; }
  double& operator[](int cell) { return values[static_cast<std::size_t>(cell)]; }
  [[nodiscard]] std::span<const double> view() const { return values; }

  /// Samples f(cell) on every cell.
  template <typename F>
  static ScalarField sample(GridPtr g, F&& f) {
    ScalarField out(g);
    for (int c = 0; c < g->cell_count(); ++c) out[c] = f(c);
    return out;
  }
};

/// Cartesian vector per cell.
struct VectorField {
  GridPtr grid;
  std::vector<Eigen::Vector2d> values;
};

/// 2x2 matrix per cell with validity flags.
struct MatrixField {
  GridPtr grid;
  std::vector<Eigen::Matrix2d> values;
  std::vector<std::uint8_t> interior;    // full centred stencil available
  std::vector<std::uint8_t> degenerate;  // |grad u| below the gradient floor
  int degenerate_count = 0;
  double gradient_floor = 0.0;

  /// Cells entering audits: not masked as degenerate.
  [[nodiscard]] bool usable(int cell) const { return degenerate[static_cast<std::size_t>(cell)] == 0; }
  [[nodiscard]] bool usable_interior(int cell) const {
    return usable(cell) && interior[static_cast<std::size_t>(cell)] != 0;
  }
};

/// Coordinate derivatives (d/ds, d/dtheta) of cell data at a cell centre.
inline Eigen::Vector2d coordinate_gradient(const SectorGrid& grid, std::span<const double> v, int cell,
                                           EdgeRule rule) {
  const int i = grid.radial_index(cell);
  const int j = grid.angular_index(cell);
  return {grid.d_s(i, j, rule).apply(v), grid.d_theta(i, j, rule).apply(v)};
}

/// g^{ab} u_a u_b for coordinate derivatives at a cell centre.
inline double metric_norm2(const Metric& m, const Eigen::Vector2d& du) {
  return m.inv_ss * du[0] * du[0] + 2.0 * m.inv_st * du[0] * du[1] + m.inv_tt * du[1] * du[1];
}

}  // namespace serrin
