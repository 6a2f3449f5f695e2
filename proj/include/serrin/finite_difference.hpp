#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace serrin {

/// Finite-difference weights for the m-th derivative at x0 on arbitrary nodes
/// (Fornberg's recursion).
inline std::vector<double> fd_weights(double x0, std::span<const double> nodes, int m) {
  const int n = static_cast<int>(nodes.size());
  if (m >= n) throw std::invalid_argument("fd_weights: need more nodes than the derivative order");
  // c[j][k]: weight of node j for derivative k
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[static_cast<std::size_t>(i)] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = c[j][m];
  return w;
}

/// Sparse linear functional over cell values: sum of weight * value[index].
class Stencil {
 public:
  static constexpr std::size_t capacity = 16;

  void add(int index, double weight) {
    for (std::size_t k = 0; k < size_; ++k) {
      if (idx_[k] == index) {
        w_[k] += weight;
        return;
      }
    }
    if (size_ == capacity) throw std::length_error("stencil capacity exceeded");
    idx_[size_] = index;
    w_[size_] = weight;
    ++size_;
  }

  void add(const Stencil& other, double scale) {
    for (std::size_t k = 0; k < other.size_; ++k) add(other.idx_[k], scale * other.w_[k]);
  }

  [[nodiscard]] double apply(std::span<const double> values) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size_; ++k) acc += w_[k] * values[static_cast<std::size_t>(idx_[k])];
    return acc;
  }

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] int index(std::size_t k) const { return idx_[k]; }
  [[nodiscard]] double weight(std::size_t k) const { return w_[k]; }

 private:
  std::array<int, capacity> idx_{};
  std::array<double, capacity> w_{};
  std::size_t size_ = 0;
};

}  // namespace serrin
