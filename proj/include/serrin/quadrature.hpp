#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace serrin {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-14;
  int max_segments = 4000;
};

/// Globally adaptive 7/15-point Gauss-Kronrod integration of f over [a, b]:
/// the segment with the largest error estimate is bisected until the summed
/// estimate meets the tolerance. Bisection localizes integrable endpoint
/// singularities such as the infinite slope of s^(1/(p-1)) at 0.
template <typename F>
double adaptive_integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  if (a == b) return 0.0;
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Segment {
    double lo, hi, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
  };
  auto eval = [&](double lo, double hi) {
    double err = 0.0;
    const double v = Rule::integrate(f, lo, hi, 0, 0.0, &err);
    return Segment{lo, hi, v, err};
  };

  std::priority_queue<Segment> heap;
  const Segment first = eval(a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  const double min_width = std::abs(b - a) * 1e-15;
  int segments = 1;
  while (total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total)) && segments < opts.max_segments) {
    const Segment worst = heap.top();
    if (std::abs(worst.hi - worst.lo) < min_width) break;
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Segment left = eval(worst.lo, mid);
    const Segment right = eval(mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++segments;
  }
  // re-sum in a fixed order to drop the running-update rounding
  std::vector<Segment> parts;
  parts.reserve(heap.size());
  while (!heap.empty()) {
    parts.push_back(heap.top());
    heap.pop();
  }
  std::sort(parts.begin(), parts.end(), [](const Segment& x, const Segment& y) { return x.lo < y.lo; });
  double sum = 0.0;
  for (const auto& p : parts) sum += p.value;
  if (!std::isfinite(sum)) throw std::runtime_error("adaptive quadrature produced a non-finite value");
  return sum;
}

}  // namespace serrin
