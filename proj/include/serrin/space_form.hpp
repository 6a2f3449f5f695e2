#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace serrin {

/// Warping data at one radius: h, h', and H = int_0^r h.
struct Warping {
  double h;
  double h_dot;
  double H;
};

/// Model space of constant curvature K in {-1, 0, +1}, written as the warped
/// product dr^2 + h(r)^2 g_{S^{N-1}} with h = sinh r, r, sin r.
///
/// The sphere is restricted to the open hemisphere, r in [0, pi/2). Setting
/// `closed_endpoint` admits r = pi/2 for boundary evaluation only.
class SpaceForm {
 public:
  explicit SpaceForm(int curvature, bool closed_endpoint = false)
      : k_(curvature), closed_(closed_endpoint) {
    if (curvature < -1 || curvature > 1) {
      throw std::invalid_argument("space form curvature must be -1, 0 or +1");
    }
  }

  static SpaceForm euclidean() { return SpaceForm(0); }
  static SpaceForm hyperbolic() { return SpaceForm(-1); }
  static SpaceForm sphere(bool closed_endpoint = false) { return SpaceForm(1, closed_endpoint); }

  /// "euclidean", "hyperbolic" or "sphere".
  static SpaceForm from_name(const std::string& name) {
    if (name == "euclidean") return euclidean();
    if (name == "hyperbolic") return hyperbolic();
    if (name == "sphere") return sphere();
    throw std::invalid_argument("unknown space form '" + name + "'");
  }

  [[nodiscard]] int curvature() const { return k_; }
  [[nodiscard]] bool closed_endpoint() const { return closed_; }
  [[nodiscard]] std::string name() const {
    return k_ == 0 ? "euclidean" : (k_ < 0 ? "hyperbolic" : "sphere");
  }

  [[nodiscard]] double r_max() const {
    return k_ == 1 ? std::numbers::pi / 2.0 : std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] bool contains(double r) const {
    if (!(r >= 0.0)) return false;
    if (k_ != 1) return std::isfinite(r);
    return closed_ ? r <= r_max() : r < r_max();
  }

  // Unchecked evaluations, used on hot paths after the grid has been validated.
  [[nodiscard]] double h(double r) const {
    switch (k_) {
      case 0: return r;
      case -1: return std::sinh(r);
      default: return std::sin(r);
    }
  }
  [[nodiscard]] double h_dot(double r) const {
    switch (k_) {
      case 0: return 1.0;
      case -1: return std::cosh(r);
      default: return std::cos(r);
    }
  }
  [[nodiscard]] double H(double r) const {
    // cosh r - 1 and 1 - cos r, written without cancellation
    const double half = std::sinh(r / 2.0);
    switch (k_) {
      case 0: return 0.5 * r * r;
      case -1: return 2.0 * half * half;
      default: {
        const double sh = std::sin(r / 2.0);
        return 2.0 * sh * sh;
      }
    }
  }

  [[nodiscard]] Warping warping_eval(double r) const {
    if (!contains(r)) {
      throw std::out_of_range(name() + ": radius " + std::to_string(r) + " outside the radial interval");
    }
    return {h(r), h_dot(r), H(r)};
  }

  [[nodiscard]] double first_integral_check(std::span<const double> r_samples) const {
    double worst = 0.0;
    for (double r : r_samples) {
      const Warping w = warping_eval(r);
      worst = std::max(worst, std::abs(w.h_dot + k_ * w.H - 1.0));
    }
    return worst;
  }

 private:
  int k_;
  bool closed_;
};

inline Warping warping_eval(const SpaceForm& sf, double r) { return sf.warping_eval(r); }

inline double first_integral_check(const SpaceForm& sf, std::span<const double> r_samples) {
  return sf.first_integral_check(r_samples);
}

/// Two-dimensional section of a cone: the sector of opening `alpha` around the
/// vertex O. `dimension` is the ambient dimension N used by the oracles.
struct ConeSection {
  SpaceForm space_form = SpaceForm::euclidean();
  double alpha = std::numbers::pi / 2.0;
  int dimension = 2;

  ConeSection() = default;
  ConeSection(SpaceForm sf, double opening, int dim = 2) : space_form(sf), alpha(opening), dimension(dim) {
    if (!(opening > 0.0) || opening > 2.0 * std::numbers::pi) {
      throw std::invalid_argument("cone opening angle must lie in (0, 2*pi]");
    }
    if (dim < 2) throw std::invalid_argument("cone dimension must be >= 2");
  }
};

/// Walls of a 2-D sector are geodesic rays (II = 0), so convexity is the angle
/// condition alpha <= pi.
inline bool cone_convexity(const ConeSection& cs) {
  if (cs.dimension != 2) {
    throw std::invalid_argument("cone convexity is only decided for two-dimensional sections");
  }
  return cs.alpha <= std::numbers::pi;
}

}  // namespace serrin
