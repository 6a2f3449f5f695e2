#pragma once

#include "serrin/operator_profiles.hpp"
#include "serrin/quadrature.hpp"
#include "serrin/space_form.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace serrin {

/// Radial solution of L_f u = -1 in B_R(x0) (intersected with any cone whose
/// walls pass through x0): u(x) = int_{|x-x0|}^R g'(s/N) ds, vanishing on the
/// sphere with |grad u| = g'(R/N) there.
class RadialSolutionEuclidean {
 public:
  RadialSolutionEuclidean(OperatorProfile profile, int dimension, double radius,
                          Eigen::VectorXd center = {})
      : profile_(std::move(profile)), n_(dimension), radius_(radius), x0_(std::move(center)) {
    if (dimension < 2) throw std::invalid_argument("radial solution needs dimension N >= 2");
    if (!(radius > 0.0)) throw std::invalid_argument("radial solution needs R > 0");
    if (x0_.size() == 0) x0_ = Eigen::VectorXd::Zero(dimension);
    if (x0_.size() != dimension) throw std::invalid_argument("center has wrong dimension");
    if (!(radius / dimension < profile_.g_domain_sup)) {
      throw std::domain_error("radial solution for '" + profile_.name + "' requires R/N < sup f' = " +
                              std::to_string(profile_.g_domain_sup));
    }
  }

  [[nodiscard]] const OperatorProfile& profile() const { return profile_; }
  [[nodiscard]] int dimension() const { return n_; }
  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] const Eigen::VectorXd& center() const { return x0_; }

  /// u as a function of rho = |x - x0|.
  [[nodiscard]] double u(double rho) const {
    check_rho(rho);
    if (profile_.is_laplacian) return (radius_ * radius_ - rho * rho) / (2.0 * n_);
    const double n = n_;
    return adaptive_integrate([&](double s) { return profile_.g_prime(s / n); }, rho, radius_);
  }
  [[nodiscard]] double du(double rho) const {
    check_rho(rho);
    return -profile_.g_prime(rho / n_);
  }
  [[nodiscard]] double d2u(double rho) const {
    check_rho(rho);
    return -profile_.g_second(rho / n_) / n_;
  }

  [[nodiscard]] double u_at(const Eigen::VectorXd& x) const { return u((x - x0_).norm()); }

  struct Derivatives {
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
  };

  /// grad u = -g'(rho/N) (x-x0)/rho, Hess u = u'' e e^T + (u'/rho)(I - e e^T).
  /// At x = x0 the gradient is 0; the Hessian limit -Id/N exists only for the
  /// Laplacian.
  [[nodiscard]] Derivatives gradient_hessian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - x0_;
    const double rho = d.norm();
    Derivatives out{Eigen::VectorXd::Zero(n_), Eigen::MatrixXd::Zero(n_, n_)};
    if (rho == 0.0) {
      if (!profile_.is_laplacian) {
        throw std::domain_error("Hessian of the radial solution is singular at the center");
      }
      out.hessian = -Eigen::MatrixXd::Identity(n_, n_) / n_;
      return out;
    }
    const Eigen::VectorXd e = d / rho;
    const double up = du(rho);
    const double upp = d2u(rho);
    out.gradient = up * e;
    const Eigen::MatrixXd ee = e * e.transpose();
    out.hessian = upp * ee + (up / rho) * (Eigen::MatrixXd::Identity(n_, n_) - ee);
    return out;
  }

  /// L_f u + 1 by radial reduction:
  /// L_f u = -rho^{1-N} (rho^{N-1} f'(|u'|))', with |u'| = g'(rho/N).
  [[nodiscard]] double pde_residual(double rho) const {
    if (!(rho > 0.0) || !(rho < radius_)) throw std::domain_error("pde residual needs 0 < rho < R");
    const double n = n_;
    const double slope = profile_.g_prime(rho / n);
    const double flux = profile_.f_prime(slope);
    const double dflux = profile_.f_second(slope) * profile_.g_second(rho / n) / n;
    const double lf = -(dflux + (n - 1.0) / rho * flux);
    return lf + 1.0;
  }
  [[nodiscard]] double pde_residual_at(const Eigen::VectorXd& x) const { return pde_residual((x - x0_).norm()); }

  /// c = g'(R/N) = -u'(R).
  [[nodiscard]] double overdetermined_constant() const { return profile_.g_prime(radius_ / n_); }

 private:
  void check_rho(double rho) const {
    if (!(rho >= 0.0) || rho > radius_) {
      throw std::domain_error("radial distance " + std::to_string(rho) + " outside [0, R]");
    }
  }

  OperatorProfile profile_;
  int n_;
  double radius_;
  Eigen::VectorXd x0_;
};

/// Radial solution of Delta u + N K u = -1 in a geodesic ball of a space form:
/// u(d) = (H(R) - H(d)) / (N h'(R)).
class RadialSolutionSpaceForm {
 public:
  RadialSolutionSpaceForm(SpaceForm sf, int dimension, double radius)
      : sf_(sf), n_(dimension), radius_(radius) {
    if (dimension < 2) throw std::invalid_argument("radial solution needs dimension N >= 2");
    if (!(radius > 0.0) || !sf_.contains(radius) || !(sf_.h_dot(radius) > 0.0)) {
      throw std::out_of_range("radius " + std::to_string(radius) + " outside the admissible interval of " +
                              sf_.name());
    }
    denom_ = n_ * sf_.h_dot(radius_);
  }

  [[nodiscard]] const SpaceForm& space_form() const { return sf_; }
  [[nodiscard]] int dimension() const { return n_; }
  [[nodiscard]] double radius() const { return radius_; }

  [[nodiscard]] double u(double d) const {
    check(d);
    return (sf_.H(radius_) - sf_.H(d)) / denom_;
  }
  [[nodiscard]] double du(double d) const {
    check(d);
    return -sf_.h(d) / denom_;
  }
  [[nodiscard]] double d2u(double d) const {
    check(d);
    return -sf_.h_dot(d) / denom_;
  }

  /// u'' + (N-1)(h'/h) u' + N K u + 1.
  [[nodiscard]] double pde_residual(double d) const {
    if (!(d > 0.0) || !(d < radius_)) throw std::domain_error("pde residual needs 0 < d < R");
    const double n = n_;
    return d2u(d) + (n - 1.0) * sf_.h_dot(d) / sf_.h(d) * du(d) + n * sf_.curvature() * u(d) + 1.0;
  }

  /// c = h(R) / (N h'(R)) = -u'(R).
  [[nodiscard]] double overdetermined_constant() const { return sf_.h(radius_) / denom_; }

 private:
  void check(double d) const {
    if (!(d >= 0.0) || d > radius_) {
      throw std::domain_error("geodesic distance " + std::to_string(d) + " outside [0, R]");
    }
  }

  SpaceForm sf_;
  int n_;
  double radius_;
  double denom_ = 1.0;
};

}  // namespace serrin
