#include "serrin/operator_profiles.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <vector>

using namespace serrin;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> s;
  for (int i = 0; i < n; ++i) s.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return s;
}

/// Closed-form conjugates: power g(s) = (p-1)/p s^(p/(p-1)); mean curvature 1 - sqrt(1 - s^2).
double conjugate_power(double p, double s) { return (p - 1.0) / p * std::pow(s, p / (p - 1.0)); }
double conjugate_mean_curvature(double s) { return s * s / (1.0 + std::sqrt(1.0 - s * s)); }

}  // namespace

TEST(PowerProfile, LaplacianIsIdentity) {
  const auto p = make_power_profile(2.0);
  EXPECT_TRUE(p.is_laplacian);
  EXPECT_DOUBLE_EQ(p.f_prime(3.0), 3.0);
  EXPECT_DOUBLE_EQ(p.g_prime(3.0), 3.0);
}

TEST(PowerProfile, CubicInverse) {
  const auto p = make_power_profile(3.0);
  EXPECT_NEAR(p.g_prime(4.0), 2.0, 1e-14);
  ASSERT_TRUE(p.degeneracy_exponent);
  EXPECT_EQ(*p.degeneracy_exponent, 3.0);
}

TEST(PowerProfile, SingularRoundTrip) {
  const auto p = make_power_profile(1.5);
  EXPECT_NEAR(p.g_prime(p.f_prime(0.7)), 0.7, 1e-14);
}

TEST(PowerProfile, RejectsSublinear) {
  EXPECT_THROW((void)make_power_profile(1.0), std::invalid_argument);
  EXPECT_THROW((void)make_power_profile(0.5), std::invalid_argument);
}

TEST(MeanCurvatureProfile, Basics) {
  const auto p = make_mean_curvature_profile();
  EXPECT_EQ(p.f_prime(0.0), 0.0);
  EXPECT_NEAR(p.g_prime(p.f_prime(2.0)), 2.0, 1e-13);
  EXPECT_THROW((void)p.g_prime(1.0), std::domain_error);
  EXPECT_EQ(p.f(0.0), 0.0);
}

TEST(ProfileRegistry, ParsesIdentifiers) {
  EXPECT_TRUE(make_profile("laplacian").is_laplacian);
  const auto p3 = make_profile("p-laplacian:3");
  ASSERT_TRUE(p3.degeneracy_exponent);
  EXPECT_EQ(*p3.degeneracy_exponent, 3.0);
  EXPECT_NEAR(p3.g_prime(4.0), 2.0, 1e-14);
  EXPECT_EQ(make_profile("mean-curvature").name, "mean-curvature");
  EXPECT_THROW((void)make_profile("p-laplacian"), std::invalid_argument);
  EXPECT_THROW((void)make_profile("p-laplacian:abc"), std::invalid_argument);
  EXPECT_THROW((void)make_profile("nonsense"), std::invalid_argument);
}

TEST(ProfileRegistry, CustomFactory) {
  register_profile("quartic", [](const std::string&) { return make_power_profile(4.0); });
  EXPECT_EQ(*make_profile("quartic").degeneracy_exponent, 4.0);
}

TEST(Regularization, CoefficientAtZero) {
  const auto r = regularize(make_power_profile(3.0), 0.1);
  EXPECT_NEAR(r.coefficient(0.0), 0.1, 1e-15);
  EXPECT_EQ(r.f_eps_prime(0.0), 0.0);
  EXPECT_THROW((void)regularize(make_power_profile(3.0), 0.0), std::invalid_argument);
}

TEST(Regularization, ConvergesPointwise) {
  const auto base = make_power_profile(3.0);
  double prev_err = 1.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double err = std::abs(regularize(base, eps).f_eps(1.0) - 1.0 / 3.0);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
  EXPECT_LT(prev_err, 1e-7);
}

TEST(Regularization, ComposedExactly) {
  const auto base = make_mean_curvature_profile();
  const auto r = regularize(base, 0.3);
  for (double t : {0.0, 0.2, 1.0, 5.0}) {
    EXPECT_DOUBLE_EQ(r.f_eps(t), base.f(std::sqrt(0.09 + t * t)) - base.f(0.3));
  }
}

/// d/d eps f_eps(t) = eps (f'(rho)/rho - f'(eps)/eps) with rho > eps, and
/// f'(s)/s = s^(p-2): f_eps grows with eps for p > 2 and shrinks for p < 2.
TEST(Regularization, MonotoneInEpsilonForPowerProfiles) {
  for (double p : {1.5, 2.0, 3.0, 4.5}) {
    const auto base = make_power_profile(p);
    const double direction = p >= 2.0 ? 1.0 : -1.0;
    for (double t : log_grid(1e-3, 10.0, 25)) {
      double prev = std::numeric_limits<double>::quiet_NaN();
      for (double eps : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const double v = regularize(base, eps).f_eps(t);
        // cancellation in f(rho) - f(eps)
        const double slack = 1e-14 * (base.f(std::sqrt(eps * eps + t * t)) + base.f(eps));
        if (!std::isnan(prev)) {
          EXPECT_GE(direction * (v - prev), -slack) << "p=" << p << " t=" << t << " eps=" << eps;
        }
        prev = v;
      }
    }
  }
}

TEST(Admissibility, Verdicts) {
  EXPECT_TRUE(check_admissibility(make_power_profile(2.0), 64).all_pass());
  EXPECT_TRUE(check_admissibility(make_power_profile(3.0), 64).all_pass());
  const auto mc = check_admissibility(make_mean_curvature_profile(), 64);
  EXPECT_FALSE(mc.all_pass());
  EXPECT_FALSE(mc.clause("superlinearity").pass);
  EXPECT_TRUE(mc.clause("strict_convexity").pass);
  EXPECT_TRUE(mc.clause("zero_at_origin").pass);
  EXPECT_THROW((void)check_admissibility(make_power_profile(2.0), 4), std::invalid_argument);
}

TEST(Fenchel, RoundTripOnLogGrid) {
  for (const auto& prof : {make_power_profile(1.5), make_power_profile(2.0), make_power_profile(3.0),
                           make_mean_curvature_profile()}) {
    for (double s : log_grid(1e-6, 1e3, 200)) {
      EXPECT_LE(std::abs(prof.g_prime(prof.f_prime(s)) - s), 1e-9 * std::max(1.0, s)) << prof.name << " s=" << s;
    }
  }
}

TEST(Fenchel, ValueIdentityAgainstClosedForm) {
  for (double p : {1.5, 2.0, 3.0}) {
    const auto prof = make_power_profile(p);
    for (double t : log_grid(1e-3, 1e2, 60)) {
      const double g = conjugate_power(p, prof.f_prime(t));
      EXPECT_LE(std::abs(prof.conjugate_at_slope(t) - g), 1e-12 * std::max(1.0, g)) << "p=" << p << " t=" << t;
    }
  }
  const auto mc = make_mean_curvature_profile();
  for (double t : log_grid(1e-3, 1e2, 60)) {
    const double g = conjugate_mean_curvature(mc.f_prime(t));
    EXPECT_LE(std::abs(mc.conjugate_at_slope(t) - g), 1e-12 * std::max(1.0, g)) << "t=" << t;
  }
}

TEST(Fenchel, ValueIdentityAgainstIntegratedDerivative) {
  using boost::math::quadrature::gauss_kronrod;
  for (const auto& prof : {make_power_profile(3.0), make_power_profile(2.0), make_mean_curvature_profile()}) {
    for (double t : {0.05, 0.3, 1.0, 2.5, 7.0}) {
      const double slope = prof.f_prime(t);
      const double g = gauss_kronrod<double, 61>::integrate([&](double s) { return prof.g_prime(s); }, 0.0, slope, 15,
                                                            1e-15);
      EXPECT_LE(std::abs(prof.conjugate_at_slope(t) - g), 1e-10 * std::max(1.0, std::abs(g))) << prof.name;
    }
  }
}
