#include "serrin/identity_auditor.hpp"
#include "serrin/radial_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace serrin;
using std::numbers::pi;

namespace {

GridPtr sector(int n, double alpha = pi / 2.0, double eps = 0.0) {
  return build_grid(ConeSection(SpaceForm::euclidean(), alpha), n, n, {1.0, eps, 2});
}

ScalarField oracle(const GridPtr& g, const OperatorProfile& prof) {
  RadialSolutionEuclidean o(prof, 2, 1.0);
  return ScalarField::sample(g, [&](int c) { return o.u(g->r(c)); });
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = d(rng);
  return A;
}

}  // namespace

TEST(S2, Examples) {
  EXPECT_DOUBLE_EQ(s2_of_matrix(Eigen::MatrixXd::Identity(2, 2)), 1.0);
  Eigen::MatrixXd d(2, 2);
  d << 1, 0, 0, 0;
  EXPECT_DOUBLE_EQ(s2_of_matrix(d), 0.0);
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_NEAR(s2_of_matrix(a), -2.0, 1e-15);
  EXPECT_NEAR(s2_of_matrix(a), a.determinant(), 1e-14);
}

TEST(S2, TraceAndMinorFormsAgree) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    for (int n : {2, 3}) EXPECT_LE(s2_consistency(random_matrix(rng, n)), 1e-12);
  }
}

TEST(S2, MinorFormIsAdjugateTransposeIn2D) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  Eigen::MatrixXd expected(2, 2);
  expected << 4, -3, -2, 1;
  EXPECT_NEAR((s2_minor_form(a) - expected).norm(), 0.0, 1e-15);
}

TEST(Newton, Examples) {
  const auto id = newton_gap(Eigen::MatrixXd::Identity(2, 2), NewtonWitness{Eigen::MatrixXd::Identity(2, 2),
                                                                            Eigen::MatrixXd::Identity(2, 2)});
  EXPECT_EQ(id.gap, 0.0);
  EXPECT_TRUE(id.equality_case);
  EXPECT_TRUE(id.equality_holds);

  Eigen::MatrixXd b(2, 2);
  b << 1, 0, 0, 0;
  EXPECT_NEAR(newton_gap(b, NewtonWitness{b, Eigen::MatrixXd::Identity(2, 2)}).gap, 0.25, 1e-15);
  b << 2, 0, 0, 1;
  const auto r = newton_gap(b, NewtonWitness{b, Eigen::MatrixXd::Identity(2, 2)});
  EXPECT_NEAR(r.gap, 0.25, 1e-15);
  EXPECT_FALSE(r.equality_case);
}

TEST(Newton, WitnessValidation) {
  Eigen::MatrixXd B(2, 2), C(2, 2);
  B << 1, 0, 0, -1;  // not PSD
  C = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW((void)newton_gap(B * C, NewtonWitness{B, C}), std::invalid_argument);
  B << 1, 2, 0, 1;  // not symmetric
  EXPECT_THROW((void)newton_gap(B * C, NewtonWitness{B, C}), std::invalid_argument);
  B = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW((void)newton_gap(2.0 * C, NewtonWitness{B, C}), std::invalid_argument);
  EXPECT_THROW((void)newton_gap(Eigen::MatrixXd::Identity(2, 3)), std::invalid_argument);
}

TEST(Newton, RandomWitnessedProductsAreNonNegative) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 2 + trial % 2;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n));
    const Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd L(n);
    for (int i = 0; i < n; ++i) L[i] = lam(rng);
    const Eigen::MatrixXd B = Q * L.asDiagonal() * Q.transpose();
    Eigen::MatrixXd C = random_matrix(rng, n);
    C = 0.5 * (C + C.transpose()).eval();
    const Eigen::MatrixXd Bs = 0.5 * (B + B.transpose());
    const auto res = newton_gap(Bs * C, NewtonWitness{Bs, C});
    ASSERT_GE(res.gap, -1e-12) << "trial " << trial;
  }
}

TEST(Newton, ScalarMultiplesOfIdentityAreEqualityCases) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    for (int n : {2, 3}) {
      const double l = d(rng), m = d(rng) * (trial % 2 ? -1.0 : 1.0);
      const Eigen::MatrixXd B = l * Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd C = m * Eigen::MatrixXd::Identity(n, n);
      const auto res = newton_gap(B * C, NewtonWitness{B, C});
      EXPECT_TRUE(res.equality_case);
      EXPECT_TRUE(res.equality_holds);
      EXPECT_LE(res.proportionality, 1e-12);
    }
  }
}

TEST(AuditW, RadialLaplacianDefectShrinks) {
  double prev = 1.0;
  for (int n : {16, 32, 64}) {
    const auto g = sector(n);
    const auto W = hessian_W_field(oracle(g, make_laplacian_profile()), make_laplacian_profile());
    AuditWOptions o;
    o.expect_radial = true;
    const auto rep = audit_W(W, o);
    const double defect = rep.find("W_radial_defect")->values.at("max_norm_W_plus_id_over_N");
    EXPECT_LT(defect, prev);
    prev = defect;
    EXPECT_TRUE(rep.all_pass());
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(AuditW, DegenerateProfileRadialDefectIsInformational) {
  const auto g = sector(32);
  IdentityAuditOptions o;
  o.expect_radial = true;
  const auto rep = audit_identities(oracle(g, make_power_profile(3.0)), make_power_profile(3.0), o);
  EXPECT_TRUE(rep.find("W_radial_defect")->informational);
  EXPECT_FALSE(rep.find("trace_W")->informational);
}

TEST(Pohozaev, FullDiskRadialLaplacian) {
  const auto g = sector(64, 2.0 * pi);
  const auto res = pohozaev_residual(oracle(g, make_laplacian_profile()), make_laplacian_profile());
  EXPECT_NEAR(res.rhs, pi / 4.0, 1e-10);
  EXPECT_NEAR(res.lhs, pi / 4.0, 0.01 * pi / 4.0);
  EXPECT_LE(res.relative, 1e-2);
}

TEST(Pohozaev, ZeroField) {
  const auto res = pohozaev_residual(ScalarField(sector(16)), make_laplacian_profile());
  EXPECT_EQ(res.lhs, 0.0);
  EXPECT_EQ(res.rhs, 0.0);
  EXPECT_EQ(res.relative, 0.0);
}

TEST(Pohozaev, RefinementOrder) {
  for (const auto& prof : {make_laplacian_profile(), make_mean_curvature_profile()}) {
    std::vector<double> r;
    for (int n : {16, 32, 64}) r.push_back(std::abs(pohozaev_residual(oracle(sector(n), prof), prof).residual));
    EXPECT_GE(std::log2(r[0] / r[1]), 1.0) << prof.name;
    EXPECT_GE(std::log2(r[1] / r[2]), 1.0) << prof.name;
  }
}

TEST(InequalityGap, RadialOracleIsEqualityCase) {
  const auto g = sector(64);
  const auto u = oracle(g, make_laplacian_profile());
  const auto W = hessian_W_field(u, make_laplacian_profile());
  const auto gap = integral_inequality_gap(u, W, make_laplacian_profile());
  EXPECT_TRUE(gap.convex);
  EXPECT_TRUE(gap.equality);
  EXPECT_LE(std::abs(gap.gap), gap.tolerance);
}

TEST(InequalityGap, ZeroField) {
  const ScalarField u(sector(16));
  const auto W = hessian_W_field(u, make_laplacian_profile());
  EXPECT_EQ(integral_inequality_gap(u, W, make_laplacian_profile()).gap, 0.0);
}

TEST(InequalityGap, PerturbedSolvedFieldOnConvexSector) {
  const auto g = sector(64, pi / 2.0, 0.1);
  const auto sol = solve_linear_spaceform(g, 2, 0);
  const auto W = hessian_W_field(sol.u, make_laplacian_profile());
  const auto gap = integral_inequality_gap(sol.u, W, make_laplacian_profile());
  EXPECT_GE(gap.gap, -gap.tolerance);
}

TEST(CConsistency, LaplacianSector) {
  const auto g = sector(64);
  const auto cc = c_consistency(solve_linear_spaceform(g, 2, 0).u, make_laplacian_profile());
  EXPECT_NEAR(cc.c_formula, 0.5, 1e-12);
  EXPECT_NEAR(cc.c_mean, 0.5, 1e-6);
  EXPECT_LE(cc.spread, 1e-8);
}

TEST(CConsistency, CubicSector) {
  const auto g = sector(64);
  const auto sol = solve_Lf(g, make_power_profile(3.0));
  ASSERT_TRUE(sol.report.converged);
  const auto cc = c_consistency(sol.u, make_power_profile(3.0));
  EXPECT_NEAR(cc.c_formula, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(cc.c_mean, std::sqrt(0.5), 0.02 * std::sqrt(0.5));
}

TEST(CConsistency, PerturbedSpreadIsLarge) {
  const auto cc = c_consistency(solve_linear_spaceform(sector(32, pi / 2.0, 0.1), 2, 0).u, make_laplacian_profile());
  EXPECT_GT(cc.spread, 1e-2);
  EXPECT_GE(cc.max_deviation, cc.spread);
}

TEST(W12, RadialLaplacianNorm) {
  const auto g = sector(64);
  const auto W = hessian_W_field(oracle(g, make_laplacian_profile()), make_laplacian_profile());
  EXPECT_NEAR(w12_diagnostic(W), std::sqrt(g->area() / 2.0), 1e-3);
  EXPECT_EQ(w12_diagnostic(hessian_W_field(ScalarField(g), make_laplacian_profile())), 0.0);
}

TEST(FluxBalance, SolvedFieldsAtSixtyFour) {
  const auto g = sector(64, pi / 2.0, 0.1);
  EXPECT_LE(flux_balance(solve_linear_spaceform(g, 2, 0).u, make_laplacian_profile()).relative, 1e-2);
  const auto cub = solve_Lf(sector(64), make_power_profile(3.0));
  EXPECT_LE(flux_balance(cub.u, make_power_profile(3.0)).relative, 1e-2);
}

TEST(AuditIdentities, OracleFieldsPass) {
  for (const auto& prof : {make_laplacian_profile(), make_mean_curvature_profile()}) {
    IdentityAuditOptions o;
    o.expect_radial = true;
    const auto rep = audit_identities(oracle(sector(64), prof), prof, o);
    for (const auto& e : rep.entries) EXPECT_TRUE(e.pass) << prof.name << ": " << e.name;
  }
}

TEST(AuditIdentities, EqualityPropagationConstantIsReported) {
  // spread of the Neumann data against the pointwise W defect, per level
  for (int n : {16, 32, 64}) {
    IdentityAuditOptions o;
    o.expect_radial = true;
    const auto rep = audit_identities(oracle(sector(n), make_laplacian_profile()), make_laplacian_profile(), o);
    const double tau = rep.find("W_radial_defect")->values.at("max_norm_W_plus_id_over_N");
    const double spread = rep.find("c_consistency")->values.at("spread");
    const double C = tau > 0.0 ? spread / tau : 0.0;
    RecordProperty("propagation_constant_n" + std::to_string(n), std::to_string(C));
    EXPECT_TRUE(std::isfinite(C));
  }
}

TEST(AuditIdentities, NonConvexInequalityIsInformational) {
  const auto rep = audit_identities(solve_linear_spaceform(sector(32, 1.5 * pi, 0.1), 2, 0).u,
                                    make_laplacian_profile());
  EXPECT_TRUE(rep.find("integral_inequality")->informational);
}

TEST(AuditIdentities, RejectsCurvedGrids) {
  const auto g = build_grid(ConeSection(SpaceForm::hyperbolic(), pi / 2.0), 16, 16, {1.0, 0.0, 2});
  EXPECT_THROW((void)audit_identities(ScalarField(g), make_laplacian_profile()), std::invalid_argument);
}
