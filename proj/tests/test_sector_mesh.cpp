#include "serrin/sector_mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace serrin;
using std::numbers::pi;

namespace {
GridPtr quarter(int n, int K = 0, double eps = 0.0) {
  return build_grid(ConeSection(SpaceForm(K), pi / 2.0), n, n, {1.0, eps, 2});
}
}  // namespace

TEST(SectorGrid, Counting) {
  const auto g = quarter(16);
  EXPECT_EQ(g->cell_count(), 256);
  EXPECT_EQ(g->count_faces(BoundaryTag::Gamma0), 16);
  EXPECT_EQ(g->count_faces(BoundaryTag::Gamma1), 32);
}

TEST(SectorGrid, EuclideanMeasures) {
  const auto m = boundary_measures(*quarter(64));
  EXPECT_NEAR(m.area, pi / 4.0, 0.005 * pi / 4.0);
  EXPECT_NEAR(m.gamma0_length, pi / 2.0, 0.005 * pi / 2.0);
}

TEST(SectorGrid, HyperbolicMeasures) {
  const auto m = boundary_measures(*quarter(64, -1));
  const double area = pi / 2.0 * (std::cosh(1.0) - 1.0);
  const double len = pi / 2.0 * std::sinh(1.0);
  EXPECT_NEAR(area, 0.85306, 1e-5);
  EXPECT_NEAR(len, 1.84600, 1e-5);
  EXPECT_NEAR(m.area, area, 0.005 * area);
  EXPECT_NEAR(m.gamma0_length, len, 0.005 * len);
}

TEST(SectorGrid, PerturbedBoundaryIsLonger) {
  for (int n : {16, 64}) {
    EXPECT_GT(quarter(n, 0, 0.1)->gamma0_length(), quarter(n)->gamma0_length());
  }
}

TEST(SectorGrid, OutwardNormals) {
  const auto g = quarter(16);
  for (const auto& f : g->faces()) {
    const auto nu = g->outward_normal(f);
    if (f.side == FaceSide::WallLow) {
      EXPECT_EQ(nu[0], 0.0);
      EXPECT_EQ(nu[1], -1.0);
    } else if (f.side == FaceSide::WallHigh) {
      EXPECT_EQ(nu[0], 0.0);
      EXPECT_EQ(nu[1], 1.0);
    } else {
      EXPECT_NEAR(nu[0], 1.0, 1e-15);
      EXPECT_NEAR(nu[1], 0.0, 1e-15);
    }
  }
}

TEST(SectorGrid, WallsAreRadial) {
  // x.nu = r nu_r vanishes exactly on every wall face
  const auto g = quarter(32, 0, 0.2);
  for (const auto& f : g->faces()) {
    if (f.tag == BoundaryTag::Gamma1) EXPECT_EQ(f.s * g->outward_normal(f)[0], 0.0);
  }
}

TEST(SectorGrid, PerturbedNormalIsUnit) {
  const auto g = quarter(32, -1, 0.2);
  for (const auto& f : g->faces()) EXPECT_NEAR(g->outward_normal(f).norm(), 1.0, 1e-15);
}

TEST(SectorGrid, AreaRefinementOrder) {
  const double exact = pi / 2.0 * (std::cosh(1.0) - 1.0);
  const double e1 = std::abs(quarter(16, -1)->area() - exact);
  const double e2 = std::abs(quarter(32, -1)->area() - exact);
  const double e3 = std::abs(quarter(64, -1)->area() - exact);
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
  // Euclidean area and constant-radius arc lengths are reproduced exactly
  EXPECT_NEAR(quarter(16)->area(), pi / 4.0, 1e-14);
  EXPECT_NEAR(quarter(16, -1)->gamma0_length(), pi / 2.0 * std::sinh(1.0), 1e-13);
}

TEST(SectorGrid, PerturbedLengthRichardsonOrder) {
  // k = 3 is not symmetric about theta = alpha, so the midpoint rule is only second order
  auto len = [](int n) {
    return build_grid(ConeSection(SpaceForm::euclidean(), pi / 2.0), n, n, {1.0, 0.1, 3})->gamma0_length();
  };
  const double l1 = len(16), l2 = len(32), l3 = len(64);
  EXPECT_GE(std::log2(std::abs(l1 - l2) / std::abs(l2 - l3)), 1.8);
}

TEST(SectorGrid, Validation) {
  EXPECT_THROW((void)quarter(4), std::invalid_argument);
  EXPECT_THROW((void)build_grid(ConeSection(SpaceForm::sphere(), pi / 2.0), 16, 16, {1.6, 0.0, 2}), std::out_of_range);
  EXPECT_THROW((void)build_grid(ConeSection(SpaceForm::euclidean(), pi / 2.0), 16, 16, {1.0, 1.0, 2}),
               std::invalid_argument);
}

TEST(SectorGrid, CornerOrthogonality) {
  EXPECT_TRUE(quarter(16, 0, 0.1)->corners_orthogonal());
  const auto odd = build_grid(ConeSection(SpaceForm::euclidean(), pi / 2.0), 16, 16, {1.0, 0.1, 1});
  EXPECT_FALSE(odd->corners_orthogonal());
}

TEST(SectorGrid, HashIsStableAndDiscriminating) {
  EXPECT_EQ(quarter(16)->hash(), quarter(16)->hash());
  EXPECT_NE(quarter(16)->hash(), quarter(32)->hash());
  EXPECT_NE(quarter(16)->hash(), quarter(16, -1)->hash());
  EXPECT_EQ(quarter(16)->hash().size(), 16u);
}

TEST(SectorGrid, CellCentresAwayFromVertex) {
  const auto g = quarter(16);
  for (int c = 0; c < g->cell_count(); ++c) EXPECT_GT(g->r(c), 0.0);
}
