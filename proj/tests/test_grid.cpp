#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace anisokpp;
using namespace anisokpp::testing;
using BC = BoundaryCondition;

TEST(BuildGrid, Interval) {
  const auto g = dn(4);
  EXPECT_EQ(g->node_count(), 5u);
  EXPECT_TRUE(g->is_dirichlet(0));
  for (std::size_t k = 1; k < 5; ++k) EXPECT_FALSE(g->is_dirichlet(k));
  EXPECT_DOUBLE_EQ(g->spacing(0), 0.25);
  EXPECT_DOUBLE_EQ(g->measure(), 1.0);
}

TEST(BuildGrid, SquareLeftDirichlet) {
  const auto g = square_left(4);
  EXPECT_EQ(g->node_count(), 25u);
  int masked = 0;
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    masked += g->is_dirichlet(k);
    if (g->is_dirichlet(k)) { EXPECT_EQ(g->coordinate(k, 0), 0.0); }
  }
  EXPECT_EQ(masked, 5);
}

TEST(BuildGrid, Errors) {
  EXPECT_THROW((void)interval(4, BC::Neumann, BC::Neumann), InvalidDomainError);
  EXPECT_THROW((void)build_grid(1, {4}, {{BoundaryPiece::Left, BC::Dirichlet}}), InvalidDomainError);
  EXPECT_THROW((void)build_grid(1, {1}, {{BoundaryPiece::Left, BC::Dirichlet}, {BoundaryPiece::Right, BC::Neumann}}),
               ArgumentError);
  EXPECT_THROW((void)build_grid(3, {4, 4, 4}, {}), UnsupportedDimensionError);
}

TEST(BuildGrid, WeightsSumToMeasure) {
  for (auto g : {dn(7), square_left(5)}) {
    double s = 0.0;
    for (double w : g->weights()) s += w;
    EXPECT_NEAR(s, g->measure(), 1e-14);
  }
}

TEST(Energy, Examples) {
  const auto asym = AnisotropyNorm::asym1d(2.0, 1.0);
  const auto g = dn(16);
  EXPECT_NEAR(energy(asym, GridFunction::interpolate(g, [](double x, double) { return x; })), 4.0, 1e-13);
  const auto gr = nd(16);
  EXPECT_NEAR(energy(asym, GridFunction::interpolate(gr, [](double x, double) { return 1.0 - x; })), 1.0, 1e-13);

  const auto fine = dn(1024);
  const auto s = GridFunction::interpolate(fine, [](double x, double) { return std::sin(M_PI * x / 2); });
  const double exact = M_PI * M_PI / 8.0;
  EXPECT_LE(std::abs(energy(AnisotropyNorm::euclidean(1), s) - exact) / exact, 1e-5);
}

TEST(Energy, TwoHomogeneous) {
  std::mt19937_64 rng(7);
  const auto g = square_left(8);
  const auto norm = AnisotropyNorm::ellipse((Mat(2, 2) << 4.0, 1.0, 1.0, 2.0).finished());
  const auto u = random_function(g, rng);
  GridFunction v(g, -2.5 * u.values());
  EXPECT_NEAR(energy(norm, v), 6.25 * energy(norm, u), 1e-12 * energy(norm, v));
}

TEST(MassIntegral, Examples) {
  const auto g = dn(8);
  const auto one = GridFunction::constant(g, 1.0);
  EXPECT_DOUBLE_EQ(mass_integral(one, one, 2), 1.0);

  const auto fine = dn(1024);
  const auto s = GridFunction::interpolate(fine, [](double x, double) { return std::sin(M_PI * x / 2); });
  EXPECT_NEAR(mass_integral(GridFunction::constant(fine, 1.0), s, 2), 0.5, 1e-5);

  const auto neg = GridFunction::constant(g, -1.0);
  EXPECT_LT(mass_integral(neg, one, 2), 0.0);
  EXPECT_THROW((void)mass_integral(one, GridFunction::constant(dn(4), 1.0), 2), ArgumentError);
}

TEST(EnergyGradient, ZeroAtZero) {
  const auto g = square_left(6);
  const auto grad = energy_gradient(AnisotropyNorm::euclidean(2), GridFunction(g));
  EXPECT_EQ(grad.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(EnergyGradient, MatchesCentralDifferences) {
  const std::vector<std::pair<AnisotropyNorm, GridPtr>> cases = {
      {AnisotropyNorm::euclidean(1), dn(32)},
      {AnisotropyNorm::asym1d(2.0, 1.0), dn(32)},
      {AnisotropyNorm::asym1d(1.0, 3.0), nd(32)},
      {AnisotropyNorm::euclidean(2), square_left(6)},
      {AnisotropyNorm::ellipse((Mat(2, 2) << 4.0, 1.0, 1.0, 2.0).finished()), square_left(6)},
  };
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int s = 0; s < 200; ++s) {
    const auto& [norm, g] = cases[static_cast<std::size_t>(s) % cases.size()];
    const auto u = random_function(g, rng);
    const auto dir = random_function(g, rng);
    const double grad_dot = energy_gradient(norm, u).values().dot(dir.values());
    const double eps = 1e-6;
    const double fd = (energy(norm, GridFunction(g, u.values() + eps * dir.values())) -
                       energy(norm, GridFunction(g, u.values() - eps * dir.values()))) /
                      (2.0 * eps);
    const double scale = energy_gradient(norm, u).values().norm() * dir.values().norm();
    EXPECT_LE(std::abs(fd - grad_dot), 1e-6 * scale) << "sample " << s;
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(Poincare, ClosedForms) {
  EXPECT_NEAR(poincare_constant(dn(1024)), 2.0 / M_PI, 1e-3);
  EXPECT_NEAR(poincare_constant(interval(1024, BC::Dirichlet, BC::Dirichlet)), 1.0 / M_PI, 1e-3);
  EXPECT_NEAR(poincare_constant(square_left(32)), 2.0 / M_PI, 1e-2);
}

TEST(Poincare, InequalityOnRandomFunctions) {
  const auto g = dn(64);
  const double c = poincare_constant(g);
  std::mt19937_64 rng(3);
  for (int s = 0; s < 200; ++s) {
    const auto u = random_function(g, rng);
    EXPECT_LE(l2_norm(u), c * std::sqrt(dirichlet_energy(u)) * (1.0 + 1e-8));
  }
}

TEST(GridFunction, DirichletMembership) {
  const auto g = dn(4);
  auto u = GridFunction::constant(g, 1.0);
  EXPECT_FALSE(u.satisfies_dirichlet());
  u.apply_dirichlet();
  EXPECT_TRUE(u.satisfies_dirichlet());
  EXPECT_THROW(GridFunction(g, Vec::Zero(3)), ArgumentError);
}

TEST(DistanceToDirichlet, PositiveOffDirichlet) {
  const auto g = square_left(8);
  const auto d = distance_to_dirichlet(g);
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    if (g->is_dirichlet(k)) {
      EXPECT_EQ(d[k], 0.0);
    } else {
      EXPECT_NEAR(d[k], g->coordinate(k, 0), 1e-15);
    }
  }
}
