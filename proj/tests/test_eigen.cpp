#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace anisokpp;
using namespace anisokpp::testing;

namespace {
const double kQuarterPi2 = M_PI * M_PI / 4.0;
}

TEST(RayleighMu, Examples) {
  const auto g = dn(1024);
  const auto one = GridFunction::constant(g, 1.0);
  const auto s = GridFunction::interpolate(g, [](double x, double) { return std::sin(M_PI * x / 2); });
  EXPECT_NEAR(rayleigh_mu(AnisotropyNorm::euclidean(1), 1.0, one, s), kQuarterPi2 - 1.0, 1e-3);

  std::mt19937_64 rng(5);
  const auto u = random_function(g, rng);
  const auto norm = AnisotropyNorm::euclidean(1);
  const double q = rayleigh_mu(norm, 1.0, GridFunction(g), u);
  EXPECT_GT(q, 0.0);
  EXPECT_NEAR(q, energy(norm, u) / std::pow(l2_norm(u), 2), 1e-12 * q);
  EXPECT_THROW((void)rayleigh_mu(norm, 1.0, one, GridFunction(g)), DegenerateInputError);
}

TEST(MinimizeMu, ClosedForms) {
  const auto g = dn(1024);
  const auto one = GridFunction::constant(g, 1.0);
  const auto e = minimize_mu(AnisotropyNorm::euclidean(1), 1.0, one, g);
  ASSERT_TRUE(e.converged);
  EXPECT_NEAR(e.value, kQuarterPi2 - 1.0, 1e-3);
  const auto a = minimize_mu(AnisotropyNorm::asym1d(2.0, 1.0), 1.0, one, g);
  ASSERT_TRUE(a.converged);
  EXPECT_LE(std::abs(a.value - (4.0 * kQuarterPi2 - 1.0)) / (4.0 * kQuarterPi2 - 1.0), 1e-2);
}

TEST(MinimizeMu, IncreasingInD) {
  const auto g = dn(128);
  std::mt19937_64 rng(9);
  const auto m = random_function(g, rng);
  const auto norm = AnisotropyNorm::asym1d(1.0, 2.0);
  double prev = -std::numeric_limits<double>::infinity();
  for (double d : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
    const auto r = minimize_mu(norm, d, m, g);
    ASSERT_TRUE(r.converged) << d;
    EXPECT_GT(r.value, prev);
    prev = r.value;
  }
}

TEST(MinimizeLambda, ClosedForms) {
  const auto g = dn(1024);
  const auto one = GridFunction::constant(g, 1.0);
  const auto e = minimize_lambda(AnisotropyNorm::euclidean(1), one, g);
  ASSERT_TRUE(e.converged);
  EXPECT_LE(std::abs(e.value - kQuarterPi2) / kQuarterPi2, 1e-3);
  const auto a = minimize_lambda(AnisotropyNorm::asym1d(2.0, 1.0), one, g);
  ASSERT_TRUE(a.converged);
  EXPECT_LE(std::abs(a.value - M_PI * M_PI) / (M_PI * M_PI), 1e-2);

  const auto sq = square_left(32);
  const auto s = minimize_lambda(AnisotropyNorm::euclidean(2), GridFunction::constant(sq, 1.0), sq);
  ASSERT_TRUE(s.converged);
  EXPECT_LE(std::abs(s.value - kQuarterPi2) / kQuarterPi2, 1e-2);
}

TEST(MinimizeLambda, InfeasibleWeight) {
  const auto g = dn(32);
  EXPECT_THROW((void)minimize_lambda(AnisotropyNorm::euclidean(1), GridFunction::constant(g, -1.0), g),
               InfeasibleWeightError);
  // Positive only on the Dirichlet node.
  auto m = GridFunction::constant(g, -1.0);
  m[0] = 1.0;
  EXPECT_THROW((void)minimize_lambda(AnisotropyNorm::euclidean(1), m, g), InfeasibleWeightError);
}

TEST(MinimizeLambda, EigenpairInvariants) {
  std::mt19937_64 rng(13);
  const auto g = dn(256);
  for (const auto& norm : {AnisotropyNorm::euclidean(1), AnisotropyNorm::asym1d(2.0, 1.0),
                           AnisotropyNorm::asym1d(1.0, 3.0)}) {
    auto m = random_function(g, rng, -1.0, 1.0);
    m[g->node_count() - 1] = 1.0;
    const auto r = minimize_lambda(norm, m, g);
    ASSERT_TRUE(r.converged);
    const auto& phi = r.eigenfunction;
    EXPECT_TRUE(phi.satisfies_dirichlet());
    for (int k : g->free_nodes()) EXPECT_GT(phi[static_cast<std::size_t>(k)], 0.0);
    EXPECT_NEAR(mass_integral(m, phi, 2), 1.0, 1e-12);
    EXPECT_NEAR(rayleigh_lambda(norm, m, phi), r.value, 1e-10 * r.value);
    EXPECT_LE(r.residual, 1e-8);
  }
}

TEST(MinimizeLambda, MeshConvergenceOrder) {
  double prev = 0.0;
  for (int cells : {64, 128, 256, 512}) {
    const auto g = dn(cells);
    const double err = std::abs(
        minimize_lambda(AnisotropyNorm::euclidean(1), GridFunction::constant(g, 1.0), g).value - kQuarterPi2);
    if (prev > 0.0) { EXPECT_GE(std::log2(prev / err), 1.8) << cells; }
    prev = err;
  }
}

TEST(MinimizeLambda, UniqueAcrossSeeds) {
  const auto g = dn(128);
  const auto m = interval_weight(g, 0.3, 0.8, 0.5);
  const auto norm = AnisotropyNorm::asym1d(1.0, 2.0);
  const auto base = minimize_lambda(norm, m, g);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    EigenOptions o;
    o.seed = seed;
    const auto r = minimize_lambda(norm, m, g, o);
    EXPECT_NEAR(r.value, base.value, 1e-8 * base.value);
    EXPECT_LE((r.eigenfunction.values() - base.eigenfunction.values()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(MinimizeLambda, ProjectedGradientAgrees) {
  const auto g = dn(64);
  const auto m = interval_weight(g, 0.5, 1.0, 1.0);
  const auto norm = AnisotropyNorm::asym1d(2.0, 1.0);
  EigenOptions o;
  o.method = EigenMethod::ProjectedGradientBB;
  const auto pg = minimize_lambda(norm, m, g, o);
  const auto inv = minimize_lambda(norm, m, g);
  ASSERT_TRUE(pg.converged);
  EXPECT_NEAR(pg.value, inv.value, 1e-6 * inv.value);
}

TEST(SurvivalThreshold, DnUnitWeight) {
  const auto g = dn(1024);
  const auto one = GridFunction::constant(g, 1.0);
  const auto norm = AnisotropyNorm::euclidean(1);
  const double ds = survival_threshold(norm, one, g);
  EXPECT_NEAR(ds, 4.0 / (M_PI * M_PI), 1e-3);
  EXPECT_LT(minimize_mu(norm, 0.5 * ds, one, g).value, 0.0);
  EXPECT_GT(minimize_mu(norm, 2.0 * ds, one, g).value, 0.0);
  EXPECT_LE(std::abs(minimize_mu(norm, ds, one, g).value), 5e-3);
}
