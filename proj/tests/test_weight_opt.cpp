#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace anisokpp;
using namespace anisokpp::testing;

TEST(ValidateClass, Examples) {
  const auto g = dn(64);
  const WeightClass wc{1.0, 0.0, 1.0};
  EXPECT_FALSE(validate_class(GridFunction::constant(g, 1.0), wc).valid);
  EXPECT_TRUE(validate_class(interval_weight(g, 0.5, 1.0, 1.0), wc).valid);
  const auto neg = validate_class(GridFunction::constant(g, -1.0), wc);
  EXPECT_FALSE(neg.valid);
  EXPECT_EQ(neg.violations.size(), 1u);
}

TEST(WeightClass, Validation) {
  EXPECT_THROW((WeightClass{0.0, 0.0, 1.0}.validate()), ArgumentError);
  EXPECT_THROW((WeightClass{1.0, 1.0, 1.0}.validate()), ArgumentError);
  EXPECT_THROW((WeightClass{1.0, -1.0, 1.0}.validate()), ArgumentError);
  EXPECT_DOUBLE_EQ((WeightClass{1.0, 0.0, 1.0}.target_measure()), 0.5);
}

TEST(IntervalWeight, LumpedIntegralIsExact) {
  const auto g = dn(100);
  const auto m = interval_weight(g, 0.305, 0.8, 0.5);
  const double exact = 0.495 - 0.5 * 0.505;
  EXPECT_NEAR(integral(m), exact, 1e-13);
}

TEST(Bathtub, StrictlyMonotonePhi) {
  const auto g = dn(64);
  const auto phi = GridFunction::interpolate(g, [](double x, double) { return x; });
  const auto b = bathtub(phi, 0.5, 1.0);
  for (std::size_t k = 0; k < g->node_count(); ++k) EXPECT_EQ(b.omega[k] != 0, g->coordinate(k, 0) > 0.5) << k;
  EXPECT_DOUBLE_EQ(b.threshold, 0.5);
  EXPECT_EQ(b.ties_split, 0);
}

TEST(Bathtub, ConstantPhiTiesByIndex) {
  const auto g = dn(64);
  auto phi = GridFunction::constant(g, 1.0);
  phi.apply_dirichlet();
  const auto b = bathtub(phi, 0.5, 1.0);
  EXPECT_LE(std::abs(b.measure - 0.5), g->spacing(0));
  // Ties are admitted in index order, so omega is an initial run of free nodes.
  bool ended = false;
  for (std::size_t k = 1; k < g->node_count(); ++k) {
    if (!b.omega[k]) {
      ended = true;
    } else {
      EXPECT_FALSE(ended) << k;
    }
  }
  EXPECT_GT(b.ties_split, 0);
}

TEST(Bathtub, SuperlevelSetAndMeasure) {
  std::mt19937_64 rng(17);
  for (auto g : {dn(50), square_left(9)}) {
    for (int s = 0; s < 50; ++s) {
      const auto phi = random_function(g, rng, 0.0, 1.0);
      const double target = 0.2 + 0.6 * s / 50.0;
      const auto b = bathtub(phi, target, 0.7);
      double wmax = 0.0;
      for (double w : g->weights()) wmax = std::max(wmax, w);
      EXPECT_LE(std::abs(b.measure - target), wmax);
      for (std::size_t k = 0; k < g->node_count(); ++k) {
        if (phi[k] > b.threshold) { EXPECT_TRUE(b.omega[k]); }
        if (b.omega[k]) { EXPECT_GE(phi[k], b.threshold); }
        EXPECT_TRUE(b.weight[k] == 1.0 || b.weight[k] == -0.7);
      }
    }
  }
  EXPECT_THROW((void)bathtub(GridFunction::constant(dn(8), 1.0), 1.0, 1.0), ArgumentError);
}

namespace {

void expect_interval(const WeightOptResult& r, const GridPtr& g, double lo, double hi) {
  const double h = g->spacing(0);
  int first = -1, last = -1;
  for (int k = 0; k <= g->cells(0); ++k)
    if (r.weight.omega[static_cast<std::size_t>(k)]) {
      if (first < 0) first = k;
      last = k;
    }
  ASSERT_GE(first, 0);
  for (int k = first; k <= last; ++k) EXPECT_TRUE(r.weight.omega[static_cast<std::size_t>(k)]) << k;
  EXPECT_NEAR(std::max(0.0, (first - 0.5) * h), lo, 2 * h);
  EXPECT_NEAR(std::min(1.0, (last + 0.5) * h), hi, 2 * h);
}

void expect_descent(const WeightOptResult& r) {
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].lambda, r.trace[i - 1].lambda + 1e-10);
}

}  // namespace

TEST(OptimizeWeight, DnAndNdIntervals) {
  const auto norm = AnisotropyNorm::euclidean(1);
  const WeightClass wc{1.0, 0.0, 1.0};
  const auto gd = dn(512);
  const auto rd = optimize_weight(norm, gd, wc);
  EXPECT_EQ(rd.stop, StopReason::FixedPoint);
  EXPECT_TRUE(rd.converged);
  expect_interval(rd, gd, 0.5, 1.0);
  expect_descent(rd);
  EXPECT_NEAR(rd.weight.measure, 0.5, gd->spacing(0));

  const auto gn = nd(512);
  const auto rn = optimize_weight(norm, gn, wc);
  EXPECT_EQ(rn.stop, StopReason::FixedPoint);
  expect_interval(rn, gn, 0.0, 0.5);
}

TEST(OptimizeWeight, AnisotropyDoesNotMoveTheSet) {
  const WeightClass wc{1.0, 0.0, 1.0};
  const auto g = dn(256);
  for (const auto& norm : {AnisotropyNorm::asym1d(2.0, 1.0), AnisotropyNorm::asym1d(1.0, 2.0)}) {
    const auto r = optimize_weight(norm, g, wc);
    EXPECT_TRUE(r.fixed_point);
    expect_interval(r, g, 0.5, 1.0);
  }
}

TEST(OptimizeWeight, OtherClassParameters) {
  const WeightClass wc{2.0, 0.5, 1.0};
  const auto g = dn(256);
  const auto r = optimize_weight(AnisotropyNorm::euclidean(1), g, wc);
  EXPECT_TRUE(r.fixed_point);
  expect_interval(r, g, 0.5 / 3.0, 1.0);
}

TEST(OptimizeWeight, BeatsRandomAdmissibleWeights) {
  const auto norm = AnisotropyNorm::asym1d(2.0, 1.0);
  const WeightClass wc{1.0, 0.0, 1.0};
  const auto g = dn(128);
  const auto best = optimize_weight(norm, g, wc);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 10; ++s) {
    GridFunction m(g);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = u(rng);
    m[g->node_count() - 1] = 1.0;
    // Shift down and clip to [-beta, 1] until the integral constraint holds.
    for (double excess = integral(m); excess > 0.0; excess = integral(m))
      for (std::size_t k = 0; k + 1 < m.size(); ++k) m[k] = std::clamp(m[k] - excess - 1e-3, -1.0, 1.0);
    ASSERT_TRUE(validate_class(m, wc).valid) << s;
    EXPECT_LE(best.eigen.value, minimize_lambda(norm, m, g).value + 1e-10) << s;
  }
}

TEST(OptimizeWeight, RandomStartsReachTheSameSet) {
  const auto g = dn(128);
  const WeightClass wc{1.0, 0.0, 1.0};
  WeightOptOptions o;
  std::vector<WeightOptResult> distinct;
  const auto best = optimize_weight_multistart(AnisotropyNorm::euclidean(1), g, wc, o, 4, 1, &distinct);
  EXPECT_EQ(distinct.size(), 1u);
  expect_interval(best, g, 0.5, 1.0);
}

TEST(OptimizeWeight, SquareTraceAndTwoValuedWeight) {
  const auto g = square_left(16);
  const WeightClass wc{1.0, -0.2, 1.0};
  const auto r = optimize_weight(AnisotropyNorm::ellipse((Mat(2, 2) << 4.0, 0.0, 0.0, 1.0).finished()), g, wc);
  EXPECT_NE(r.stop, StopReason::MaxOuter);
  expect_descent(r);
  for (std::size_t k = 0; k < g->node_count(); ++k) EXPECT_TRUE(r.weight.weight[k] == 1.0 || r.weight.weight[k] == -1.0);
  if (r.rejected_lambda) { EXPECT_GT(*r.rejected_lambda, r.eigen.value); }
}

TEST(OptimizeWeight, InfeasibleStartThrows) {
  const auto g = dn(16);
  WeightOptOptions o;
  o.initial = InitialSet::Explicit;
  o.initial_omega.assign(g->node_count(), 0);
  o.initial_omega[0] = 1;
  EXPECT_THROW((void)optimize_weight(AnisotropyNorm::euclidean(1), g, WeightClass{1.0, 0.0, 1.0}, o),
               InfeasibleWeightError);
}
