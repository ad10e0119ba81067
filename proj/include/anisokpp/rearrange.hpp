/**
 * @file rearrange.hpp
 * @brief 1-D monotone rearrangements, the Hardy-Littlewood and Polya checks, and
 *        the end-to-end check of the optimal-interval result.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "anisokpp/shooting.hpp"
#include "anisokpp/weight_opt.hpp"

namespace anisokpp {

enum class RearrangeDirection { Increasing, Decreasing };

/// Nodal values sorted along the grid.
[[nodiscard]] inline GridFunction monotone_rearrange(const GridFunction& u, RearrangeDirection dir) {
  if (u.grid().dim() != 1) throw UnsupportedDimensionError("monotone_rearrange: 1-D grids only");
  Vec v = u.values();
  if (dir == RearrangeDirection::Increasing)
    std::sort(v.begin(), v.end());
  else
    std::sort(v.begin(), v.end(), std::greater<>());
  return GridFunction(u.grid_ptr(), std::move(v));
}

/// Same multiset of nodal values.
[[nodiscard]] inline bool equimeasurable(const GridFunction& a, const GridFunction& b) {
  if (a.size() != b.size()) return false;
  Vec x = a.values(), y = b.values();
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

/// Monotone direction compatible with the Dirichlet end of a 1-D grid.
[[nodiscard]] inline RearrangeDirection direction_for(const Grid& grid) {
  if (grid.dim() != 1) throw UnsupportedDimensionError("direction_for: 1-D grids only");
  const bool left = grid.condition(BoundaryPiece::Left) == BoundaryCondition::Dirichlet;
  const bool right = grid.condition(BoundaryPiece::Right) == BoundaryCondition::Dirichlet;
  if (left && right) throw ArgumentError("direction_for: both ends Dirichlet, no monotone rearrangement applies");
  return left ? RearrangeDirection::Increasing : RearrangeDirection::Decreasing;
}

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double slack = 1e-10;
};

namespace detail {

/// |Omega|/n sum m u^2: equal node weights, so sorting preserves it exactly.
inline double equal_weight_integral(const GridFunction& m, const GridFunction& u) {
  return u.grid().measure() / static_cast<double>(u.size()) * m.values().dot(u.values().cwiseAbs2());
}

}  // namespace detail

/// lhs = int m* (u*)^2, rhs = int m u^2 with both rearranged in `dir`; holds iff lhs >= rhs - slack.
/// Integrals use equal node weights (see equal_weight_integral), u >= 0.
[[nodiscard]] inline InequalityReport hardy_littlewood_check(const GridFunction& m, const GridFunction& u,
                                                             RearrangeDirection dir = RearrangeDirection::Increasing,
                                                             double slack = 1e-10) {
  detail::check_same_grid(m, u, "hardy_littlewood_check");
  if (u.values().minCoeff() < 0.0) throw ArgumentError("hardy_littlewood_check: u must be nonnegative");
  InequalityReport r;
  r.slack = slack;
  r.lhs = detail::equal_weight_integral(monotone_rearrange(m, dir), monotone_rearrange(u, dir));
  r.rhs = detail::equal_weight_integral(m, u);
  r.holds = r.lhs >= r.rhs - slack;
  return r;
}

/// lhs = E(u*), rhs = E(u) with the direction set by the Dirichlet end; holds iff lhs <= rhs + slack.
[[nodiscard]] inline InequalityReport polya_check(const AnisotropyNorm& norm, const GridFunction& u,
                                                  double slack = 1e-10) {
  if (norm.dim() != 1 ||
      (norm.kind() != AnisotropyNorm::Kind::Asym1D && norm.kind() != AnisotropyNorm::Kind::Euclidean))
    throw ArgumentError("polya_check: requires a 1-D Euclidean or asym1d norm");
  InequalityReport r;
  r.slack = slack;
  r.lhs = energy(norm, monotone_rearrange(u, direction_for(u.grid())));
  r.rhs = energy(norm, u);
  r.holds = r.lhs <= r.rhs + slack;
  return r;
}

struct TheoremReport {
  explicit TheoremReport(WeightOptResult r) : optimum(std::move(r)) {}

  WeightOptResult optimum;
  bool passed = false;
  double omega_lo = 0.0, omega_hi = 0.0;        // converged set as an interval of dual cells
  double expected_lo = 0.0, expected_hi = 0.0;  // predicted optimal interval
  bool contiguous = false;
  bool endpoints_ok = false;
  bool monotone_ok = false;
  double lambda = 0.0;
  double lambda_oracle = 0.0;
  double lambda_rel_error = 0.0;
  bool lambda_ok = false;
  bool optimizer_converged = false;
  std::vector<std::string> messages;
};

/// Slopes (a, b) of a 1-D norm for the shooting oracle.
[[nodiscard]] inline std::pair<double, double> slopes_1d(const AnisotropyNorm& norm) {
  switch (norm.kind()) {
    case AnisotropyNorm::Kind::Euclidean: return {1.0, 1.0};
    case AnisotropyNorm::Kind::Asym1D: return {norm.a(), norm.b()};
    case AnisotropyNorm::Kind::Ellipse: {
      const double s = std::sqrt(norm.matrix()(0, 0));
      return {s, s};
    }
    default: throw ArgumentError("slopes_1d: custom norms have no closed-form slopes");
  }
}

/// Runs optimize_weight on (0,1) with one Dirichlet end and checks that the optimal
/// set is the interval ((1-m0)/(1+beta), 1) (DN) or (0, (beta+m0)/(1+beta)) (ND)
/// within 2 cells, that the eigenfunction is monotone, and that lambda matches the
/// shooting oracle within 2e-3.
[[nodiscard]] inline TheoremReport verify_1d_theorem(const AnisotropyNorm& norm, double beta, double m0,
                                                     MixedBoundary boundary, int cells,
                                                     const WeightOptOptions& opts = {}) {
  if (norm.dim() != 1) throw UnsupportedDimensionError("verify_1d_theorem: 1-D norms only");
  const bool dn = boundary == MixedBoundary::DN;
  const auto grid = build_grid(1, {cells},
                               {{BoundaryPiece::Left, dn ? BoundaryCondition::Dirichlet : BoundaryCondition::Neumann},
                                {BoundaryPiece::Right, dn ? BoundaryCondition::Neumann : BoundaryCondition::Dirichlet}});
  const WeightClass wc{beta, m0, 1.0};
  wc.validate();
  TheoremReport rep(optimize_weight(norm, grid, wc, opts));
  rep.optimizer_converged = rep.optimum.converged && rep.optimum.fixed_point;
  if (!rep.optimizer_converged) rep.messages.push_back("optimizer did not reach a set fixed point");
  if (rep.optimum.rejected_lambda) rep.messages.push_back("a bathtub step would have raised lambda");

  const auto& om = rep.optimum.weight.omega;
  const double h = grid->spacing(0);
  int first = -1, last = -1, runs = 0;
  for (int k = 0; k <= cells; ++k) {
    if (om[static_cast<std::size_t>(k)]) {
      if (first < 0 || !om[static_cast<std::size_t>(k - 1)]) ++runs;
      if (first < 0) first = k;
      last = k;
    }
  }
  rep.contiguous = runs == 1;
  if (!rep.contiguous) rep.messages.push_back("omega is not one index interval (" + std::to_string(runs) + " runs)");
  if (first >= 0) {
    rep.omega_lo = std::max(0.0, (first - 0.5) * h);
    rep.omega_hi = std::min(1.0, (last + 0.5) * h);
  }
  rep.expected_lo = dn ? (1.0 - m0) / (1.0 + beta) : 0.0;
  rep.expected_hi = dn ? 1.0 : (beta + m0) / (1.0 + beta);
  rep.endpoints_ok = rep.contiguous && std::abs(rep.omega_lo - rep.expected_lo) <= 2.0 * h + 1e-12 &&
                     std::abs(rep.omega_hi - rep.expected_hi) <= 2.0 * h + 1e-12;
  if (!rep.endpoints_ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "omega (%.6f, %.6f) differs from (%.6f, %.6f) by more than 2 cells", rep.omega_lo,
                  rep.omega_hi, rep.expected_lo, rep.expected_hi);
    rep.messages.emplace_back(buf);
  }

  const auto& phi = rep.optimum.eigen.eigenfunction;
  rep.monotone_ok = true;
  for (int k = 0; k < cells; ++k) {
    const double step = phi[static_cast<std::size_t>(k + 1)] - phi[static_cast<std::size_t>(k)];
    if (dn ? step < -1e-10 : step > 1e-10) rep.monotone_ok = false;
  }
  if (!rep.monotone_ok) rep.messages.push_back("eigenfunction is not monotone");

  rep.lambda = rep.optimum.eigen.value;
  if (rep.contiguous) {
    const auto [a, b] = slopes_1d(norm);
    rep.lambda_oracle = shooting_eigenvalue_1d(a, b, beta, {rep.omega_lo, rep.omega_hi}, boundary);
    rep.lambda_rel_error = std::abs(rep.lambda - rep.lambda_oracle) / rep.lambda_oracle;
    rep.lambda_ok = rep.lambda_rel_error <= 2e-3;
    if (!rep.lambda_ok) rep.messages.push_back("lambda differs from the shooting value by more than 2e-3");
  }
  rep.passed = rep.optimizer_converged && !rep.optimum.rejected_lambda && rep.contiguous && rep.endpoints_ok &&
               rep.monotone_ok && rep.lambda_ok;
  return rep;
}

}  // namespace anisokpp
