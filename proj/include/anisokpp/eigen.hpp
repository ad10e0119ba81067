/**
 * @file eigen.hpp
 * @brief Principal values mu(d, m) and lambda(m) on the nonnegative cone.
 *
 *   mu(d, m)  = min (d E(u) - int m u^2) / int u^2
 *   lambda(m) = min E(u) / int m u^2   over int m u^2 > 0
 *
 * with E(u) = int H^2(grad u), u >= 0 and u = 0 on the Dirichlet pieces.
 *
 * The default minimizer is a projected, preconditioned gradient iteration:
 * each step solves d A(v) + (s - m) v = u with the shift s = max m, projects
 * onto the cone and renormalizes (a nonlinear inverse iteration). A plain
 * projected gradient with Barzilai-Borwein steps is kept as a second route
 * for small grids. lambda(m) is the root of d -> mu(d, m), found with the
 * Newton update d <- int m phi^2 / E(phi).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "anisokpp/grid.hpp"
#include "anisokpp/monotone_solver.hpp"

namespace anisokpp {

enum class EigenMethod { InverseIteration, ProjectedGradientBB };

struct EigenOptions {
  double tol = 1e-8;
  double value_tol = 1e-12;
  int max_iter = 20000;
  /// 0 keeps the deterministic distance-to-Dirichlet start; any other value
  /// perturbs it by a positive random factor.
  std::uint64_t seed = 0;
  EigenMethod method = EigenMethod::InverseIteration;
  std::optional<GridFunction> initial;
};

struct EigenResult {
  double value = 0.0;
  GridFunction eigenfunction;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log;
};

/// (d E(u) - int m u^2) / int u^2.
[[nodiscard]] inline double rayleigh_mu(const AnisotropyNorm& norm, double d, const GridFunction& m,
                                        const GridFunction& u) {
  detail::check_same_grid(m, u, "rayleigh_mu");
  const double denom = l2_norm(u);
  if (!(denom > 0.0)) throw DegenerateInputError("rayleigh_mu: u is identically zero");
  return (d * energy(norm, u) - mass_integral(m, u, 2)) / (denom * denom);
}

/// E(u) / int m u^2, requiring int m u^2 > 0.
[[nodiscard]] inline double rayleigh_lambda(const AnisotropyNorm& norm, const GridFunction& m,
                                            const GridFunction& u) {
  detail::check_same_grid(m, u, "rayleigh_lambda");
  const double q = mass_integral(m, u, 2);
  if (!(q > 0.0)) throw DegenerateInputError("rayleigh_lambda: int m u^2 must be positive");
  return energy(norm, u) / q;
}

namespace detail {

inline GridFunction initial_guess(const GridPtr& grid, const EigenOptions& opts) {
  if (opts.initial) {
    GridFunction u(grid, opts.initial->values().cwiseMax(0.0));
    u.apply_dirichlet();
    if (l2_norm(u) > 0.0) return u;
  }
  GridFunction u = distance_to_dirichlet(grid);
  if (opts.seed != 0) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] *= unif(rng);
  }
  return u;
}

inline bool all_zero(const Vec& v) { return v.cwiseAbs().maxCoeff() == 0.0; }

/// Strong-form lumped norm of d A(u) - (m + mu) w u, with KKT-satisfied entries
/// at active cone constraints dropped, divided by ||u||.
inline double mu_residual(const AnisotropyNorm& norm, double d, const GridFunction& m, const GridFunction& u,
                          double mu) {
  const Grid& g = u.grid();
  Vec r = d * apply_flux(norm, g, u.values());
  const auto& w = g.weights();
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    r[i] -= (m[k] + mu) * w[k] * u[k];
    if (u[k] <= 0.0 && r[i] >= 0.0) r[i] = 0.0;
  }
  return strong_residual_norm(g, r) / l2_norm(u);
}

/// Same for A(u) - lambda m w u.
inline double lambda_residual(const AnisotropyNorm& norm, const GridFunction& m, const GridFunction& u,
                              double lambda) {
  const Grid& g = u.grid();
  Vec r = apply_flux(norm, g, u.values());
  const auto& w = g.weights();
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    r[i] -= lambda * m[k] * w[k] * u[k];
    if (u[k] <= 0.0 && r[i] >= 0.0) r[i] = 0.0;
  }
  return strong_residual_norm(g, r) / l2_norm(u);
}

inline double max_free(const GridFunction& m) {
  double s = -std::numeric_limits<double>::infinity();
  for (int k : m.grid().free_nodes()) s = std::max(s, m[static_cast<std::size_t>(k)]);
  return s;
}

inline void project_cone(GridFunction& u) {
  u.values() = u.values().cwiseMax(0.0);
  u.apply_dirichlet();
}

/// Stopping rule shared by the minimizers: residual below tol and either a
/// stalled value or a few extra sweeps after reaching tol.
struct StopRule {
  double tol;
  double value_tol;
  int sweeps_after_tol = 0;

  bool done(double residual, double value, double previous) {
    if (!(residual <= tol)) {
      sweeps_after_tol = 0;
      return false;
    }
    ++sweeps_after_tol;
    return std::abs(value - previous) <= value_tol * std::max(1.0, std::abs(value)) || sweeps_after_tol > 5;
  }
};

inline EigenResult mu_inverse_iteration(const AnisotropyNorm& norm, double d, const GridFunction& m,
                                        const EigenOptions& opts) {
  const GridPtr& grid = m.grid_ptr();
  const double shift = max_free(m);
  Vec c(static_cast<Eigen::Index>(grid->node_count()));
  for (std::size_t k = 0; k < grid->node_count(); ++k) c[static_cast<Eigen::Index>(k)] = shift - m[k];
  const MonotoneSolver solver(norm, grid, d, c);

  GridFunction u = initial_guess(grid, opts);
  u.values() /= l2_norm(u);
  double value = rayleigh_mu(norm, d, m, u);
  EigenResult out{value, u, mu_residual(norm, d, m, u, value), 0, false, {value}};
  StopRule stop{opts.tol, opts.value_tol};
  const auto& w = grid->weights();

  for (int it = 1; it <= opts.max_iter; ++it) {
    Vec rhs(u.values().size());
    for (std::size_t k = 0; k < u.size(); ++k) rhs[static_cast<Eigen::Index>(k)] = w[k] * u[k];
    const double scale = 1.0 / std::max(value + shift, 1e-300);
    GridFunction v(grid, solver.solve(rhs, Vec(scale * u.values())));
    project_cone(v);
    if (all_zero(v.values())) throw SolverError("minimize_mu: iterate left the cone");
    v.values() /= l2_norm(v);
    const double previous = value;
    value = rayleigh_mu(norm, d, m, v);
    u = std::move(v);
    out.log.push_back(value);
    out.iterations = it;
    out.residual = mu_residual(norm, d, m, u, value);
    if (stop.done(out.residual, value, previous)) {
      out.converged = true;
      break;
    }
  }
  out.value = value;
  out.eigenfunction = u;
  return out;
}

/// Projected gradient with Barzilai-Borwein steps on a quotient N(u)/D(u),
/// with a nonmonotone (max of last 10 values) Armijo safeguard.
template <class Quotient>
EigenResult projected_gradient_bb(const GridPtr& grid, Quotient&& q, const EigenOptions& opts) {
  GridFunction u = initial_guess(grid, opts);
  q.normalize(u);
  double value = q.value(u);
  Vec g = q.gradient(u, value);
  EigenResult out{value, u, q.residual(u, value), 0, false, {value}};
  std::deque<double> recent{value};
  double tau = 1.0 / std::max(1e-12, g.norm());
  const auto& w = grid->weights();
  StopRule stop{opts.tol, opts.value_tol};

  for (int it = 1; it <= opts.max_iter; ++it) {
    const double ref = *std::max_element(recent.begin(), recent.end());
    GridFunction trial = u;
    double trial_value = value;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = u;
      for (std::size_t k = 0; k < u.size(); ++k) trial[k] -= tau * g[static_cast<Eigen::Index>(k)] / w[k];
      project_cone(trial);
      if (!all_zero(trial.values()) && q.normalize(trial)) {
        trial_value = q.value(trial);
        Vec diff = trial.values() - u.values();
        double dec = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) dec += w[k] * diff[static_cast<Eigen::Index>(k)] * diff[static_cast<Eigen::Index>(k)];
        if (trial_value <= ref - 1e-4 * dec / std::max(tau, 1e-300)) {
          ok = true;
          break;
        }
      }
      tau *= 0.5;
    }
    if (!ok) break;
    Vec g_new = q.gradient(trial, trial_value);
    const Vec s = trial.values() - u.values();
    const Vec y = g_new - g;
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      ss += w[k] * s[i] * s[i];
      sy += s[i] * y[i];
    }
    tau = sy > 0.0 ? std::clamp(ss / sy, 1e-14, 1e14) : std::min(2.0 * tau, 1e14);
    const double previous = value;
    u = std::move(trial);
    value = trial_value;
    g = std::move(g_new);
    recent.push_back(value);
    if (recent.size() > 10) recent.pop_front();
    out.log.push_back(value);
    out.iterations = it;
    out.residual = q.residual(u, value);
    if (stop.done(out.residual, value, previous)) {
      out.converged = true;
      break;
    }
  }
  out.value = value;
  out.eigenfunction = u;
  return out;
}

struct MuQuotient {
  const AnisotropyNorm& norm;
  double d;
  const GridFunction& m;

  bool normalize(GridFunction& u) const {
    const double n = l2_norm(u);
    if (!(n > 0.0)) return false;
    u.values() /= n;
    return true;
  }
  double value(const GridFunction& u) const { return rayleigh_mu(norm, d, m, u); }
  /// Nodal gradient of the quotient at ||u|| = 1 (halved).
  Vec gradient(const GridFunction& u, double val) const {
    Vec g = d * apply_flux(norm, u.grid(), u.values());
    const auto& w = u.grid().weights();
    for (std::size_t k = 0; k < u.size(); ++k) g[static_cast<Eigen::Index>(k)] -= (m[k] + val) * w[k] * u[k];
    for (std::size_t k = 0; k < u.size(); ++k)
      if (u.grid().is_dirichlet(k)) g[static_cast<Eigen::Index>(k)] = 0.0;
    return g;
  }
  double residual(const GridFunction& u, double val) const { return mu_residual(norm, d, m, u, val); }
};

struct LambdaQuotient {
  const AnisotropyNorm& norm;
  const GridFunction& m;

  bool normalize(GridFunction& u) const {
    const double q = mass_integral(m, u, 2);
    if (!(q > 0.0)) return false;
    u.values() /= std::sqrt(q);
    return true;
  }
  double value(const GridFunction& u) const { return rayleigh_lambda(norm, m, u); }
  Vec gradient(const GridFunction& u, double val) const {
    Vec g = apply_flux(norm, u.grid(), u.values());
    const auto& w = u.grid().weights();
    for (std::size_t k = 0; k < u.size(); ++k) g[static_cast<Eigen::Index>(k)] -= val * m[k] * w[k] * u[k];
    for (std::size_t k = 0; k < u.size(); ++k)
      if (u.grid().is_dirichlet(k)) g[static_cast<Eigen::Index>(k)] = 0.0;
    return g;
  }
  double residual(const GridFunction& u, double val) const { return lambda_residual(norm, m, u, val); }
};

inline void check_problem(const AnisotropyNorm& norm, const GridFunction& m, const GridPtr& grid,
                          const char* where) {
  check_norm_dim(norm, *grid, where);
  if (!m.grid().same_shape(*grid)) throw ArgumentError(std::string(where) + ": weight lives on another grid");
  if (!m.values().allFinite()) throw ArgumentError(std::string(where) + ": weight is not finite");
}

}  // namespace detail

/// mu(d, m) and its nonnegative minimizer with ||phi||_2 = 1.
///
/// Non-convergence is reported through `converged = false` with the last iterate.
[[nodiscard]] inline EigenResult minimize_mu(const AnisotropyNorm& norm, double d, const GridFunction& m,
                                             const GridPtr& grid, const EigenOptions& opts = {}) {
  detail::check_problem(norm, m, grid, "minimize_mu");
  if (!(d > 0.0)) throw ArgumentError("minimize_mu: d must be positive");
  const GridFunction mg(grid, m.values());
  if (opts.method == EigenMethod::ProjectedGradientBB)
    return detail::projected_gradient_bb(grid, detail::MuQuotient{norm, d, mg}, opts);
  return detail::mu_inverse_iteration(norm, d, mg, opts);
}

/// True when some non-Dirichlet node carries a positive weight.
[[nodiscard]] inline bool has_positive_part(const GridFunction& m) {
  for (int k : m.grid().free_nodes())
    if (m[static_cast<std::size_t>(k)] > 0.0) return true;
  return false;
}

/// lambda(m) and its nonnegative minimizer normalized by int m phi^2 = 1.
[[nodiscard]] inline EigenResult minimize_lambda(const AnisotropyNorm& norm, const GridFunction& m,
                                                 const GridPtr& grid, const EigenOptions& opts = {}) {
  detail::check_problem(norm, m, grid, "minimize_lambda");
  const GridFunction mg(grid, m.values());
  if (!has_positive_part(mg))
    throw InfeasibleWeightError("minimize_lambda: m+ vanishes on every non-Dirichlet node");

  if (opts.method == EigenMethod::ProjectedGradientBB)
    return detail::projected_gradient_bb(grid, detail::LambdaQuotient{norm, mg}, opts);

  GridFunction u = detail::initial_guess(grid, opts);
  double q = mass_integral(mg, u, 2);
  double e = energy(norm, u);
  const double n2 = l2_norm(u) * l2_norm(u);
  double d = q > 0.0 ? q / e : 1e-2 * detail::max_free(mg) * n2 / e;

  EigenResult out{0.0, u, 0.0, 0, false, {}};
  EigenOptions inner = opts;
  int budget = opts.max_iter;
  for (int outer = 0; outer < 200 && budget > 0; ++outer) {
    inner.initial = u;
    inner.max_iter = budget;
    inner.tol = 0.5 * opts.tol * std::min(1.0, d);
    inner.value_tol = 1e-14;
    const EigenResult mu = detail::mu_inverse_iteration(norm, d, mg, inner);
    budget -= mu.iterations;
    out.iterations += mu.iterations;
    u = mu.eigenfunction;
    q = mass_integral(mg, u, 2);
    e = energy(norm, u);
    const double d_next = q > 0.0 ? q / e : 0.25 * d;
    if (q > 0.0) {
      const double lam = e / q;
      out.log.push_back(lam);
      const double res = detail::lambda_residual(norm, mg, u, lam);
      if (mu.converged && res <= opts.tol && std::abs(d_next - d) <= 1e-13 * d) {
        out.converged = true;
        d = d_next;
        break;
      }
    }
    d = d_next;
  }

  q = mass_integral(mg, u, 2);
  if (!(q > 0.0)) {
    out.converged = false;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.eigenfunction = u;
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  u.values() /= std::sqrt(q);
  out.value = rayleigh_lambda(norm, mg, u);
  out.residual = detail::lambda_residual(norm, mg, u, out.value);
  out.eigenfunction = u;
  out.converged = out.converged && out.residual <= opts.tol;
  return out;
}

/// d* = 1 / lambda(m).
[[nodiscard]] inline double survival_threshold(const AnisotropyNorm& norm, const GridFunction& m,
                                               const GridPtr& grid, const EigenOptions& opts = {}) {
  return 1.0 / minimize_lambda(norm, m, grid, opts).value;
}

/// c = 1/sqrt(lambda_min) of the discrete Dirichlet form (Euclidean, m = 1),
/// so that ||u||_2 <= c ||grad u||_2 on the discrete H^1_D space.
[[nodiscard]] inline double poincare_constant(const GridPtr& grid, const EigenOptions& opts = {}) {
  const auto norm = AnisotropyNorm::euclidean(grid->dim());
  const auto res = minimize_mu(norm, 1.0, GridFunction(grid), grid, opts);
  if (!(res.value > 0.0)) throw SolverError("poincare_constant: nonpositive Dirichlet eigenvalue");
  return 1.0 / std::sqrt(res.value);
}

}  // namespace anisokpp
