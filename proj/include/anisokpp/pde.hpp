/**
 * @file pde.hpp
 * @brief Steady states of -d div(H(grad u) grad H(grad u)) = f(x, u) by monotone
 *        iteration, and the parabolic problem by implicit Euler with a lagged,
 *        shifted inner iteration.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "anisokpp/eigen.hpp"
#include "anisokpp/monotone_solver.hpp"

namespace anisokpp {

/// f(x, s) with its linearization m(x) = lim f(x, s)/s, saturation M and Lipschitz bound L.
class Reaction {
 public:
  enum class Kind { Logistic, Custom };
  using Evaluator = std::function<double(std::size_t node, double s)>;

  /// f(x, s) = m(x) s - s^2 for s >= 0, M = max(m)+ + 1e-3, L = max|m| + 2(M+1).
  static Reaction logistic(GridFunction m) {
    const double mplus = std::max(m.values().maxCoeff(), 0.0);
    const double sat = mplus + 1e-3;
    const double lip = m.values().cwiseAbs().maxCoeff() + 2.0 * (sat + 1.0);
    Evaluator f = [mv = m.values()](std::size_t k, double s) {
      return s > 0.0 ? mv[static_cast<Eigen::Index>(k)] * s - s * s : 0.0;
    };
    return Reaction(Kind::Logistic, std::move(m), sat, lip, std::move(f));
  }

  static Reaction custom(GridFunction m, double saturation, double lipschitz, Evaluator f) {
    if (!(saturation > 0.0) || !(lipschitz > 0.0))
      throw ArgumentError("Reaction: saturation and Lipschitz bounds must be positive");
    return Reaction(Kind::Custom, std::move(m), saturation, lipschitz, std::move(f));
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const GridFunction& weight() const { return m_; }
  [[nodiscard]] const GridPtr& grid_ptr() const { return m_.grid_ptr(); }
  [[nodiscard]] double saturation() const { return sat_; }
  [[nodiscard]] double lipschitz() const { return lip_; }
  [[nodiscard]] double operator()(std::size_t node, double s) const { return f_(node, s); }

  /// Nodal f(x, v).
  [[nodiscard]] Vec apply(const Vec& v) const {
    Vec out(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = f_(static_cast<std::size_t>(k), v[k]);
    return out;
  }

  /// Sampled check of f(x,0) = 0, f < 0 beyond M, f(x,s)/s decreasing and the Lipschitz bound.
  [[nodiscard]] std::vector<std::string> check() const {
    std::vector<std::string> bad;
    const int ladder = 64;
    for (std::size_t k = 0; k < m_.size(); ++k) {
      if (f_(k, 0.0) != 0.0) bad.push_back("f(x,0) != 0 at node " + std::to_string(k));
      for (double s : {sat_, 1.5 * sat_, 2.0 * sat_ + 1.0})
        if (!(f_(k, s) < 0.0)) bad.push_back("f(x,s) >= 0 beyond M at node " + std::to_string(k));
      double prev = std::numeric_limits<double>::infinity();
      for (int j = 0; j <= ladder; ++j) {
        const double s = 0.1 + (sat_ - 0.1) * j / ladder;
        const double q = f_(k, s) / s;
        if (!(q < prev)) bad.push_back("f(x,s)/s not decreasing at node " + std::to_string(k));
        prev = q;
      }
      for (int j = 0; j < ladder; ++j) {
        const double s1 = (sat_ + 1.0) * j / ladder, s2 = (sat_ + 1.0) * (j + 1) / ladder;
        if (std::abs(f_(k, s2) - f_(k, s1)) > lip_ * (s2 - s1) * (1.0 + 1e-12))
          bad.push_back("Lipschitz bound violated at node " + std::to_string(k));
      }
      if (bad.size() > 16) break;
    }
    return bad;
  }

 private:
  Reaction(Kind kind, GridFunction m, double sat, double lip, Evaluator f)
      : kind_(kind), m_(std::move(m)), sat_(sat), lip_(lip), f_(std::move(f)) {}

  Kind kind_;
  GridFunction m_;
  double sat_;
  double lip_;
  Evaluator f_;
};

enum class EllipticStart { FromAbove, FromBelow };

struct EllipticOptions {
  double tol = 1e-10;  // strong residual of d A(u) - W f(u)
  int max_iter = 50000;
  double mu_zero_tol = 1e-8;  // mu >= -mu_zero_tol counts as nonnegative
  EllipticStart start = EllipticStart::FromAbove;
  EigenOptions eigen;
};

struct EllipticResult {
  GridFunction solution;
  bool trivial = false;  // mu(d, m) >= 0, zero returned
  double mu = 0.0;
  double epsilon = 0.0;  // sub-solution scale
  GridFunction subsolution;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double elliptic_residual(const AnisotropyNorm& norm, double d, const Reaction& f, const Vec& u) {
  const Grid& g = *f.grid_ptr();
  Vec r = d * apply_flux(norm, g, u);
  const Vec fu = f.apply(u);
  for (Eigen::Index k = 0; k < u.size(); ++k) r[k] -= g.weights()[static_cast<std::size_t>(k)] * fu[k];
  return strong_residual_norm(g, r);
}

/// Largest eps in [1e-12, 1] (by bisection) with f(x, eps phi) >= (m + mu) eps phi
/// and eps phi <= M + 1 on the free nodes.
inline double subsolution_scale(const Reaction& f, const GridFunction& phi, double mu) {
  const auto& m = f.weight();
  auto ok = [&](double eps) {
    for (int k : phi.grid().free_nodes()) {
      const auto i = static_cast<std::size_t>(k);
      const double s = eps * phi[i];
      if (s > f.saturation() + 1.0) return false;
      if (f(i, s) < (m[i] + mu) * s - 1e-14 * std::abs(s)) return false;
    }
    return true;
  };
  double lo = 1e-12, hi = 1.0;
  if (!ok(lo)) throw DegenerateBracketError("elliptic_solve: no sub-solution scale in [1e-12, 1]");
  if (ok(hi)) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

/// Positive steady state when mu(d, m) < 0, zero otherwise.
///
/// Picard iteration d A(u_{k+1}) + L W u_{k+1} = W (f(u_k) + L u_k) started at
/// the super-solution M + 1 or at the sub-solution eps phi.
[[nodiscard]] inline EllipticResult elliptic_solve(const AnisotropyNorm& norm, double d, const Reaction& f,
                                                   const EllipticOptions& opts = {}) {
  if (!(d > 0.0)) throw ArgumentError("elliptic_solve: d must be positive");
  const GridPtr& grid = f.grid_ptr();
  const EigenResult eig = minimize_mu(norm, d, f.weight(), grid, opts.eigen);
  EllipticResult res{GridFunction(grid), false, eig.value, 0.0, GridFunction(grid), 0.0, 0, false};
  if (eig.value >= -opts.mu_zero_tol) {
    res.trivial = true;
    res.converged = true;
    return res;
  }
  res.epsilon = detail::subsolution_scale(f, eig.eigenfunction, eig.value);
  res.subsolution = GridFunction(grid, res.epsilon * eig.eigenfunction.values());

  const double lip = f.lipschitz();
  const MonotoneSolver solver(norm, grid, d, Vec::Constant(static_cast<Eigen::Index>(grid->node_count()), lip));
  Vec u = opts.start == EllipticStart::FromAbove
              ? Vec::Constant(static_cast<Eigen::Index>(grid->node_count()), f.saturation() + 1.0)
              : res.subsolution.values();
  for (std::size_t k = 0; k < grid->node_count(); ++k)
    if (grid->is_dirichlet(k)) u[static_cast<Eigen::Index>(k)] = 0.0;

  const auto& w = grid->weights();
  for (int it = 0; it < opts.max_iter; ++it) {
    res.residual = detail::elliptic_residual(norm, d, f, u);
    res.iterations = it;
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
    Vec rhs = f.apply(u) + lip * u;
    for (Eigen::Index k = 0; k < rhs.size(); ++k) rhs[k] *= w[static_cast<std::size_t>(k)];
    u = solver.solve(rhs, u);
  }
  res.solution = GridFunction(grid, std::move(u));
  return res;
}

struct ParabolicOptions {
  double dt = 1e-2;
  double inner_tol = 1e-10;
  int max_inner = 200;
  int max_halvings = 20;
  double steady_tol = 1e-3;
  double zero_tol = 1e-6;
  std::vector<double> snapshot_times;
  bool record_energy = true;
  EllipticOptions elliptic;
};

namespace detail {

/// One implicit Euler step of size dt, or nullopt if the inner iteration stalls.
inline std::optional<Vec> try_step(const AnisotropyNorm& norm, double d, const Reaction& f, const Vec& v, double dt,
                                   const ParabolicOptions& opts) {
  const GridPtr& grid = f.grid_ptr();
  const double sigma = f.lipschitz();
  const MonotoneSolver solver(norm, grid, d,
                              Vec::Constant(static_cast<Eigen::Index>(grid->node_count()), 1.0 / dt + sigma));
  const auto& w = grid->weights();
  Vec lagged = v;
  for (int it = 0; it < opts.max_inner; ++it) {
    Vec rhs = f.apply(lagged) + sigma * lagged + v / dt;
    for (Eigen::Index k = 0; k < rhs.size(); ++k) rhs[k] *= w[static_cast<std::size_t>(k)];
    Vec next = solver.solve(rhs, lagged);
    const double change = (next - lagged).lpNorm<Eigen::Infinity>();
    lagged = std::move(next);
    if (change <= opts.inner_tol * std::max(1.0, lagged.lpNorm<Eigen::Infinity>())) return lagged;
  }
  return std::nullopt;
}

inline Vec step_with_halving(const AnisotropyNorm& norm, double d, const Reaction& f, const Vec& v, double dt,
                             const ParabolicOptions& opts, int depth) {
  if (auto w = try_step(norm, d, f, v, dt, opts)) return *w;
  if (depth >= opts.max_halvings) throw SolverError("parabolic_step: inner iteration failed after dt halvings");
  const Vec mid = step_with_halving(norm, d, f, v, 0.5 * dt, opts, depth + 1);
  return step_with_halving(norm, d, f, mid, 0.5 * dt, opts, depth + 1);
}

}  // namespace detail

/// Implicit Euler step (w - v)/dt - d div flux(grad w) + L w = f(w~) + L w~,
/// iterated in w~ to a fixed point; halves dt on failure.
[[nodiscard]] inline GridFunction parabolic_step(const AnisotropyNorm& norm, double d, const Reaction& f,
                                                 const GridFunction& v, double dt,
                                                 const ParabolicOptions& opts = {}) {
  if (!(d > 0.0) || !(dt > 0.0)) throw ArgumentError("parabolic_step: d and dt must be positive");
  detail::check_same_grid(v, f.weight(), "parabolic_step");
  Vec v0 = v.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v.grid().is_dirichlet(k)) v0[static_cast<Eigen::Index>(k)] = 0.0;
  return GridFunction(v.grid_ptr(), detail::step_with_halving(norm, d, f, v0, dt, opts, 0));
}

/// (d/2) E(v) - sum w (m v^2/2 - v^3/3), the Lyapunov functional of the logistic flow.
[[nodiscard]] inline double logistic_energy(const AnisotropyNorm& norm, double d, const GridFunction& m,
                                            const GridFunction& v) {
  double s = 0.5 * d * energy(norm, v);
  const auto& w = v.grid().weights();
  for (std::size_t k = 0; k < v.size(); ++k) s -= w[k] * (m[k] * v[k] * v[k] / 2.0 - v[k] * v[k] * v[k] / 3.0);
  return s;
}

enum class Outcome { ConvergedToPositive, ConvergedToZero, Undecided };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::ConvergedToPositive: return "positive";
    case Outcome::ConvergedToZero: return "zero";
    default: return "undecided";
  }
}

struct Snapshot {
  double time;
  GridFunction values;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> l2;
  std::vector<double> max;
  std::vector<double> energy;  // logistic only
  std::vector<Snapshot> snapshots;
  GridFunction terminal;
  double terminal_norm = 0.0;
  double distance_to_steady = 0.0;  // ||v(T) - u|| / ||u||, when u is positive
  Outcome outcome = Outcome::Undecided;
};

/// Marches parabolic_step to `horizon` with a fixed dt and classifies the end state
/// against the steady state from elliptic_solve (or `steady` if given).
[[nodiscard]] inline Trajectory parabolic_solve(const AnisotropyNorm& norm, double d, const Reaction& f,
                                                const GridFunction& v0, double horizon,
                                                const ParabolicOptions& opts = {},
                                                const std::optional<GridFunction>& steady = std::nullopt) {
  if (!(horizon > 0.0)) throw ArgumentError("parabolic_solve: horizon must be positive");
  if (v0.values().minCoeff() < 0.0) throw ArgumentError("parabolic_solve: initial data must be nonnegative");
  if (!v0.satisfies_dirichlet()) throw ArgumentError("parabolic_solve: initial data must vanish on Dirichlet nodes");
  const bool logistic = f.kind() == Reaction::Kind::Logistic;
  Trajectory tr{{}, {}, {}, {}, {}, v0, 0.0, 0.0, Outcome::Undecided};
  auto record = [&](double t, const GridFunction& v) {
    tr.times.push_back(t);
    tr.l2.push_back(l2_norm(v));
    tr.max.push_back(max_norm(v));
    if (logistic && opts.record_energy) tr.energy.push_back(logistic_energy(norm, d, f.weight(), v));
  };
  std::vector<double> pending = opts.snapshot_times;
  std::sort(pending.begin(), pending.end());
  std::size_t next_snap = 0;
  auto snap = [&](double t, const GridFunction& v) {
    while (next_snap < pending.size() && pending[next_snap] <= t + 1e-9 * std::max(1.0, t))
      tr.snapshots.push_back({pending[next_snap++], v});
  };

  GridFunction v = v0;
  record(0.0, v);
  snap(0.0, v);
  const long steps = std::max(1L, std::lround(horizon / opts.dt));
  const double dt = horizon / static_cast<double>(steps);
  for (long n = 1; n <= steps; ++n) {
    v = parabolic_step(norm, d, f, v, dt, opts);
    const double t = dt * static_cast<double>(n);
    record(t, v);
    snap(t, v);
  }
  tr.terminal = v;
  tr.terminal_norm = l2_norm(v);

  GridFunction u = steady ? *steady : elliptic_solve(norm, d, f, opts.elliptic).solution;
  const double un = l2_norm(u);
  if (un > 0.0) {
    tr.distance_to_steady = l2_norm(GridFunction(v.grid_ptr(), v.values() - u.values())) / un;
    if (tr.distance_to_steady <= opts.steady_tol) tr.outcome = Outcome::ConvergedToPositive;
  }
  if (tr.outcome == Outcome::Undecided && tr.terminal_norm <= opts.zero_tol) tr.outcome = Outcome::ConvergedToZero;
  return tr;
}

struct SweepRow {
  double d = 0.0;
  double mu = 0.0;
  double u_max = 0.0;
  Outcome outcome = Outcome::Undecided;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int sign_changes = 0;
  std::optional<std::pair<double, double>> bracket;  // consecutive d values where mu changes sign
};

struct SweepOptions {
  ParabolicOptions parabolic;
  double horizon = 200.0;
  bool run_parabolic = true;
  int threads = 1;
};

/// True when ANISOKPP_DETERMINISTIC=1 asks for sequential execution.
[[nodiscard]] inline bool deterministic_mode() {
  const char* e = std::getenv("ANISOKPP_DETERMINISTIC");
  return e != nullptr && std::string(e) == "1";
}

/// mu(d, m), the steady state and (optionally) the parabolic outcome per d.
/// Rows are ordered as d_values; the initial datum is half the distance interpolant.
[[nodiscard]] inline SweepResult sweep_diffusion(const AnisotropyNorm& norm, const Reaction& f,
                                                 const std::vector<double>& d_values, const SweepOptions& opts = {}) {
  for (std::size_t i = 0; i < d_values.size(); ++i) {
    if (!(d_values[i] > 0.0)) throw ArgumentError("sweep_diffusion: d values must be positive");
    if (i > 0 && !(d_values[i] > d_values[i - 1])) throw ArgumentError("sweep_diffusion: d values must be increasing");
  }
  const std::size_t n = d_values.size();
  SweepResult out;
  out.rows.resize(n);
  std::vector<std::exception_ptr> errors(n);
  const GridFunction v0(f.grid_ptr(), 0.5 * distance_to_dirichlet(f.grid_ptr()).values());

  auto run = [&](std::size_t i) {
    try {
      const double d = d_values[i];
      const EllipticResult ell = elliptic_solve(norm, d, f, opts.parabolic.elliptic);
      SweepRow row{d, ell.mu, max_norm(ell.solution), ell.trivial ? Outcome::ConvergedToZero : Outcome::Undecided};
      if (opts.run_parabolic) {
        row.outcome = parabolic_solve(norm, d, f, v0, opts.horizon, opts.parabolic, ell.solution).outcome;
      } else if (!ell.trivial && ell.converged) {
        row.outcome = Outcome::ConvergedToPositive;
      }
      out.rows[i] = row;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int threads = deterministic_mode() ? 1 : std::max(1, std::min<int>(opts.threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(threads)) run(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 1; i < n; ++i)
    if ((out.rows[i - 1].mu < 0.0) != (out.rows[i].mu < 0.0)) {
      ++out.sign_changes;
      if (!out.bracket) out.bracket = std::make_pair(d_values[i - 1], d_values[i]);
    }
  return out;
}

}  // namespace anisokpp
