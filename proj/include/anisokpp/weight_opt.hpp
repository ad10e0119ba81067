/**
 * @file weight_opt.hpp
 * @brief Admissible weights -beta <= m <= 1, int m <= m0 |Omega|, and the
 *        bathtub fixed-point iteration for the bang-bang minimizer of lambda(m).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "anisokpp/eigen.hpp"

namespace anisokpp {

struct WeightClass {
  double beta = 1.0;
  double m0 = 0.0;
  double domain_measure = 1.0;

  /// (beta + m0) / (1 + beta) |Omega|.
  [[nodiscard]] double target_measure() const { return (beta + m0) / (1.0 + beta) * domain_measure; }

  void validate() const {
    if (!(beta > 0.0)) throw ArgumentError("WeightClass: beta must be positive");
    if (!(m0 > -1.0 && m0 < beta)) throw ArgumentError("WeightClass: m0 must lie in (-1, beta)");
    if (!(domain_measure > 0.0)) throw ArgumentError("WeightClass: domain measure must be positive");
  }
};

struct ClassReport {
  bool valid = true;
  std::vector<std::string> violations;
};

/// Checks the bounds, the integral constraint and m+ != 0 (on free nodes).
[[nodiscard]] inline ClassReport validate_class(const GridFunction& m, const WeightClass& wc) {
  ClassReport rep;
  const double lo = m.values().minCoeff(), hi = m.values().maxCoeff();
  if (lo < -wc.beta - 1e-12) rep.violations.push_back("lower bound: min m < -beta");
  if (hi > 1.0 + 1e-12) rep.violations.push_back("upper bound: max m > 1");
  if (integral(m) > wc.m0 * wc.domain_measure + 1e-10) rep.violations.push_back("integral: int m > m0 |Omega|");
  if (!has_positive_part(m)) rep.violations.push_back("positive part: m+ vanishes");
  rep.valid = rep.violations.empty();
  return rep;
}

struct BangBangWeight {
  std::vector<char> omega;  // nodal indicator
  GridFunction weight;      // 1 on omega, -beta elsewhere
  double measure = 0.0;     // lumped measure of omega
  double threshold = 0.0;   // bathtub level t
  int ties_split = 0;       // nodes at level t left outside omega
};

/// chi_omega - beta chi_{omega^c} from a nodal indicator.
[[nodiscard]] inline BangBangWeight bang_bang_weight(const GridPtr& grid, std::vector<char> omega, double beta) {
  if (omega.size() != grid->node_count()) throw ArgumentError("bang_bang_weight: indicator has wrong length");
  BangBangWeight out{std::move(omega), GridFunction(grid), 0.0, 0.0, 0};
  for (std::size_t k = 0; k < grid->node_count(); ++k) {
    out.weight[k] = out.omega[k] ? 1.0 : -beta;
    if (out.omega[k]) out.measure += grid->weights()[k];
  }
  return out;
}

/// 1-D weight equal to 1 on (lo, hi) and -beta outside, averaged over the dual
/// cell of every node so the lumped mass matches the piecewise-constant weight.
[[nodiscard]] inline GridFunction interval_weight(const GridPtr& grid, double lo, double hi, double beta) {
  if (grid->dim() != 1) throw UnsupportedDimensionError("interval_weight: 1-D grids only");
  const double h = grid->spacing(0), len = grid->extent(0);
  return GridFunction::interpolate(grid, [&](double x, double) {
    const double a = std::max(x - 0.5 * h, 0.0), b = std::min(x + 0.5 * h, len);
    const double in = std::max(0.0, std::min(b, hi) - std::max(a, lo));
    return (in - beta * ((b - a) - in)) / (b - a);
  });
}

/// Superlevel set of phi with lumped measure closest to the target.
///
/// Nodes are visited by decreasing phi, ties by increasing index, and admitted
/// while doing so brings the measure closer to the target; the first node that
/// would not ends the scan, so {phi > t} is inside omega and omega inside
/// {phi >= t}. The result is within half a node weight of the target.
[[nodiscard]] inline BangBangWeight bathtub(const GridFunction& phi, double target_measure, double beta) {
  const Grid& g = phi.grid();
  if (!(target_measure > 0.0 && target_measure < g.measure()))
    throw ArgumentError("bathtub: target measure must lie in (0, |Omega|)");
  const std::size_t n = phi.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return phi[i] > phi[j]; });

  std::vector<char> omega(n, 0);
  double measure = 0.0;
  std::size_t stop = n;
  for (std::size_t r = 0; r < n; ++r) {
    const double w = g.weights()[order[r]];
    if (std::abs(measure + w - target_measure) < std::abs(measure - target_measure)) {
      omega[order[r]] = 1;
      measure += w;
    } else {
      stop = r;
      break;
    }
  }
  BangBangWeight out = bang_bang_weight(phi.grid_ptr(), std::move(omega), beta);
  if (stop < n) {
    out.threshold = phi[order[stop]];
    for (std::size_t r = stop; r < n && phi[order[r]] == out.threshold; ++r) ++out.ties_split;
    // A tie band is split only if some admitted node sits at the same level.
    if (stop == 0 || phi[order[stop - 1]] != out.threshold) out.ties_split = 0;
  } else {
    out.threshold = phi.values().minCoeff();
  }
  return out;
}

enum class InitialSet { FarFromDirichlet, Random, Explicit };

struct WeightOptOptions {
  EigenOptions eigen;
  double tol = 1e-10;  // secondary stop on |lambda change|
  int max_outer = 100;
  InitialSet initial = InitialSet::FarFromDirichlet;
  std::uint64_t seed = 1;
  std::vector<char> initial_omega;  // used with InitialSet::Explicit
};

struct WeightIterate {
  int iteration = 0;
  double lambda = 0.0;
  int set_changes = 0;  // nodes that switched between this set and the previous one
};

/// Why the outer iteration ended. AscentRejected: the next bathtub set would
/// raise lambda by more than 1e-10 (possible when lumped node weights differ,
/// as on 2-D boundaries), so the current set is kept.
enum class StopReason { FixedPoint, LambdaStalled, AscentRejected, MaxOuter };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::FixedPoint: return "fixed_point";
    case StopReason::LambdaStalled: return "lambda_stalled";
    case StopReason::AscentRejected: return "ascent_rejected";
    default: return "max_outer";
  }
}

struct WeightOptResult {
  BangBangWeight weight;
  EigenResult eigen;
  std::vector<WeightIterate> trace;  // accepted iterates only
  StopReason stop = StopReason::MaxOuter;
  bool converged = false;    // stopped before max_outer with a converged eigenpair
  bool fixed_point = false;  // bathtub(phi) reproduces the final set
  std::optional<double> rejected_lambda;
};

namespace detail {

inline int count_changes(const std::vector<char>& a, const std::vector<char>& b) {
  int c = 0;
  for (std::size_t k = 0; k < a.size(); ++k) c += (a[k] != 0) != (b[k] != 0);
  return c;
}

inline BangBangWeight initial_weight(const GridPtr& grid, const WeightClass& wc, const WeightOptOptions& opts) {
  switch (opts.initial) {
    case InitialSet::Explicit:
      return bang_bang_weight(grid, opts.initial_omega, wc.beta);
    case InitialSet::Random: {
      std::mt19937_64 rng(opts.seed);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      GridFunction r(grid);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] = unif(rng);
      return bathtub(r, wc.target_measure(), wc.beta);
    }
    case InitialSet::FarFromDirichlet:
    default:
      return bathtub(distance_to_dirichlet(grid), wc.target_measure(), wc.beta);
  }
}

}  // namespace detail

/// Alternates phi_k = argmin lambda(m_k) and m_{k+1} = bathtub(phi_k) until the
/// set repeats or lambda stalls.
[[nodiscard]] inline WeightOptResult optimize_weight(const AnisotropyNorm& norm, const GridPtr& grid,
                                                     WeightClass wc, const WeightOptOptions& opts = {}) {
  wc.domain_measure = grid->measure();
  wc.validate();
  BangBangWeight current = detail::initial_weight(grid, wc, opts);
  if (!has_positive_part(current.weight))
    throw InfeasibleWeightError("optimize_weight: initial set has no free node");

  EigenOptions eo = opts.eigen;
  EigenResult eig = minimize_lambda(norm, current.weight, grid, eo);
  WeightOptResult res{current, eig, {{0, eig.value, 0}}, StopReason::MaxOuter, false, false, std::nullopt};

  for (int it = 1; it <= opts.max_outer; ++it) {
    BangBangWeight next = bathtub(eig.eigenfunction, wc.target_measure(), wc.beta);
    const int changes = detail::count_changes(next.omega, current.omega);
    if (changes == 0) {
      res.weight = std::move(next);
      res.stop = StopReason::FixedPoint;
      res.fixed_point = true;
      res.converged = eig.converged;
      return res;
    }
    eo.initial = eig.eigenfunction;
    EigenResult trial = minimize_lambda(norm, next.weight, grid, eo);
    if (trial.value > eig.value + 1e-10) {
      res.rejected_lambda = trial.value;
      res.stop = StopReason::AscentRejected;
      res.converged = eig.converged;
      return res;
    }
    const double change = std::abs(trial.value - eig.value);
    current = std::move(next);
    eig = std::move(trial);
    res.trace.push_back({it, eig.value, changes});
    res.weight = current;
    res.eigen = eig;
    if (change < opts.tol) {
      const BangBangWeight again = bathtub(eig.eigenfunction, wc.target_measure(), wc.beta);
      res.fixed_point = detail::count_changes(again.omega, current.omega) == 0;
      if (res.fixed_point) res.weight = again;
      res.stop = res.fixed_point ? StopReason::FixedPoint : StopReason::LambdaStalled;
      res.converged = eig.converged;
      return res;
    }
  }
  return res;
}

/// Runs one optimization per start (start 0 is the default set, the others
/// random) concurrently and keeps the smallest lambda, ties to the lower start.
/// `distinct` receives one result per distinct final set.
[[nodiscard]] inline WeightOptResult optimize_weight_multistart(const AnisotropyNorm& norm, const GridPtr& grid,
                                                                const WeightClass& wc, const WeightOptOptions& opts,
                                                                int starts, int threads,
                                                                std::vector<WeightOptResult>* distinct = nullptr) {
  if (starts < 1) throw ArgumentError("optimize_weight_multistart: starts must be positive");
  std::vector<std::optional<WeightOptResult>> out(static_cast<std::size_t>(starts));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(starts));
  auto run = [&](int s) {
    WeightOptOptions o = opts;
    if (s > 0) {
      o.initial = InitialSet::Random;
      o.seed = opts.seed + static_cast<std::uint64_t>(s);
    }
    try {
      out[static_cast<std::size_t>(s)] = optimize_weight(norm, grid, wc, o);
    } catch (...) {
      errors[static_cast<std::size_t>(s)] = std::current_exception();
    }
  };
  threads = std::max(1, std::min(threads, starts));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int s = t; s < starts; s += threads) run(s);
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::size_t best = 0;
  for (std::size_t s = 1; s < out.size(); ++s)
    if (out[s]->eigen.value < out[best]->eigen.value) best = s;
  if (distinct) {
    distinct->clear();
    for (auto& r : out) {
      bool seen = false;
      for (auto& d : *distinct) seen = seen || detail::count_changes(d.weight.omega, r->weight.omega) == 0;
      if (!seen) distinct->push_back(*r);
    }
  }
  return *out[best];
}

}  // namespace anisokpp
