/**
 * @file monotone_solver.hpp
 * @brief Solver for scale * A(v) + diag(shift_i w_i) v = rhs on the free nodes,
 *        where A is the assembled anisotropic flux operator.
 *
 * The system is the optimality condition of the strictly convex functional
 *   Phi(v) = scale/2 * energy(v) + 1/2 sum shift_i w_i v_i^2 - rhs.v,
 * so a (semismooth) Newton iteration with backtracking on Phi converges
 * globally. Linear fluxes are factored once and reused.
 */
#pragma once

#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <optional>

#include "anisokpp/grid.hpp"

namespace anisokpp {

class MonotoneSolver {
 public:
  MonotoneSolver(AnisotropyNorm norm, GridPtr grid, double scale, Vec shift)
      : norm_(std::move(norm)), grid_(std::move(grid)), scale_(scale), shift_(std::move(shift)) {
    detail::check_norm_dim(norm_, *grid_, "MonotoneSolver");
    if (!(scale_ > 0.0)) throw ArgumentError("MonotoneSolver: scale must be positive");
    if (shift_.size() != static_cast<Eigen::Index>(grid_->node_count()))
      throw ArgumentError("MonotoneSolver: shift has wrong length");
    if (norm_.linear_flux()) {
      const Vec zero = Vec::Zero(shift_.size());
      linear_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(
          detail::assemble_tangent(norm_, *grid_, zero, scale_, shift_));
      if (linear_->info() != Eigen::Success)
        throw SolverError("MonotoneSolver: factorization failed");
    }
  }

  [[nodiscard]] const Grid& grid() const { return *grid_; }

  /// Nodal operator value scale*A(v) + shift.*w.*v (all nodes).
  [[nodiscard]] Vec apply(const Vec& v) const {
    Vec out = scale_ * detail::apply_flux(norm_, *grid_, v);
    const auto& w = grid_->weights();
    for (Eigen::Index k = 0; k < v.size(); ++k) out[k] += shift_[k] * w[static_cast<std::size_t>(k)] * v[k];
    return out;
  }

  /// Returns v with v = 0 on Dirichlet nodes solving the system on free nodes.
  /// `rhs` is nodal; its Dirichlet entries are ignored.
  [[nodiscard]] Vec solve(const Vec& rhs, const std::optional<Vec>& guess = std::nullopt) const {
    const auto& free = grid_->free_nodes();
    const auto nf = static_cast<Eigen::Index>(free.size());
    Vec v = Vec::Zero(rhs.size());

    if (linear_) {
      Vec b(nf);
      for (Eigen::Index r = 0; r < nf; ++r) b[r] = rhs[free[static_cast<std::size_t>(r)]];
      const Vec x = linear_->solve(b);
      for (Eigen::Index r = 0; r < nf; ++r) v[free[static_cast<std::size_t>(r)]] = x[r];
      return v;
    }

    if (guess) v = *guess;
    for (std::size_t k = 0; k < grid_->node_count(); ++k)
      if (grid_->is_dirichlet(k)) v[static_cast<Eigen::Index>(k)] = 0.0;

    const double rhs_norm = detail::strong_residual_norm(*grid_, rhs);
    const double stop = 1e-13 * std::max(rhs_norm, 1e-300);
    Vec res = restrict_free(apply(v) - rhs);
    double res_norm = residual_norm(res);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analyzed = false;

    for (int it = 0; it < kMaxNewton && res_norm > stop; ++it) {
      const auto tangent = detail::assemble_tangent(norm_, *grid_, v, scale_, shift_);
      if (!analyzed) {
        ldlt.analyzePattern(tangent);
        analyzed = true;
      }
      ldlt.factorize(tangent);
      if (ldlt.info() != Eigen::Success) throw SolverError("MonotoneSolver: tangent factorization failed");
      const Vec step_free = ldlt.solve(-res);
      Vec step = Vec::Zero(v.size());
      for (Eigen::Index r = 0; r < nf; ++r) step[free[static_cast<std::size_t>(r)]] = step_free[r];

      // Full step whenever it reduces the residual, otherwise Armijo on Phi.
      const double phi0 = functional(v, rhs);
      const double slope = res.dot(step_free);
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        const Vec trial = v + t * step;
        const Vec trial_res = restrict_free(apply(trial) - rhs);
        const double trial_norm = residual_norm(trial_res);
        if (trial_norm < res_norm || functional(trial, rhs) <= phi0 + 1e-4 * t * slope) {
          v = trial;
          res = trial_res;
          res_norm = trial_norm;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      if (t * step.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, v.lpNorm<Eigen::Infinity>())) break;
    }
    if (!(res_norm <= 1e-8 * std::max(rhs_norm, 1e-300)) && res_norm > 1e-12)
      throw SolverError("MonotoneSolver: Newton iteration did not converge");
    return v;
  }

 private:
  static constexpr int kMaxNewton = 100;

  [[nodiscard]] Vec restrict_free(const Vec& nodal) const {
    const auto& free = grid_->free_nodes();
    Vec out(static_cast<Eigen::Index>(free.size()));
    for (std::size_t r = 0; r < free.size(); ++r) out[static_cast<Eigen::Index>(r)] = nodal[free[r]];
    return out;
  }

  [[nodiscard]] double residual_norm(const Vec& res_free) const {
    const auto& free = grid_->free_nodes();
    double s = 0.0;
    for (std::size_t r = 0; r < free.size(); ++r) {
      const double x = res_free[static_cast<Eigen::Index>(r)];
      s += x * x / grid_->weights()[static_cast<std::size_t>(free[r])];
    }
    return std::sqrt(s);
  }

  [[nodiscard]] double functional(const Vec& v, const Vec& rhs) const {
    double e = 0.0;
    detail::for_each_quad(*grid_, v, [&](const int*, const QuadPoint& q, const double* grad) {
      const double h = norm_.value(grad);
      e += q.weight * h * h;
    });
    double s = 0.5 * scale_ * e;
    const auto& w = grid_->weights();
    for (int k : grid_->free_nodes())
      s += 0.5 * shift_[k] * w[static_cast<std::size_t>(k)] * v[k] * v[k] - rhs[k] * v[k];
    return s;
  }

  AnisotropyNorm norm_;
  GridPtr grid_;
  double scale_;
  Vec shift_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> linear_;
};

}  // namespace anisokpp
