/**
 * @file grid.hpp
 * @brief Uniform interval/rectangle grids with mixed boundary labels, nodal
 *        functions, lumped quadrature and the discrete anisotropic energy.
 *
 * Elements are P1 (1-D) and Q1 (2-D) with lumped mass. In 2-D the stiffness
 * part uses 2x2 Gauss points per cell.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "anisokpp/anisotropy.hpp"
#include "anisokpp/error.hpp"

namespace anisokpp {

enum class BoundaryPiece { Left, Right, Bottom, Top };
enum class BoundaryCondition { Dirichlet, Neumann };

struct BoundaryLabel {
  BoundaryPiece piece;
  BoundaryCondition condition;
};

inline const char* to_string(BoundaryPiece p) {
  switch (p) {
    case BoundaryPiece::Left: return "left";
    case BoundaryPiece::Right: return "right";
    case BoundaryPiece::Bottom: return "bottom";
    case BoundaryPiece::Top: return "top";
  }
  return "?";
}

inline const char* to_string(BoundaryCondition c) {
  return c == BoundaryCondition::Dirichlet ? "dirichlet" : "neumann";
}

/// One quadrature point of the reference cell: weight and the gradients of
/// the local shape functions (grad[axis][local node]).
struct QuadPoint {
  double weight = 0.0;
  std::array<std::array<double, 4>, 2> grad{};
};

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Immutable structured grid. Nodes are numbered x-fastest: node(i, j) = j*(nx+1) + i.
class Grid {
 public:
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int cells(int axis) const { return cells_[static_cast<std::size_t>(axis)]; }
  [[nodiscard]] double extent(int axis) const { return extent_[static_cast<std::size_t>(axis)]; }
  [[nodiscard]] double spacing(int axis) const { return extent(axis) / cells(axis); }
  [[nodiscard]] int nodes_along(int axis) const { return cells(axis) + 1; }
  [[nodiscard]] std::size_t node_count() const { return weights_.size(); }
  [[nodiscard]] std::size_t cell_count() const {
    return dim_ == 1 ? static_cast<std::size_t>(cells(0))
                     : static_cast<std::size_t>(cells(0)) * static_cast<std::size_t>(cells(1));
  }
  [[nodiscard]] int nodes_per_cell() const { return dim_ == 1 ? 2 : 4; }

  [[nodiscard]] int node(int i, int j = 0) const { return j * nodes_along(0) + i; }

  [[nodiscard]] double coordinate(std::size_t node, int axis) const {
    const int nx = nodes_along(0);
    const int idx = axis == 0 ? static_cast<int>(node) % nx : static_cast<int>(node) / nx;
    return idx * spacing(axis);
  }

  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<char>& dirichlet_mask() const { return dirichlet_; }
  [[nodiscard]] bool is_dirichlet(std::size_t node) const { return dirichlet_[node] != 0; }

  /// Index among the non-Dirichlet nodes, -1 on Dirichlet nodes.
  [[nodiscard]] const std::vector<int>& free_index() const { return free_index_; }
  [[nodiscard]] const std::vector<int>& free_nodes() const { return free_nodes_; }

  [[nodiscard]] const std::vector<BoundaryLabel>& labels() const { return labels_; }
  [[nodiscard]] BoundaryCondition condition(BoundaryPiece piece) const {
    for (const auto& l : labels_)
      if (l.piece == piece) return l.condition;
    throw ArgumentError(std::string("grid has no boundary piece ") + to_string(piece));
  }

  [[nodiscard]] double measure() const { return dim_ == 1 ? extent(0) : extent(0) * extent(1); }

  /// Global node indices of cell c in local order (0,0),(1,0),(0,1),(1,1).
  void cell_nodes(std::size_t c, int* out) const {
    if (dim_ == 1) {
      out[0] = static_cast<int>(c);
      out[1] = static_cast<int>(c) + 1;
      return;
    }
    const int i = static_cast<int>(c) % cells(0);
    const int j = static_cast<int>(c) / cells(0);
    out[0] = node(i, j);
    out[1] = node(i + 1, j);
    out[2] = node(i, j + 1);
    out[3] = node(i + 1, j + 1);
  }

  [[nodiscard]] const std::vector<QuadPoint>& quadrature() const { return quad_; }

  [[nodiscard]] bool same_shape(const Grid& other) const {
    if (this == &other) return true;
    if (dim_ != other.dim_ || cells_ != other.cells_ || extent_ != other.extent_) return false;
    return dirichlet_ == other.dirichlet_;
  }

 private:
  friend GridPtr build_grid(int, std::vector<int>, std::vector<BoundaryLabel>, std::vector<double>);
  Grid() = default;

  int dim_ = 1;
  std::array<int, 2> cells_{1, 1};
  std::array<double, 2> extent_{1.0, 1.0};
  std::vector<BoundaryLabel> labels_;
  std::vector<double> weights_;
  std::vector<char> dirichlet_;
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
  std::vector<QuadPoint> quad_;
};

/// Builds a uniform grid on (0,L) or (0,Lx)x(0,Ly).
///
/// Every boundary piece of the dimension must be labelled exactly once and at
/// least one piece must be Dirichlet. Corner nodes touching a Dirichlet piece
/// are Dirichlet.
inline GridPtr build_grid(int dim, std::vector<int> cells, std::vector<BoundaryLabel> labels,
                          std::vector<double> extent = {}) {
  if (dim != 1 && dim != 2) throw UnsupportedDimensionError("build_grid: dim must be 1 or 2");
  if (static_cast<int>(cells.size()) != dim)
    throw ArgumentError("build_grid: need one cell count per axis");
  for (int c : cells)
    if (c < 2) throw ArgumentError("build_grid: at least 2 cells per axis");
  if (extent.empty()) extent.assign(static_cast<std::size_t>(dim), 1.0);
  if (static_cast<int>(extent.size()) != dim) throw ArgumentError("build_grid: one extent per axis");
  for (double e : extent)
    if (!(e > 0.0)) throw ArgumentError("build_grid: extents must be positive");

  std::vector<BoundaryPiece> pieces = {BoundaryPiece::Left, BoundaryPiece::Right};
  if (dim == 2) {
    pieces.push_back(BoundaryPiece::Bottom);
    pieces.push_back(BoundaryPiece::Top);
  }
  bool any_dirichlet = false;
  for (auto p : pieces) {
    int count = 0;
    for (const auto& l : labels) count += l.piece == p ? 1 : 0;
    if (count != 1)
      throw InvalidDomainError(std::string("build_grid: boundary piece '") + to_string(p) +
                               "' must be labelled exactly once");
  }
  for (const auto& l : labels) {
    bool known = false;
    for (auto p : pieces) known = known || l.piece == p;
    if (!known)
      throw InvalidDomainError(std::string("build_grid: piece '") + to_string(l.piece) +
                               "' does not exist in dimension " + std::to_string(dim));
    any_dirichlet = any_dirichlet || l.condition == BoundaryCondition::Dirichlet;
  }
  if (!any_dirichlet)
    throw InvalidDomainError("build_grid: at least one boundary piece must be Dirichlet");

  auto g = std::shared_ptr<Grid>(new Grid());
  g->dim_ = dim;
  g->labels_ = std::move(labels);
  for (int a = 0; a < dim; ++a) {
    g->cells_[static_cast<std::size_t>(a)] = cells[static_cast<std::size_t>(a)];
    g->extent_[static_cast<std::size_t>(a)] = extent[static_cast<std::size_t>(a)];
  }
  if (dim == 1) {
    g->cells_[1] = 1;
    g->extent_[1] = 1.0;
  }

  auto is_d = [&](BoundaryPiece p) { return g->condition(p) == BoundaryCondition::Dirichlet; };
  const int nx = g->nodes_along(0);
  const int ny = dim == 1 ? 1 : g->nodes_along(1);
  const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  g->weights_.resize(n);
  g->dirichlet_.assign(n, 0);
  const double hx = g->spacing(0);
  const double hy = dim == 1 ? 1.0 : g->spacing(1);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(g->node(i, j));
      double w = hx * ((i == 0 || i == nx - 1) ? 0.5 : 1.0);
      if (dim == 2) w *= hy * ((j == 0 || j == ny - 1) ? 0.5 : 1.0);
      g->weights_[k] = w;
      bool d = (i == 0 && is_d(BoundaryPiece::Left)) || (i == nx - 1 && is_d(BoundaryPiece::Right));
      if (dim == 2)
        d = d || (j == 0 && is_d(BoundaryPiece::Bottom)) || (j == ny - 1 && is_d(BoundaryPiece::Top));
      g->dirichlet_[k] = d ? 1 : 0;
    }
  }
  g->free_index_.assign(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    if (g->dirichlet_[k]) continue;
    g->free_index_[k] = static_cast<int>(g->free_nodes_.size());
    g->free_nodes_.push_back(static_cast<int>(k));
  }

  if (dim == 1) {
    QuadPoint q;
    q.weight = hx;
    q.grad[0] = {-1.0 / hx, 1.0 / hx, 0.0, 0.0};
    g->quad_.push_back(q);
  } else {
    const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double eta : gp) {
      for (double xi : gp) {
        QuadPoint q;
        q.weight = 0.25 * hx * hy;
        q.grad[0] = {-(1.0 - eta) / hx, (1.0 - eta) / hx, -eta / hx, eta / hx};
        q.grad[1] = {-(1.0 - xi) / hy, -xi / hy, (1.0 - xi) / hy, xi / hy};
        g->quad_.push_back(q);
      }
    }
  }
  return g;
}

/// Nodal scalar field on a grid.
class GridFunction {
 public:
  explicit GridFunction(GridPtr grid)
      : grid_(std::move(grid)), values_(Vec::Zero(static_cast<Eigen::Index>(grid_->node_count()))) {}

  GridFunction(GridPtr grid, Vec values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != static_cast<Eigen::Index>(grid_->node_count()))
      throw ArgumentError("GridFunction: value count does not match node count");
  }

  /// Nodal interpolant of f(x, y); y is 0 on 1-D grids.
  template <class F>
  static GridFunction interpolate(GridPtr grid, F&& f) {
    Vec v(static_cast<Eigen::Index>(grid->node_count()));
    for (std::size_t k = 0; k < grid->node_count(); ++k)
      v[static_cast<Eigen::Index>(k)] =
          f(grid->coordinate(k, 0), grid->dim() == 2 ? grid->coordinate(k, 1) : 0.0);
    return GridFunction(std::move(grid), std::move(v));
  }

  static GridFunction constant(GridPtr grid, double c) {
    const auto n = static_cast<Eigen::Index>(grid->node_count());
    return GridFunction(std::move(grid), Vec::Constant(n, c));
  }

  [[nodiscard]] const Grid& grid() const { return *grid_; }
  [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
  [[nodiscard]] const Vec& values() const { return values_; }
  [[nodiscard]] Vec& values() { return values_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
  double& operator[](std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }

  /// Zeroes the Dirichlet nodes.
  void apply_dirichlet() {
    for (std::size_t k = 0; k < size(); ++k)
      if (grid_->is_dirichlet(k)) (*this)[k] = 0.0;
  }

  /// Membership in the discrete H^1_D space.
  [[nodiscard]] bool satisfies_dirichlet() const {
    for (std::size_t k = 0; k < size(); ++k)
      if (grid_->is_dirichlet(k) && (*this)[k] != 0.0) return false;
    return true;
  }

 private:
  GridPtr grid_;
  Vec values_;
};

namespace detail {

inline void check_same_grid(const GridFunction& a, const GridFunction& b, const char* where) {
  if (!a.grid().same_shape(b.grid()))
    throw ArgumentError(std::string(where) + ": functions live on different grids");
}

inline void check_norm_dim(const AnisotropyNorm& norm, const Grid& grid, const char* where) {
  if (norm.dim() != grid.dim())
    throw ArgumentError(std::string(where) + ": norm dimension does not match grid dimension");
}

/// Visits every (cell, quadrature point) with the gradient of `u` there.
template <class Visitor>
void for_each_quad(const Grid& grid, const Vec& u, Visitor&& visit) {
  const int npc = grid.nodes_per_cell();
  const int dim = grid.dim();
  int nodes[4];
  double grad[2];
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.cell_nodes(c, nodes);
    for (const QuadPoint& q : grid.quadrature()) {
      for (int a = 0; a < dim; ++a) {
        double s = 0.0;
        for (int l = 0; l < npc; ++l) s += q.grad[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)] * u[nodes[l]];
        grad[a] = s;
      }
      visit(nodes, q, grad);
    }
  }
}

/// Assembled flux operator A(u)_i = sum_q w_q flux(grad u).grad phi_i, so that
/// the gradient of the energy is 2 A(u). Dirichlet rows are not zeroed.
inline Vec apply_flux(const AnisotropyNorm& norm, const Grid& grid, const Vec& u) {
  Vec out = Vec::Zero(u.size());
  const int npc = grid.nodes_per_cell();
  const int dim = grid.dim();
  double f[2];
  for_each_quad(grid, u, [&](const int* nodes, const QuadPoint& q, const double* grad) {
    norm.flux(grad, f);
    for (int l = 0; l < npc; ++l) {
      double s = 0.0;
      for (int a = 0; a < dim; ++a) s += f[a] * q.grad[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)];
      out[nodes[l]] += q.weight * s;
    }
  });
  return out;
}

/// Tangent of v -> scale*A(v) + diag(shift_i w_i) v at u, restricted to free nodes.
inline Eigen::SparseMatrix<double> assemble_tangent(const AnisotropyNorm& norm, const Grid& grid,
                                                    const Vec& u, double scale, const Vec& shift) {
  const auto& fi = grid.free_index();
  const int npc = grid.nodes_per_cell();
  const int dim = grid.dim();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(grid.cell_count() * grid.quadrature().size() * static_cast<std::size_t>(npc * npc) +
               grid.node_count());
  double jac[4];
  for_each_quad(grid, u, [&](const int* nodes, const QuadPoint& q, const double* grad) {
    norm.flux_jacobian(grad, jac);
    for (int l = 0; l < npc; ++l) {
      const int r = fi[static_cast<std::size_t>(nodes[l])];
      if (r < 0) continue;
      for (int k = 0; k < npc; ++k) {
        const int c = fi[static_cast<std::size_t>(nodes[k])];
        if (c < 0) continue;
        double s = 0.0;
        for (int a = 0; a < dim; ++a)
          for (int b = 0; b < dim; ++b)
            s += q.grad[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)] * jac[a * dim + b] *
                 q.grad[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)];
        trip.emplace_back(r, c, scale * q.weight * s);
      }
    }
  });
  const auto& w = grid.weights();
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const int r = fi[k];
    if (r >= 0) trip.emplace_back(r, r, shift[static_cast<Eigen::Index>(k)] * w[k]);
  }
  const auto nf = static_cast<Eigen::Index>(grid.free_nodes().size());
  Eigen::SparseMatrix<double> mat(nf, nf);
  mat.setFromTriplets(trip.begin(), trip.end());
  return mat;
}

/// Lumped L2 norm of a nodal residual expressed in strong form:
/// sqrt(sum_free r_i^2 / w_i).
inline double strong_residual_norm(const Grid& grid, const Vec& r) {
  double s = 0.0;
  for (int k : grid.free_nodes()) s += r[k] * r[k] / grid.weights()[static_cast<std::size_t>(k)];
  return std::sqrt(s);
}

}  // namespace detail

/// sum_cells |cell| H^2(grad u), with the 2-D cell integral taken by 2x2 Gauss points.
[[nodiscard]] inline double energy(const AnisotropyNorm& norm, const GridFunction& u) {
  detail::check_norm_dim(norm, u.grid(), "energy");
  double e = 0.0;
  detail::for_each_quad(u.grid(), u.values(), [&](const int*, const QuadPoint& q, const double* grad) {
    const double h = norm.value(grad);
    e += q.weight * h * h;
  });
  return e;
}

/// Same quadrature with the Euclidean norm: sum |cell| |grad u|^2.
[[nodiscard]] inline double dirichlet_energy(const GridFunction& u) {
  return energy(AnisotropyNorm::euclidean(u.grid().dim()), u);
}

/// Lumped sum_i w_i m_i u_i^power, power in {1, 2}.
[[nodiscard]] inline double mass_integral(const GridFunction& m, const GridFunction& u, int power) {
  detail::check_same_grid(m, u, "mass_integral");
  if (power != 1 && power != 2) throw ArgumentError("mass_integral: power must be 1 or 2");
  const auto& w = u.grid().weights();
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double p = power == 1 ? u[k] : u[k] * u[k];
    s += w[k] * m[k] * p;
  }
  return s;
}

/// Lumped integral of u.
[[nodiscard]] inline double integral(const GridFunction& u) {
  const auto& w = u.grid().weights();
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += w[k] * u[k];
  return s;
}

/// Lumped L2 norm.
[[nodiscard]] inline double l2_norm(const GridFunction& u) {
  const auto& w = u.grid().weights();
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += w[k] * u[k] * u[k];
  return std::sqrt(s);
}

[[nodiscard]] inline double max_norm(const GridFunction& u) { return u.values().cwiseAbs().maxCoeff(); }

/// Nodal vector g with g.phi = 2 sum |cell| flux(grad u).grad phi for every
/// nodal phi; Dirichlet entries are zero.
[[nodiscard]] inline GridFunction energy_gradient(const AnisotropyNorm& norm, const GridFunction& u) {
  detail::check_norm_dim(norm, u.grid(), "energy_gradient");
  Vec g = 2.0 * detail::apply_flux(norm, u.grid(), u.values());
  for (std::size_t k = 0; k < u.size(); ++k)
    if (u.grid().is_dirichlet(k)) g[static_cast<Eigen::Index>(k)] = 0.0;
  return GridFunction(u.grid_ptr(), std::move(g));
}

/// Interpolant of the distance to the Dirichlet pieces; positive off them.
[[nodiscard]] inline GridFunction distance_to_dirichlet(const GridPtr& grid) {
  const bool d1 = grid->dim() == 1;
  auto is_d = [&](BoundaryPiece p) { return grid->condition(p) == BoundaryCondition::Dirichlet; };
  const double lx = grid->extent(0), ly = grid->extent(1);
  auto u = GridFunction::interpolate(grid, [&](double x, double y) {
    double d = std::numeric_limits<double>::infinity();
    if (is_d(BoundaryPiece::Left)) d = std::min(d, x);
    if (is_d(BoundaryPiece::Right)) d = std::min(d, lx - x);
    if (!d1) {
      if (is_d(BoundaryPiece::Bottom)) d = std::min(d, y);
      if (is_d(BoundaryPiece::Top)) d = std::min(d, ly - y);
    }
    return d;
  });
  u.apply_dirichlet();
  return u;
}

}  // namespace anisokpp
