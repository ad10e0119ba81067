#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "anisokpp/anisokpp.hpp"

namespace anisokpp::testing {

inline GridPtr interval(int cells, BoundaryCondition left, BoundaryCondition right) {
  return build_grid(1, {cells}, {{BoundaryPiece::Left, left}, {BoundaryPiece::Right, right}});
}

inline GridPtr dn(int cells) { return interval(cells, BoundaryCondition::Dirichlet, BoundaryCondition::Neumann); }
inline GridPtr nd(int cells) { return interval(cells, BoundaryCondition::Neumann, BoundaryCondition::Dirichlet); }

/// Unit square, Dirichlet on the left side only.
inline GridPtr square_left(int cells) {
  return build_grid(2, {cells, cells},
                    {{BoundaryPiece::Left, BoundaryCondition::Dirichlet},
                     {BoundaryPiece::Right, BoundaryCondition::Neumann},
                     {BoundaryPiece::Bottom, BoundaryCondition::Neumann},
                     {BoundaryPiece::Top, BoundaryCondition::Neumann}});
}

/// Random function vanishing on Dirichlet nodes.
inline GridFunction random_function(const GridPtr& g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GridFunction f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = g->is_dirichlet(k) ? 0.0 : u(rng);
  return f;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("anisokpp_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace anisokpp::testing
