/**
 * @file io.hpp
 * @brief CSV export/import of grid functions and small helpers for reproducible output.
 */
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "anisokpp/grid.hpp"

namespace anisokpp {

/// %.17g, enough to round-trip any double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Rows of `index,x[,y],<column>`.
inline std::string grid_function_csv(const GridFunction& u, const std::string& column = "value") {
  const Grid& g = u.grid();
  std::ostringstream os;
  os << "index,x" << (g.dim() == 2 ? ",y," : ",") << column << '\n';
  for (std::size_t k = 0; k < u.size(); ++k) {
    os << k << ',' << fmt17(g.coordinate(k, 0)) << ',';
    if (g.dim() == 2) os << fmt17(g.coordinate(k, 1)) << ',';
    os << fmt17(u[k]) << '\n';
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

/// Reads the last column of a grid-function CSV (header line required).
inline GridFunction read_grid_function_csv(const GridPtr& grid, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": empty file");
  Vec v = Vec::Zero(static_cast<Eigen::Index>(grid->node_count()));
  std::vector<char> seen(grid->node_count(), 0);
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const auto last = line.rfind(',');
    if (comma == std::string::npos) throw IoError(path + ":" + std::to_string(lineno) + ": expected index,...,value");
    try {
      const long idx = std::stol(line.substr(0, comma));
      if (idx < 0 || static_cast<std::size_t>(idx) >= grid->node_count())
        throw IoError(path + ":" + std::to_string(lineno) + ": node index out of range");
      v[idx] = std::stod(line.substr(last + 1));
      seen[static_cast<std::size_t>(idx)] = 1;
    } catch (const std::logic_error&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  for (char s : seen)
    if (!s) throw IoError(path + ": not every node has a value");
  return GridFunction(grid, std::move(v));
}

}  // namespace anisokpp
