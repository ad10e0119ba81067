/**
 * @file cli.hpp
 * @brief Config-driven command line front end. `run` parses arguments, validates
 *        the JSON config completely, executes one subcommand and writes its
 *        artifacts plus a manifest. Returns the process exit code.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anisokpp/anisotropy.hpp"
#include "anisokpp/eigen.hpp"
#include "anisokpp/grid.hpp"
#include "anisokpp/io.hpp"
#include "anisokpp/pde.hpp"
#include "anisokpp/rearrange.hpp"
#include "anisokpp/shooting.hpp"
#include "anisokpp/weight_opt.hpp"

namespace anisokpp::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kNotConverged = 2,
  kInfeasible = 3,
  kInvalidNorm = 4,
  kInvalidDomain = 5,
  kSolverFailure = 6,
  kOracleFailure = 7,
  kIoFailure = 8,
  kUsage = 64,
};

inline const char* exit_code_help() {
  return "Exit codes:\n"
         "  0   success\n"
         "  1   verify: an interval or rearrangement check failed\n"
         "  2   an iteration did not converge\n"
         "  3   infeasible weight (m+ vanishes)\n"
         "  4   invalid norm\n"
         "  5   invalid domain (labels, no Dirichlet piece)\n"
         "  6   solver failure (inner solve, time step, sub-solution bracket)\n"
         "  7   shooting oracle failure\n"
         "  8   file I/O error\n"
         "  64  usage error (arguments or config)\n";
}

/// Invalid config, with the JSON pointer of the offending field or the parse position.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string where(const std::string& path, const std::string& msg) {
  return (path.empty() ? std::string("/") : path) + ": " + msg;
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where(path, "expected an object"));
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where(path + "/" + it.key(), "unknown field"));
  }
}

inline const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(where(path + "/" + key, "missing required number"));
  }
  if (!v->is_number()) throw ConfigError(where(path + "/" + key, "expected a number"));
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError(where(path + "/" + key, "must be finite"));
  return x;
}

inline double positive(const json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
  const double x = number(obj, path, key, fallback);
  if (!(x > 0.0)) throw ConfigError(where(path + "/" + key, "must be positive"));
  return x;
}

inline int integer(const json& obj, const std::string& path, const char* key, std::optional<int> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(where(path + "/" + key, "missing required integer"));
  }
  if (!v->is_number_integer()) throw ConfigError(where(path + "/" + key, "expected an integer"));
  return v->get<int>();
}

inline std::string text(const json& obj, const std::string& path, const char* key,
                        std::optional<std::string> fallback = {}) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(where(path + "/" + key, "missing required string"));
  }
  if (!v->is_string()) throw ConfigError(where(path + "/" + key, "expected a string"));
  return v->get<std::string>();
}

inline bool flag(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(where(path + "/" + key, "expected true or false"));
  return v->get<bool>();
}

inline std::vector<double> numbers(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (!v) return {};
  if (!v->is_array()) throw ConfigError(where(path + "/" + key, "expected an array of numbers"));
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) throw ConfigError(where(path + "/" + key + "/" + std::to_string(i), "expected a number"));
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  const json* v = find(root, key);
  if (!v) return empty;
  if (!v->is_object()) throw ConfigError(where(std::string("/") + key, "expected an object"));
  return *v;
}

inline const json& required_section(const json& root, const char* key) {
  if (!find(root, key)) throw ConfigError(where(std::string("/") + key, "missing required section"));
  return section(root, key);
}

/// Line and column of a byte offset.
inline std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Typed pieces of the config

inline GridPtr parse_grid(const json& g) {
  const std::string p = "/grid";
  detail::check_keys(g, p, {"dim", "cells", "extent", "labels"});
  const int dim = detail::integer(g, p, "dim", 1);
  if (dim != 1 && dim != 2) throw ConfigError(detail::where(p + "/dim", "must be 1 or 2"));

  std::vector<int> cells;
  const json* c = detail::find(g, "cells");
  if (!c) throw ConfigError(detail::where(p + "/cells", "missing required field"));
  if (c->is_number_integer()) {
    cells.assign(static_cast<std::size_t>(dim), c->get<int>());
  } else if (c->is_array()) {
    for (const auto& x : *c) {
      if (!x.is_number_integer()) throw ConfigError(detail::where(p + "/cells", "expected integers"));
      cells.push_back(x.get<int>());
    }
  } else {
    throw ConfigError(detail::where(p + "/cells", "expected an integer or an array"));
  }
  if (static_cast<int>(cells.size()) != dim) throw ConfigError(detail::where(p + "/cells", "one entry per axis"));
  for (int n : cells)
    if (n < 2) throw ConfigError(detail::where(p + "/cells", "at least 2 cells per axis"));

  std::vector<double> extent;
  if (const json* e = detail::find(g, "extent")) {
    if (e->is_number()) {
      extent.assign(static_cast<std::size_t>(dim), e->get<double>());
    } else {
      extent = detail::numbers(g, p, "extent");
    }
  }

  const json& labels = detail::find(g, "labels") ? g["labels"] : json::object();
  if (!labels.is_object()) throw ConfigError(detail::where(p + "/labels", "expected an object"));
  if (dim == 1)
    detail::check_keys(labels, p + "/labels", {"left", "right"});
  else
    detail::check_keys(labels, p + "/labels", {"left", "right", "bottom", "top"});
  std::vector<BoundaryLabel> out;
  const std::pair<const char*, BoundaryPiece> pieces[] = {{"left", BoundaryPiece::Left},
                                                          {"right", BoundaryPiece::Right},
                                                          {"bottom", BoundaryPiece::Bottom},
                                                          {"top", BoundaryPiece::Top}};
  for (int i = 0; i < 2 * dim; ++i) {
    const auto& [key, piece] = pieces[i];
    const std::string lp = p + "/labels/" + key;
    const std::string v = detail::text(labels, p + "/labels", key, std::string("neumann"));
    if (v == "dirichlet")
      out.push_back({piece, BoundaryCondition::Dirichlet});
    else if (v == "neumann")
      out.push_back({piece, BoundaryCondition::Neumann});
    else
      throw ConfigError(detail::where(lp, "expected \"dirichlet\" or \"neumann\""));
  }
  return build_grid(dim, cells, out, extent);
}

inline AnisotropyNorm parse_norm(const json& n, int dim) {
  const std::string p = "/norm";
  detail::check_keys(n, p, {"kind", "a", "b", "matrix", "dim"});
  const std::string kind = detail::text(n, p, "kind", std::string("euclidean"));
  dim = detail::integer(n, p, "dim", dim);
  if (kind == "euclidean") return AnisotropyNorm::euclidean(dim);
  if (kind == "asym1d") return AnisotropyNorm::asym1d(detail::number(n, p, "a"), detail::number(n, p, "b"));
  if (kind == "ellipse") {
    const json* m = detail::find(n, "matrix");
    if (!m || !m->is_array()) throw ConfigError(detail::where(p + "/matrix", "expected a square array of rows"));
    const auto rows = static_cast<Eigen::Index>(m->size());
    Mat a(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const json& row = (*m)[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
        throw ConfigError(detail::where(p + "/matrix", "expected a square array of rows"));
      for (Eigen::Index j = 0; j < rows; ++j) {
        if (!row[static_cast<std::size_t>(j)].is_number())
          throw ConfigError(detail::where(p + "/matrix", "expected numbers"));
        a(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
    return AnisotropyNorm::ellipse(a);
  }
  throw ConfigError(detail::where(p + "/kind", "expected \"euclidean\", \"ellipse\" or \"asym1d\""));
}

struct WeightSpec {
  std::string kind = "constant";
  std::optional<GridFunction> weight;  // absent for "class"
  std::optional<WeightClass> wclass;
};

inline WeightSpec parse_weight(const json& w, const GridPtr& grid, const std::filesystem::path& base) {
  const std::string p = "/weight";
  detail::check_keys(w, p, {"kind", "value", "lo", "hi", "beta", "m0", "path"});
  WeightSpec spec;
  spec.kind = detail::text(w, p, "kind", std::string("constant"));
  if (spec.kind == "constant") {
    spec.weight = GridFunction::constant(grid, detail::number(w, p, "value", 1.0));
  } else if (spec.kind == "interval") {
    if (grid->dim() != 1) throw ConfigError(detail::where(p + "/kind", "interval weights need a 1-D grid"));
    const double lo = detail::number(w, p, "lo"), hi = detail::number(w, p, "hi");
    if (!(lo >= 0.0 && hi <= grid->extent(0) && lo < hi))
      throw ConfigError(detail::where(p + "/lo", "need 0 <= lo < hi <= extent"));
    spec.weight = interval_weight(grid, lo, hi, detail::positive(w, p, "beta", 1.0));
  } else if (spec.kind == "csv") {
    std::filesystem::path path = detail::text(w, p, "path");
    if (path.is_relative()) path = base / path;
    spec.weight = read_grid_function_csv(grid, path.string());
  } else if (spec.kind == "class") {
    WeightClass wc{detail::positive(w, p, "beta", 1.0), detail::number(w, p, "m0", 0.0), grid->measure()};
    if (!(wc.m0 > -1.0 && wc.m0 < wc.beta)) throw ConfigError(detail::where(p + "/m0", "must lie in (-1, beta)"));
    spec.wclass = wc;
    // Stand-in weight for commands other than optimize: the default initial set.
    spec.weight = bathtub(distance_to_dirichlet(grid), wc.target_measure(), wc.beta).weight;
  } else {
    throw ConfigError(detail::where(p + "/kind", "expected \"constant\", \"interval\", \"csv\" or \"class\""));
  }
  return spec;
}

inline EigenOptions parse_solver(const json& s, std::uint64_t seed) {
  const std::string p = "/solver";
  detail::check_keys(s, p, {"tol", "max_iter", "method"});
  EigenOptions o;
  o.tol = detail::positive(s, p, "tol", o.tol);
  o.max_iter = detail::integer(s, p, "max_iter", o.max_iter);
  if (o.max_iter < 1) throw ConfigError(detail::where(p + "/max_iter", "must be positive"));
  const std::string m = detail::text(s, p, "method", std::string("inverse"));
  if (m == "inverse")
    o.method = EigenMethod::InverseIteration;
  else if (m == "pgbb")
    o.method = EigenMethod::ProjectedGradientBB;
  else
    throw ConfigError(detail::where(p + "/method", "expected \"inverse\" or \"pgbb\""));
  o.seed = seed;
  return o;
}

// ---------------------------------------------------------------------------
// Run context: output directory, artifact list, manifest

struct Context {
  json config;
  std::filesystem::path config_dir;
  std::string command;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string started;
  std::vector<std::string> artifacts;
  std::ostream* log = &std::cout;

  void write(const std::string& name, const std::string& body) {
    write_text((out / name).string(), body);
    artifacts.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  [[nodiscard]] std::string config_hash() const { return hex64(fnv1a(config.dump())); }

  void write_manifest(int exit_code, const std::string& error) {
    json m;
    m["tool"] = "anisokpp";
    m["version"] = kVersion;
    m["command"] = command;
    m["config_hash"] = config_hash();
    m["seed"] = seed;
    m["threads"] = threads;
    m["deterministic"] = deterministic_mode();
    m["started"] = started;
    m["finished"] = detail::utc_now();
    m["exit_code"] = exit_code;
    if (!error.empty()) m["error"] = error;
    m["artifacts"] = artifacts;
    write_text((out / "manifest.json").string(), m.dump(2) + "\n");
  }
};

inline std::string table_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
  return os.str();
}

inline json eigen_json(const EigenResult& r) {
  return {{"value", r.value}, {"residual", r.residual}, {"iterations", r.iterations}, {"converged", r.converged}};
}

struct Setup {
  GridPtr grid;
  AnisotropyNorm norm;
  WeightSpec weight;
  EigenOptions eigen;
};

inline Setup common_setup(const Context& ctx, bool need_weight) {
  const json& root = ctx.config;
  GridPtr grid = parse_grid(detail::required_section(root, "grid"));
  AnisotropyNorm norm = parse_norm(detail::section(root, "norm"), grid->dim());
  if (norm.dim() != grid->dim()) throw ConfigError(detail::where("/norm", "dimension differs from the grid"));
  WeightSpec ws;
  if (need_weight) ws = parse_weight(detail::required_section(root, "weight"), grid, ctx.config_dir);
  return {grid, norm, ws, parse_solver(detail::section(root, "solver"), ctx.seed)};
}

// ---------------------------------------------------------------------------
// Commands. Each validates its own section before computing.

inline int cmd_eigen(Context& ctx) {
  const json& sec = detail::section(ctx.config, "eigen");
  detail::check_keys(sec, "/eigen", {"problem", "d"});
  const std::string problem = detail::text(sec, "/eigen", "problem", std::string("lambda"));
  if (problem != "lambda" && problem != "mu")
    throw ConfigError(detail::where("/eigen/problem", "expected \"lambda\" or \"mu\""));
  const double d = problem == "mu" ? detail::positive(sec, "/eigen", "d") : 0.0;
  Setup s = common_setup(ctx, true);

  const EigenResult r = problem == "mu" ? minimize_mu(s.norm, d, *s.weight.weight, s.grid, s.eigen)
                                        : minimize_lambda(s.norm, *s.weight.weight, s.grid, s.eigen);
  json j = eigen_json(r);
  j["problem"] = problem;
  if (problem == "mu") j["d"] = d;
  ctx.write("eigenfunction.csv", grid_function_csv(r.eigenfunction));
  ctx.write_json("eigen.json", j);
  *ctx.log << problem << " = " << fmt17(r.value) << " (residual " << r.residual << ", "
           << (r.converged ? "converged" : "not converged") << ")\n";
  return r.converged ? kOk : kNotConverged;
}

inline int cmd_threshold(Context& ctx) {
  detail::check_keys(detail::section(ctx.config, "threshold"), "/threshold", {});
  Setup s = common_setup(ctx, true);
  const GridFunction& m = *s.weight.weight;
  const EigenResult lam = minimize_lambda(s.norm, m, s.grid, s.eigen);
  const double dstar = 1.0 / lam.value;
  const EigenResult at = minimize_mu(s.norm, dstar, m, s.grid, s.eigen);
  const EigenResult half = minimize_mu(s.norm, 0.5 * dstar, m, s.grid, s.eigen);
  const EigenResult twice = minimize_mu(s.norm, 2.0 * dstar, m, s.grid, s.eigen);
  const bool converged = lam.converged && at.converged && half.converged && twice.converged;
  json j{{"lambda", lam.value},
         {"d_star", dstar},
         {"mu_at_d_star", at.value},
         {"mu_at_half_d_star", half.value},
         {"mu_at_twice_d_star", twice.value},
         {"sign_check", half.value < 0.0 && twice.value > 0.0},
         {"residual", lam.residual},
         {"converged", converged}};
  ctx.write_json("threshold.json", j);
  ctx.write("eigenfunction.csv", grid_function_csv(lam.eigenfunction));
  *ctx.log << "d* = " << fmt17(dstar) << "  lambda = " << fmt17(lam.value) << "  mu(d*) = " << at.value << "\n";
  return converged ? kOk : kNotConverged;
}

inline int cmd_optimize(Context& ctx) {
  const json& sec = detail::section(ctx.config, "optimize");
  const std::string p = "/optimize";
  detail::check_keys(sec, p, {"max_outer", "tol", "initial", "starts"});
  Setup s = common_setup(ctx, true);
  if (!s.weight.wclass) throw ConfigError(detail::where("/weight/kind", "optimize needs a \"class\" weight"));
  WeightOptOptions o;
  o.eigen = s.eigen;
  o.max_outer = detail::integer(sec, p, "max_outer", o.max_outer);
  o.tol = detail::positive(sec, p, "tol", o.tol);
  o.seed = ctx.seed;
  const std::string init = detail::text(sec, p, "initial", std::string("far"));
  if (init == "random")
    o.initial = InitialSet::Random;
  else if (init != "far")
    throw ConfigError(detail::where(p + "/initial", "expected \"far\" or \"random\""));
  const int starts = detail::integer(sec, p, "starts", 1);
  if (starts < 1) throw ConfigError(detail::where(p + "/starts", "must be positive"));

  std::vector<WeightOptResult> distinct;
  const WeightOptResult r = starts == 1 ? optimize_weight(s.norm, s.grid, *s.weight.wclass, o)
                                        : optimize_weight_multistart(s.norm, s.grid, *s.weight.wclass, o, starts,
                                                                     deterministic_mode() ? 1 : ctx.threads, &distinct);
  const Grid& g = *s.grid;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    std::vector<std::string> row{std::to_string(k), fmt17(g.coordinate(k, 0))};
    if (g.dim() == 2) row.push_back(fmt17(g.coordinate(k, 1)));
    row.push_back(r.weight.omega[k] ? "1" : "0");
    rows.push_back(std::move(row));
  }
  ctx.write("omega.csv", table_csv(g.dim() == 2 ? std::vector<std::string>{"node", "x", "y", "indicator"}
                                                : std::vector<std::string>{"node", "x", "indicator"},
                                   rows));
  rows.clear();
  for (const auto& it : r.trace)
    rows.push_back({std::to_string(it.iteration), fmt17(it.lambda), std::to_string(it.set_changes)});
  ctx.write("lambda_trace.csv", table_csv({"iteration", "lambda", "set_change_count"}, rows));
  ctx.write("weight.csv", grid_function_csv(r.weight.weight));
  ctx.write("eigenfunction.csv", grid_function_csv(r.eigen.eigenfunction));
  const bool ok = r.converged;
  json j{{"Lambda", r.eigen.value},
         {"d_star", 1.0 / r.eigen.value},
         {"omega_measure", r.weight.measure},
         {"target_measure", s.weight.wclass->target_measure()},
         {"threshold", r.weight.threshold},
         {"iterations", r.trace.back().iteration},
         {"fixed_point", r.fixed_point},
         {"stop_reason", to_string(r.stop)},
         {"rejected_lambda", r.rejected_lambda ? json(*r.rejected_lambda) : json(nullptr)},
         {"converged", ok}};
  if (starts > 1) j["distinct_final_sets"] = distinct.size();
  ctx.write_json("optimize.json", j);
  *ctx.log << "Lambda = " << fmt17(r.eigen.value) << "  |omega| = " << fmt17(r.weight.measure)
           << "  (" << to_string(r.stop) << (ok ? "" : ", not converged") << ")\n";
  return ok ? kOk : kNotConverged;
}

inline Reaction parse_reaction(const json& root, const GridFunction& m) {
  const json& r = detail::section(root, "reaction");
  detail::check_keys(r, "/reaction", {"kind"});
  const std::string kind = detail::text(r, "/reaction", "kind", std::string("logistic"));
  if (kind != "logistic") throw ConfigError(detail::where("/reaction/kind", "only \"logistic\" drives evolve/sweep"));
  return Reaction::logistic(m);
}

inline ParabolicOptions parse_parabolic(const json& sec, const std::string& p, const EigenOptions& eo) {
  ParabolicOptions o;
  o.dt = detail::positive(sec, p, "dt", o.dt);
  o.steady_tol = detail::positive(sec, p, "steady_tol", o.steady_tol);
  o.zero_tol = detail::positive(sec, p, "zero_tol", o.zero_tol);
  o.elliptic.eigen = eo;
  return o;
}

inline int cmd_evolve(Context& ctx) {
  const json& sec = detail::section(ctx.config, "evolve");
  const std::string p = "/evolve";
  detail::check_keys(sec, p, {"d", "d_factor", "horizon", "dt", "snapshots", "initial", "steady_tol", "zero_tol"});
  if (detail::find(sec, "d") && detail::find(sec, "d_factor"))
    throw ConfigError(detail::where(p, "give either d or d_factor, not both"));
  const double horizon = detail::positive(sec, p, "horizon", 200.0);
  const std::vector<double> snaps = detail::numbers(sec, p, "snapshots");
  const json& init = detail::find(sec, "initial") ? sec["initial"] : json::object();
  detail::check_keys(init, p + "/initial", {"kind", "scale", "value"});
  const std::string ikind = detail::text(init, p + "/initial", "kind", std::string("distance"));
  if (ikind != "distance" && ikind != "constant" && ikind != "subsolution")
    throw ConfigError(detail::where(p + "/initial/kind", "expected \"distance\", \"constant\" or \"subsolution\""));
  const double scale = detail::positive(init, p + "/initial", "scale", 0.5);
  const double level = ikind == "constant" ? detail::positive(init, p + "/initial", "value") : 0.0;
  const double d_given = detail::find(sec, "d") ? detail::positive(sec, p, "d") : 0.0;
  const double d_factor = detail::positive(sec, p, "d_factor", 0.5);
  Setup s = common_setup(ctx, true);
  const Reaction f = parse_reaction(ctx.config, *s.weight.weight);
  ParabolicOptions po = parse_parabolic(sec, p, s.eigen);
  po.snapshot_times = snaps;

  std::optional<double> dstar;
  double d = 0.0;
  if (d_given > 0.0) {
    d = d_given;
  } else {
    dstar = survival_threshold(s.norm, *s.weight.weight, s.grid, s.eigen);
    d = d_factor * *dstar;
  }

  const EllipticResult steady = elliptic_solve(s.norm, d, f, po.elliptic);
  GridFunction v0(s.grid);
  if (ikind == "distance") {
    v0 = GridFunction(s.grid, scale * distance_to_dirichlet(s.grid).values());
  } else if (ikind == "constant") {
    v0 = GridFunction::constant(s.grid, level);
    v0.apply_dirichlet();
  } else {
    if (steady.trivial) throw ConfigError(detail::where(p + "/initial/kind", "no positive sub-solution when d >= d*"));
    v0 = steady.subsolution;
  }
  const Trajectory tr = parabolic_solve(s.norm, d, f, v0, horizon, po, steady.solution);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    std::vector<std::string> row{fmt17(tr.times[i]), fmt17(tr.l2[i]), fmt17(tr.max[i])};
    if (!tr.energy.empty()) row.push_back(fmt17(tr.energy[i]));
    rows.push_back(std::move(row));
  }
  ctx.write("trajectory.csv", table_csv(tr.energy.empty() ? std::vector<std::string>{"time", "l2_norm", "max"}
                                                          : std::vector<std::string>{"time", "l2_norm", "max", "energy"},
                                        rows));
  json snapshots = json::array();
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03zu.csv", i);
    ctx.write(name, grid_function_csv(tr.snapshots[i].values));
    snapshots.push_back({{"time", tr.snapshots[i].time}, {"file", name}});
  }
  ctx.write("steady.csv", grid_function_csv(steady.solution));
  ctx.write("terminal.csv", grid_function_csv(tr.terminal));
  json j{{"d", d},
         {"horizon", horizon},
         {"dt", po.dt},
         {"outcome", to_string(tr.outcome)},
         {"terminal_norm", tr.terminal_norm},
         {"distance_to_steady", tr.distance_to_steady},
         {"steady_trivial", steady.trivial},
         {"snapshots", snapshots}};
  if (dstar) j["d_star"] = *dstar;
  ctx.write_json("evolve.json", j);
  *ctx.log << "d = " << fmt17(d) << "  outcome: " << to_string(tr.outcome) << "  ||v(T)|| = " << tr.terminal_norm
           << "\n";
  return kOk;
}

inline int cmd_sweep(Context& ctx) {
  const json& sec = detail::section(ctx.config, "sweep");
  const std::string p = "/sweep";
  detail::check_keys(sec, p,
                     {"d_values", "d_min", "d_max", "points", "relative", "spacing", "parabolic", "horizon", "dt",
                      "steady_tol", "zero_tol"});
  std::vector<double> ds = detail::numbers(sec, p, "d_values");
  const bool relative = detail::flag(sec, p, "relative", ds.empty());
  const double dmin = detail::positive(sec, p, "d_min", 0.5), dmax = detail::positive(sec, p, "d_max", 2.0);
  const int points = detail::integer(sec, p, "points", 13);
  const std::string spacing = detail::text(sec, p, "spacing", std::string("log"));
  if (spacing != "log" && spacing != "linear")
    throw ConfigError(detail::where(p + "/spacing", "expected \"log\" or \"linear\""));
  if (ds.empty() && (points < 2 || !(dmax > dmin)))
    throw ConfigError(detail::where(p + "/points", "need points >= 2 and d_max > d_min"));
  SweepOptions so;
  so.run_parabolic = detail::flag(sec, p, "parabolic", true);
  so.horizon = detail::positive(sec, p, "horizon", so.horizon);
  so.threads = ctx.threads;
  Setup s = common_setup(ctx, true);
  so.parabolic = parse_parabolic(sec, p, s.eigen);
  const Reaction f = parse_reaction(ctx.config, *s.weight.weight);

  const double dstar = survival_threshold(s.norm, *s.weight.weight, s.grid, s.eigen);
  if (ds.empty()) {
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      ds.push_back(spacing == "log" ? dmin * std::pow(dmax / dmin, t) : dmin + (dmax - dmin) * t);
    }
  }
  if (relative)
    for (double& d : ds) d *= dstar;
  const SweepResult r = sweep_diffusion(s.norm, f, ds, so);

  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) rows.push_back({fmt17(row.d), fmt17(row.mu), fmt17(row.u_max), to_string(row.outcome)});
  ctx.write("sweep.csv", table_csv({"d", "mu", "u_max", "outcome"}, rows));
  json j{{"d_star", dstar}, {"sign_changes", r.sign_changes}, {"points", ds.size()}};
  if (r.bracket) {
    j["bracket"] = {r.bracket->first, r.bracket->second};
    j["bracket_contains_d_star"] = r.bracket->first <= dstar && dstar <= r.bracket->second;
  }
  ctx.write_json("sweep.json", j);
  *ctx.log << "d* = " << fmt17(dstar) << "  mu sign changes: " << r.sign_changes << "\n";
  return kOk;
}

inline int cmd_verify(Context& ctx) {
  const json& sec = detail::section(ctx.config, "verify");
  const std::string p = "/verify";
  detail::check_keys(sec, p, {"beta", "m0", "boundary", "cells", "samples"});
  const double beta = detail::positive(sec, p, "beta", 1.0);
  const double m0 = detail::number(sec, p, "m0", 0.0);
  if (!(m0 > -1.0 && m0 < beta)) throw ConfigError(detail::where(p + "/m0", "must lie in (-1, beta)"));
  const int cells = detail::integer(sec, p, "cells", 512);
  if (cells < 2) throw ConfigError(detail::where(p + "/cells", "at least 2"));
  const int samples = detail::integer(sec, p, "samples", 100);
  if (samples < 0) throw ConfigError(detail::where(p + "/samples", "must be nonnegative"));
  const std::string bd = detail::text(sec, p, "boundary", std::string("both"));
  if (bd != "DN" && bd != "ND" && bd != "both")
    throw ConfigError(detail::where(p + "/boundary", "expected \"DN\", \"ND\" or \"both\""));
  const AnisotropyNorm norm = parse_norm(detail::section(ctx.config, "norm"), 1);
  if (norm.dim() != 1) throw ConfigError(detail::where("/norm", "verify needs a 1-D norm"));
  WeightOptOptions wo;
  wo.eigen = parse_solver(detail::section(ctx.config, "solver"), ctx.seed);

  bool all = true;
  json theorems = json::array();
  for (MixedBoundary b : {MixedBoundary::DN, MixedBoundary::ND}) {
    const char* name = b == MixedBoundary::DN ? "DN" : "ND";
    if (bd != "both" && bd != name) continue;
    const TheoremReport t = verify_1d_theorem(norm, beta, m0, b, cells, wo);
    all = all && t.passed;
    theorems.push_back({{"boundary", name},
                        {"passed", t.passed},
                        {"omega", {t.omega_lo, t.omega_hi}},
                        {"expected", {t.expected_lo, t.expected_hi}},
                        {"contiguous", t.contiguous},
                        {"endpoints_ok", t.endpoints_ok},
                        {"monotone_ok", t.monotone_ok},
                        {"lambda", t.lambda},
                        {"lambda_oracle", t.lambda_oracle},
                        {"lambda_rel_error", t.lambda_rel_error},
                        {"messages", t.messages}});
    *ctx.log << name << ": omega = (" << t.omega_lo << ", " << t.omega_hi << ")  " << (t.passed ? "pass" : "FAIL")
             << "\n";
  }

  // Randomized rearrangement checks on DN grids.
  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int hl_fail = 0, polya_fail = 0, equi_fail = 0;
  double hl_margin = std::numeric_limits<double>::infinity(), polya_margin = hl_margin;
  const bool polya_norm =
      norm.kind() == AnisotropyNorm::Kind::Euclidean || norm.kind() == AnisotropyNorm::Kind::Asym1D;
  for (int i = 0; i < samples; ++i) {
    const int n = 8 + static_cast<int>(unif(rng) * 120);
    const auto g = build_grid(1, {n}, {{BoundaryPiece::Left, BoundaryCondition::Dirichlet},
                                       {BoundaryPiece::Right, BoundaryCondition::Neumann}});
    GridFunction m(g), u(g);
    for (std::size_t k = 0; k < m.size(); ++k) {
      m[k] = -beta + (1.0 + beta) * unif(rng);
      u[k] = unif(rng);
    }
    u.apply_dirichlet();
    const GridFunction us = monotone_rearrange(u, RearrangeDirection::Increasing);
    if (!equimeasurable(u, us)) ++equi_fail;
    const InequalityReport hl = hardy_littlewood_check(m, u);
    hl_fail += !hl.holds;
    hl_margin = std::min(hl_margin, hl.lhs - hl.rhs);
    if (polya_norm) {
      const InequalityReport py = polya_check(norm, u);
      polya_fail += !py.holds;
      polya_margin = std::min(polya_margin, py.rhs - py.lhs);
    }
  }
  all = all && hl_fail == 0 && polya_fail == 0 && equi_fail == 0;
  json j{{"passed", all},
         {"theorem", theorems},
         {"rearrangement",
          {{"samples", samples},
           {"equimeasurability_failures", equi_fail},
           {"hardy_littlewood_failures", hl_fail},
           {"hardy_littlewood_min_margin", samples ? json(hl_margin) : json(nullptr)},
           {"polya_checked", polya_norm},
           {"polya_failures", polya_fail},
           {"polya_min_margin", samples && polya_norm ? json(polya_margin) : json(nullptr)}}}};
  ctx.write_json("verify.json", j);
  *ctx.log << "rearrangement: " << hl_fail << " Hardy-Littlewood and " << polya_fail << " Polya failures in "
           << samples << " samples\n";
  return all ? kOk : kCheckFailed;
}

inline int cmd_check_norm(Context& ctx) {
  const json& sec = detail::section(ctx.config, "check_norm");
  detail::check_keys(sec, "/check_norm", {"samples"});
  const int samples = detail::integer(sec, "/check_norm", "samples", 256);
  if (samples < 64) throw ConfigError(detail::where("/check_norm/samples", "at least 64"));
  int dim = 1;
  if (detail::find(ctx.config, "grid")) {
    const json& g = detail::section(ctx.config, "grid");
    dim = detail::integer(g, "/grid", "dim", 1);
  }
  const AnisotropyNorm norm = parse_norm(detail::section(ctx.config, "norm"), dim);
  const NormConstants c = certify(norm, samples);
  ctx.write_json("norm.json", {{"kind", norm.name()},
                               {"dim", norm.dim()},
                               {"alpha_lo", c.alpha_lo},
                               {"alpha_hi", c.alpha_hi},
                               {"grad_bound", c.grad_bound},
                               {"convexity", c.convexity},
                               {"samples", samples}});
  *ctx.log << norm.name() << ": alpha_lo = " << c.alpha_lo << "  alpha_hi = " << c.alpha_hi
           << "  Q = " << c.grad_bound << "  Xi = " << c.convexity << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Applies `path=value` overrides; path uses dots ("grid.cells"), value is JSON or a bare string.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + assignment + ": expected path=value");
  std::string ptr = "/" + assignment.substr(0, eq);
  for (char& c : ptr)
    if (c == '.') c = '/';
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  config[json::json_pointer(ptr)] = value;
}

inline json load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string body = ss.str();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + detail::position(body, e.byte) + ": " + e.what());
  }
}

/// Maps library errors to exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const ArgumentError*>(&e)) return kUsage;
  if (dynamic_cast<const UnsupportedDimensionError*>(&e)) return kUsage;
  if (dynamic_cast<const InfeasibleWeightError*>(&e)) return kInfeasible;
  if (dynamic_cast<const InvalidNormError*>(&e)) return kInvalidNorm;
  if (dynamic_cast<const InvalidDomainError*>(&e)) return kInvalidDomain;
  if (dynamic_cast<const OracleFailure*>(&e)) return kOracleFailure;
  if (dynamic_cast<const IoError*>(&e)) return kIoFailure;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kIoFailure;
  if (dynamic_cast<const json::exception*>(&e)) return kUsage;
  return kSolverFailure;
}

/// Entry point shared by the executable and the tests.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"anisokpp: principal eigenvalues, survival thresholds, bang-bang weights and "
               "reaction-diffusion dynamics for anisotropic operators with mixed boundary conditions"};
  app.footer(exit_code_help());
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (default: config \"output\" or ./out)");
  app.add_option("--seed", seed, "Seed for randomized starts and samples");
  app.add_option("--threads", threads, "Worker threads for sweeps and multi-start")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "Override a config field, e.g. --set grid.cells=256");

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(Context&);
  };
  const Sub subs[] = {
      {"eigen", "Principal value lambda(m) or mu(d,m) and its eigenfunction", cmd_eigen},
      {"threshold", "Survival threshold d* = 1/lambda(m) with the sign check of mu", cmd_threshold},
      {"optimize", "Bang-bang weight minimizing lambda over the admissible class", cmd_optimize},
      {"evolve", "Parabolic trajectory from an initial population", cmd_evolve},
      {"sweep", "mu, steady state and long-time outcome over a ladder of d", cmd_sweep},
      {"verify", "1-D optimal-interval check and rearrangement inequalities", cmd_verify},
      {"check-norm", "Certified constants of the norm", cmd_check_norm},
  };
  std::vector<CLI::App*> handles;
  for (const Sub& s : subs) handles.push_back(app.add_subcommand(s.name, s.help));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::size_t chosen = 0;
  for (std::size_t i = 0; i < handles.size(); ++i)
    if (handles[i]->parsed()) chosen = i;

  Context ctx;
  ctx.command = subs[chosen].name;
  ctx.seed = seed;
  ctx.threads = deterministic_mode() ? 1 : threads;
  ctx.log = &out;
  ctx.started = detail::utc_now();
  bool out_ready = false;
  try {
    if (config_path.empty()) throw ConfigError("--config is required");
    ctx.config = load_config(config_path);
    ctx.config_dir = std::filesystem::absolute(config_path).parent_path();
    for (const auto& o : overrides) apply_override(ctx.config, o);
    if (out_dir.empty()) {
      const json* o = detail::find(ctx.config, "output");
      if (o && !o->is_string()) throw ConfigError(detail::where("/output", "expected a string"));
      out_dir = o ? o->get<std::string>() : "out";
    }
    detail::check_keys(ctx.config, "",
                       {"norm", "grid", "weight", "reaction", "solver", "output", "eigen", "threshold", "optimize",
                        "evolve", "sweep", "verify", "check_norm"});
    ctx.out = out_dir;
    std::filesystem::create_directories(ctx.out);
    out_ready = true;
    const int code = subs[chosen].fn(ctx);
    ctx.write_manifest(code, "");
    return code;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    if (out_ready && !ctx.artifacts.empty()) {
      try {
        ctx.write_manifest(code, e.what());
      } catch (const std::exception&) {
      }
    }
    return code;
  }
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}

}  // namespace anisokpp::cli
