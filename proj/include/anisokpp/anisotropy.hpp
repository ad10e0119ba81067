/**
 * @file anisotropy.hpp
 * @brief Anisotropic gauges H, their flux H(xi) grad H(xi), and certified constants.
 *
 * The flux is the vector field whose divergence gives the anisotropic diffusion
 * operator; it is 1-homogeneous and is extended by zero at the origin.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "anisokpp/error.hpp"

namespace anisokpp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Growth bounds, gradient bound and convexity modulus of a norm.
///
/// `convexity` is the smallest eigenvalue of the Hessian of H^2/2, i.e. the
/// monotonicity modulus of the flux.
struct NormConstants {
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;
  double grad_bound = 0.0;
  double convexity = 0.0;
};

class AnisotropyNorm {
 public:
  enum class Kind { Euclidean, Ellipse, Asym1D, Custom };

  using ValueFn = std::function<double(const Vec&)>;
  using GradientFn = std::function<Vec(const Vec&)>;

  static AnisotropyNorm euclidean(int dim) {
    if (dim < 1) throw ArgumentError("euclidean norm: dim must be positive");
    return AnisotropyNorm(dim, EuclideanData{});
  }

  /// H(xi) = sqrt(xi^T A xi) with A symmetric positive definite.
  static AnisotropyNorm ellipse(Mat a) {
    if (a.rows() < 1 || a.rows() != a.cols())
      throw ArgumentError("ellipse norm: matrix must be square and non-empty");
    if (!a.isApprox(a.transpose(), 1e-12))
      throw InvalidNormError("ellipse norm: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(a);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      throw InvalidNormError("ellipse norm: matrix is not positive definite");
    const int dim = static_cast<int>(a.rows());
    return AnisotropyNorm(dim, EllipseData{std::move(a), eig.eigenvalues().minCoeff(),
                                           eig.eigenvalues().maxCoeff()});
  }

  /// One-dimensional gauge H(x) = a x for x > 0 and -b x for x <= 0.
  static AnisotropyNorm asym1d(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
      throw InvalidNormError("asym1d norm: a and b must be positive");
    if (a == b) throw InvalidNormError("asym1d norm: requires a != b (use euclidean)");
    return AnisotropyNorm(1, Asym1DData{a, b});
  }

  /// Library-only norm given by its value and gradient away from the origin.
  static AnisotropyNorm custom(int dim, ValueFn value, GradientFn gradient) {
    if (dim < 1) throw ArgumentError("custom norm: dim must be positive");
    if (!value || !gradient) throw ArgumentError("custom norm: empty evaluator");
    return AnisotropyNorm(dim, CustomData{std::move(value), std::move(gradient)});
  }

  [[nodiscard]] Kind kind() const { return static_cast<Kind>(data_.index()); }
  [[nodiscard]] int dim() const { return dim_; }

  /// True when the flux is linear in xi (Euclidean and Ellipse).
  [[nodiscard]] bool linear_flux() const {
    return kind() == Kind::Euclidean || kind() == Kind::Ellipse;
  }

  [[nodiscard]] const Mat& matrix() const { return std::get<EllipseData>(data_).a; }
  [[nodiscard]] double a() const { return std::get<Asym1DData>(data_).a; }
  [[nodiscard]] double b() const { return std::get<Asym1DData>(data_).b; }

  [[nodiscard]] std::string name() const {
    switch (kind()) {
      case Kind::Euclidean: return "euclidean";
      case Kind::Ellipse: return "ellipse";
      case Kind::Asym1D: return "asym1d";
      case Kind::Custom: return "custom";
    }
    return "unknown";
  }

  // Raw evaluators: `xi` and `out` point to dim() (dim()^2 for jacobians) doubles.

  [[nodiscard]] double value(const double* xi) const {
    switch (kind()) {
      case Kind::Euclidean: {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += xi[i] * xi[i];
        return std::sqrt(s);
      }
      case Kind::Ellipse: {
        const Mat& a = matrix();
        double s = 0.0;
        for (int i = 0; i < dim_; ++i)
          for (int j = 0; j < dim_; ++j) s += xi[i] * a(i, j) * xi[j];
        return std::sqrt(std::max(s, 0.0));
      }
      case Kind::Asym1D: {
        const auto& d = std::get<Asym1DData>(data_);
        return xi[0] > 0.0 ? d.a * xi[0] : -d.b * xi[0];
      }
      case Kind::Custom: {
        const Vec v = Eigen::Map<const Vec>(xi, dim_);
        if (v.squaredNorm() == 0.0) return 0.0;
        return std::get<CustomData>(data_).value(v);
      }
    }
    return 0.0;
  }

  /// Gradient of H; only meaningful for xi != 0.
  void gradient(const double* xi, double* out) const {
    switch (kind()) {
      case Kind::Euclidean:
      case Kind::Ellipse: {
        const double h = value(xi);
        flux(xi, out);
        for (int i = 0; i < dim_; ++i) out[i] = h > 0.0 ? out[i] / h : 0.0;
        return;
      }
      case Kind::Asym1D: {
        const auto& d = std::get<Asym1DData>(data_);
        out[0] = xi[0] > 0.0 ? d.a : -d.b;
        return;
      }
      case Kind::Custom: {
        const Vec g = std::get<CustomData>(data_).gradient(Eigen::Map<const Vec>(xi, dim_));
        for (int i = 0; i < dim_; ++i) out[i] = g[i];
        return;
      }
    }
  }

  /// H(xi) grad H(xi), continuously extended by 0 at the origin.
  void flux(const double* xi, double* out) const {
    switch (kind()) {
      case Kind::Euclidean:
        for (int i = 0; i < dim_; ++i) out[i] = xi[i];
        return;
      case Kind::Ellipse: {
        const Mat& a = matrix();
        for (int i = 0; i < dim_; ++i) {
          double s = 0.0;
          for (int j = 0; j < dim_; ++j) s += a(i, j) * xi[j];
          out[i] = s;
        }
        return;
      }
      case Kind::Asym1D: {
        const auto& d = std::get<Asym1DData>(data_);
        out[0] = (xi[0] > 0.0 ? d.a * d.a : d.b * d.b) * xi[0];
        return;
      }
      case Kind::Custom: {
        const Vec v = Eigen::Map<const Vec>(xi, dim_);
        if (v.squaredNorm() == 0.0) {
          for (int i = 0; i < dim_; ++i) out[i] = 0.0;
          return;
        }
        const auto& c = std::get<CustomData>(data_);
        const Vec f = c.value(v) * c.gradient(v);
        for (int i = 0; i < dim_; ++i) out[i] = f[i];
        return;
      }
    }
  }

  /// Jacobian of the flux (Hessian of H^2/2), row-major. At a kink of a
  /// piecewise-linear gauge the branch of the `xi <= 0` side is returned.
  void flux_jacobian(const double* xi, double* out) const {
    switch (kind()) {
      case Kind::Euclidean:
        for (int i = 0; i < dim_; ++i)
          for (int j = 0; j < dim_; ++j) out[i * dim_ + j] = i == j ? 1.0 : 0.0;
        return;
      case Kind::Ellipse: {
        const Mat& a = matrix();
        for (int i = 0; i < dim_; ++i)
          for (int j = 0; j < dim_; ++j) out[i * dim_ + j] = a(i, j);
        return;
      }
      case Kind::Asym1D: {
        const auto& d = std::get<Asym1DData>(data_);
        out[0] = xi[0] > 0.0 ? d.a * d.a : d.b * d.b;
        return;
      }
      case Kind::Custom: {
        // Central differences with step 1e-5 |xi|; the jacobian is
        // 0-homogeneous, so the origin borrows the value at e_1.
        Vec base = Eigen::Map<const Vec>(xi, dim_);
        double scale = base.norm();
        if (scale == 0.0) {
          base = Vec::Unit(dim_, 0);
          scale = 1.0;
        }
        const double step = 1e-5 * scale;
        Vec plus(dim_), minus(dim_);
        for (int j = 0; j < dim_; ++j) {
          Vec xp = base, xm = base;
          xp[j] += step;
          xm[j] -= step;
          flux(xp.data(), plus.data());
          flux(xm.data(), minus.data());
          for (int i = 0; i < dim_; ++i) out[i * dim_ + j] = (plus[i] - minus[i]) / (2.0 * step);
        }
        return;
      }
    }
  }

  /// Closed-form constants; nullopt-like flag `available` is false for Custom.
  [[nodiscard]] std::pair<bool, NormConstants> analytic_constants() const {
    switch (kind()) {
      case Kind::Euclidean:
        return {true, {1.0, 1.0, 1.0, 1.0}};
      case Kind::Ellipse: {
        const auto& e = std::get<EllipseData>(data_);
        return {true, {std::sqrt(e.eig_min), std::sqrt(e.eig_max), std::sqrt(e.eig_max), e.eig_min}};
      }
      case Kind::Asym1D: {
        const auto& d = std::get<Asym1DData>(data_);
        const double lo = std::min(d.a, d.b), hi = std::max(d.a, d.b);
        return {true, {lo, hi, hi, lo * lo}};
      }
      case Kind::Custom:
        return {false, {}};
    }
    return {false, {}};
  }

 private:
  struct EuclideanData {};
  struct EllipseData {
    Mat a;
    double eig_min;
    double eig_max;
  };
  struct Asym1DData {
    double a;
    double b;
  };
  struct CustomData {
    ValueFn value;
    GradientFn gradient;
  };
  using Data = std::variant<EuclideanData, EllipseData, Asym1DData, CustomData>;

  AnisotropyNorm(int dim, Data data) : dim_(dim), data_(std::move(data)) {}

  int dim_;
  Data data_;
};

namespace detail {

inline void check_dim(const AnisotropyNorm& norm, const Vec& xi) {
  if (xi.size() != norm.dim())
    throw ArgumentError("vector of length " + std::to_string(xi.size()) +
                        " passed to a norm of dimension " + std::to_string(norm.dim()));
}

/// i-th element of the Halton sequence in the given prime base.
inline double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

}  // namespace detail

/// H(xi).
[[nodiscard]] inline double h_eval(const AnisotropyNorm& norm, const Vec& xi) {
  detail::check_dim(norm, xi);
  return norm.value(xi.data());
}

/// grad H(xi) for xi != 0.
[[nodiscard]] inline Vec h_gradient(const AnisotropyNorm& norm, const Vec& xi) {
  detail::check_dim(norm, xi);
  Vec out(norm.dim());
  norm.gradient(xi.data(), out.data());
  return out;
}

/// H(xi) grad H(xi); the zero vector at xi = 0.
[[nodiscard]] inline Vec flux(const AnisotropyNorm& norm, const Vec& xi) {
  detail::check_dim(norm, xi);
  Vec out(norm.dim());
  norm.flux(xi.data(), out.data());
  return out;
}

[[nodiscard]] inline Mat flux_jacobian(const AnisotropyNorm& norm, const Vec& xi) {
  detail::check_dim(norm, xi);
  Mat out(norm.dim(), norm.dim());
  std::vector<double> raw(static_cast<std::size_t>(norm.dim() * norm.dim()));
  norm.flux_jacobian(xi.data(), raw.data());
  for (int i = 0; i < norm.dim(); ++i)
    for (int j = 0; j < norm.dim(); ++j) out(i, j) = raw[static_cast<std::size_t>(i * norm.dim() + j)];
  return out;
}

/// Deterministic unit-sphere sample: both points for N=1, equispaced angles
/// for N=2, normalized Halton points of [-1,1]^N otherwise.
[[nodiscard]] inline std::vector<Vec> sphere_sample(int dim, int count) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  if (dim == 1) {
    for (int k = 0; k < count; ++k) out.push_back(Vec::Constant(1, k % 2 == 0 ? 1.0 : -1.0));
    return out;
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = 2.0 * M_PI * (k + 0.5) / count;
      Vec v(2);
      v << std::cos(t), std::sin(t);
      out.push_back(v);
    }
    return out;
  }
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47};
  if (dim > static_cast<int>(std::size(kPrimes)))
    throw UnsupportedDimensionError("sphere_sample: dimension too large");
  for (int idx = 1; static_cast<int>(out.size()) < count; ++idx) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = 2.0 * detail::halton(idx, kPrimes[i]) - 1.0;
    const double n = v.norm();
    if (n < 1e-3) continue;
    out.push_back(v / n);
  }
  return out;
}

/// Certifies the structural constants of `norm`.
///
/// Every sample must satisfy the Euler identity grad H(xi).xi = H(xi) to 1e-10
/// relative. Closed-form kinds report exact constants; Custom norms are
/// estimated on the deterministic sample.
[[nodiscard]] inline NormConstants certify(const AnisotropyNorm& norm, int samples = 256) {
  if (samples < 64) throw ArgumentError("certify: need at least 64 samples");
  const int n = norm.dim();
  const auto points = sphere_sample(n, samples);

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0, q = 0.0;
  double xi_min = std::numeric_limits<double>::infinity();
  Vec grad(n);
  std::vector<double> jac(static_cast<std::size_t>(n * n));
  for (const Vec& p : points) {
    const double h = norm.value(p.data());
    if (!(h > 0.0)) throw InvalidNormError("certify: H is not positive on the unit sphere");
    norm.gradient(p.data(), grad.data());
    if (std::abs(grad.dot(p) - h) > 1e-10 * h)
      throw InvalidNormError("certify: Euler identity grad H(xi).xi = H(xi) violated");
    lo = std::min(lo, h);
    hi = std::max(hi, h);
    q = std::max(q, grad.norm());
    if (norm.kind() == AnisotropyNorm::Kind::Custom) {
      norm.flux_jacobian(p.data(), jac.data());
      Mat j = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          jac.data(), n, n);
      const Mat sym = 0.5 * (j + j.transpose());
      xi_min = std::min(xi_min, Eigen::SelfAdjointEigenSolver<Mat>(sym).eigenvalues().minCoeff());
    }
  }

  auto [closed, constants] = norm.analytic_constants();
  if (!closed) constants = {lo, hi, q, xi_min};
  if (!(constants.convexity > 0.0))
    throw InvalidNormError("certify: nonpositive convexity estimate");
  return constants;
}

}  // namespace anisokpp
