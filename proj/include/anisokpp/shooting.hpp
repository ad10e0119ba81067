/**
 * @file shooting.hpp
 * @brief Independent 1-D oracle for the principal eigenvalue of
 *        -(H(u')H'(u'))' = lambda m u on (0,1) with m = chi_omega - beta chi_omega^c,
 *        H(x) = a x (x > 0), -b x (x <= 0), and one Dirichlet end.
 *
 * The flux q = H(u')H'(u') equals a^2 u' while u increases and b^2 u' while it
 * decreases, so on every piece where m and the sign of u' are fixed the ODE is
 * linear with constant coefficients and is integrated in closed form
 * (trigonometric for m > 0, hyperbolic for m < 0). The shooting map
 * lambda -> q(1) (DN) is bisected for its first zero with u > 0.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "anisokpp/error.hpp"

namespace anisokpp {

/// DN: Dirichlet at x = 0, Neumann at x = 1. ND: the mirror configuration.
enum class MixedBoundary { DN, ND };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

namespace detail {

struct ShotState {
  double u = 0.0;
  double q = 0.0;  // flux
  bool vanished = false;
};

/// Smallest s in (0, inf) with cos(k s - delta) = 0, i.e. k s - delta = pi/2 (mod pi).
inline double first_cos_zero(double k, double delta) {
  double t = std::fmod(delta + 0.5 * M_PI, M_PI);
  if (t < 0.0) t += M_PI;
  if (t <= 1e-15) t = M_PI;
  return t / k;
}

/// Advances (u, q) across a piece of length `len` with constant weight m.
inline void advance(ShotState& st, double m, double len, double lambda, double a, double b) {
  double remaining = len;
  for (int guard = 0; remaining > 0.0 && guard < 64; ++guard) {
    // Coefficient of the current monotonicity branch; at q = 0 the sign of u'' decides.
    bool increasing = st.q > 0.0 || (st.q == 0.0 && m < 0.0);
    const double c2 = increasing ? a * a : b * b;
    const double p = st.q / c2;  // u'
    const double u = st.u;
    double s_switch = remaining * 2.0 + 1.0;
    double s_zero = s_switch;

    if (m > 0.0) {
      const double k = std::sqrt(lambda * m / c2);
      // p(s) = p cos ks - u k sin ks, u(s) = u cos ks + (p/k) sin ks
      s_switch = first_cos_zero(k, std::atan2(-u * k, p));
      if (p == 0.0 && st.q == 0.0) s_switch = remaining * 2.0 + 1.0;  // moving off a turning point
      s_zero = first_cos_zero(k, std::atan2(p / k, u));
      const double s = std::min({remaining, s_switch, s_zero});
      const double cs = std::cos(k * s), sn = std::sin(k * s);
      st.u = u * cs + (p / k) * sn;
      st.q = c2 * (p * cs - u * k * sn);
      if (s == s_zero && s_zero <= remaining) {
        st.vanished = true;
        return;
      }
      if (s == s_switch && s_switch < remaining) st.q = 0.0;
      remaining -= s;
    } else if (m < 0.0) {
      const double k = std::sqrt(lambda * (-m) / c2);
      // p(s) = u k sinh ks + p cosh ks, u(s) = u cosh ks + (p/k) sinh ks
      if (p < 0.0 && -p < u * k) s_switch = std::atanh(-p / (u * k)) / k;
      if (p < 0.0 && u * k < -p) s_zero = std::atanh(-u * k / p) / k;
      const double s = std::min({remaining, s_switch, s_zero});
      const double ch = std::cosh(k * s), sh = std::sinh(k * s);
      st.u = u * ch + (p / k) * sh;
      st.q = c2 * (u * k * sh + p * ch);
      if (s == s_zero && s_zero <= remaining) {
        st.vanished = true;
        return;
      }
      if (s == s_switch && s_switch < remaining) st.q = 0.0;
      remaining -= s;
    } else {
      if (p < 0.0) s_zero = -u / p;
      const double s = std::min(remaining, s_zero);
      st.u = u + p * s;
      if (s == s_zero && s_zero <= remaining) {
        st.vanished = true;
        return;
      }
      remaining -= s;
    }
    if (st.u <= 0.0) {
      st.vanished = true;
      return;
    }
  }
}

/// Neumann-end flux for the DN problem, or -1 when u vanishes inside (0,1].
inline double shoot_dn(double lambda, double a, double b, double beta, Interval omega) {
  ShotState st{0.0, 1.0, false};
  struct Piece {
    double from, to, m;
  };
  const Piece pieces[3] = {{0.0, omega.lo, -beta}, {omega.lo, omega.hi, 1.0}, {omega.hi, 1.0, -beta}};
  for (const Piece& pc : pieces) {
    if (pc.to <= pc.from) continue;
    advance(st, pc.m, pc.to - pc.from, lambda, a, b);
    if (st.vanished) return -1.0;
  }
  return st.q;
}

}  // namespace detail

/// Principal eigenvalue of the 1-D mixed problem with m = chi_omega - beta chi_omega^c.
///
/// Bisects the shooting map to a relative bracket width of 1e-13. Throws
/// OracleFailure if no sign change is found in [1e-12, 1e12].
[[nodiscard]] inline double shooting_eigenvalue_1d(double a, double b, double beta, Interval omega,
                                                   MixedBoundary boundary) {
  if (!(a > 0.0) || !(b > 0.0) || !(beta > 0.0))
    throw ArgumentError("shooting_eigenvalue_1d: a, b, beta must be positive");
  if (!(omega.lo >= 0.0 && omega.hi <= 1.0 && omega.lo < omega.hi))
    throw ArgumentError("shooting_eigenvalue_1d: omega must be a subinterval of (0,1)");
  // The mirror x -> 1-x turns ND into DN and swaps the two slopes.
  if (boundary == MixedBoundary::ND) {
    std::swap(a, b);
    omega = {1.0 - omega.hi, 1.0 - omega.lo};
  }
  auto shoot = [&](double lambda) { return detail::shoot_dn(lambda, a, b, beta, omega); };

  double hi = 1.0;
  while (shoot(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw OracleFailure("shooting_eigenvalue_1d: no root below 1e12");
  }
  double lo = 0.5 * hi;
  while (shoot(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < 1e-12) throw OracleFailure("shooting_eigenvalue_1d: no positive bracket above 1e-12");
  }
  if (hi > 2.0 * lo) hi = 2.0 * lo;
  for (int it = 0; it < 400 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shoot(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace anisokpp
