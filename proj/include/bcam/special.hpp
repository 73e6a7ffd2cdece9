#pragma once

// Special functions shared by the margins and copulas. The incomplete gamma
// and beta ratios are templated so that dual numbers propagate parameter
// derivatives through the series and continued-fraction evaluations.

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bcam/dual.hpp"

namespace bcam {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kEulerGamma = 0.57721566490153286061;

namespace detail {

inline constexpr double kSeriesTol = 1e-15;
inline constexpr int kMaxIter = 20000;
inline constexpr double kTiny = 1e-300;

inline bool small_relative(double term, double sum) {
  return std::fabs(term) <= kSeriesTol * std::fabs(sum);
}

template <std::size_t N>
inline bool small_relative(const Dual<N>& term, const Dual<N>& sum) {
  if (!small_relative(term.v, sum.v)) return false;
  for (std::size_t i = 0; i < N; ++i) {
    if (std::fabs(term.d[i]) > kSeriesTol * (std::fabs(sum.d[i]) + std::fabs(sum.v)))
      return false;
  }
  return true;
}

// |x - 1| small, used by the Lentz iterations where the factor tends to 1.
inline bool near_one(double delta) { return std::fabs(delta - 1.0) <= kSeriesTol; }

template <std::size_t N>
inline bool near_one(const Dual<N>& delta) {
  if (!near_one(delta.v)) return false;
  for (std::size_t i = 0; i < N; ++i)
    if (std::fabs(delta.d[i]) > kSeriesTol) return false;
  return true;
}

template <class T>
T guard_tiny(T x) {
  using std::fabs;
  if (std::fabs(value(x)) < kTiny) return T(kTiny);
  return x;
}

// Series for P(a, x), valid and fast for x < a + 1.
template <class T>
T gamma_p_series(const T& a, const T& x) {
  using std::exp;
  using std::log;
  using std::lgamma;
  T ap = a;
  T term = 1.0 / a;
  T sum = term;
  for (int it = 0; it < kMaxIter; ++it) {
    ap = ap + 1.0;
    term = term * x / ap;
    sum = sum + term;
    if (small_relative(term, sum)) break;
  }
  return sum * exp(a * log(x) - x - lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1 (modified Lentz).
template <class T>
T gamma_q_fraction(const T& a, const T& x) {
  using std::exp;
  using std::log;
  using std::lgamma;
  T b = x + 1.0 - a;
  T c = T(1.0 / kTiny);
  T d = 1.0 / b;
  T h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const T an = -double(i) * (double(i) - a);
    b = b + 2.0;
    d = guard_tiny(an * d + b);
    c = guard_tiny(b + an / c);
    d = 1.0 / d;
    const T delta = d * c;
    h = h * delta;
    if (near_one(delta)) break;
  }
  return exp(a * log(x) - x - lgamma(a)) * h;
}

// Continued fraction for the incomplete beta ratio (modified Lentz).
template <class T>
T beta_fraction(const T& a, const T& b, const T& x) {
  const T qab = a + b;
  const T qap = a + 1.0;
  const T qam = a - 1.0;
  T c = 1.0;
  T d = guard_tiny(1.0 - qab * x / qap);
  d = 1.0 / d;
  T h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const double md = m;
    const T m2 = 2.0 * md;
    T aa = md * (b - md) * x / ((qam + m2) * (a + m2));
    d = guard_tiny(1.0 + aa * d);
    c = guard_tiny(1.0 + aa / c);
    d = 1.0 / d;
    h = h * d * c;
    aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
    d = guard_tiny(1.0 + aa * d);
    c = guard_tiny(1.0 + aa / c);
    d = 1.0 / d;
    const T delta = d * c;
    h = h * delta;
    if (near_one(delta)) break;
  }
  return h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
template <class T>
T gamma_p(const T& a, const T& x) {
  if (!(value(a) > 0.0) || value(x) < 0.0)
    throw std::domain_error("gamma_p: requires a > 0 and x >= 0");
  if (value(x) == 0.0) return T(0.0);
  if (value(x) < value(a) + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
template <class T>
T gamma_q(const T& a, const T& x) {
  if (!(value(a) > 0.0) || value(x) < 0.0)
    throw std::domain_error("gamma_q: requires a > 0 and x >= 0");
  if (value(x) == 0.0) return T(1.0);
  if (value(x) < value(a) + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

/// Regularized incomplete beta I_x(a, b).
template <class T>
T beta_inc(const T& a, const T& b, const T& x) {
  using std::exp;
  using std::log;
  using std::log1p;
  using std::lgamma;
  if (!(value(a) > 0.0) || !(value(b) > 0.0))
    throw std::domain_error("beta_inc: requires a > 0 and b > 0");
  if (value(x) < 0.0 || value(x) > 1.0)
    throw std::domain_error("beta_inc: requires 0 <= x <= 1");
  if (value(x) == 0.0) return T(0.0);
  if (value(x) == 1.0) return T(1.0);
  const T front = exp(lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x));
  if (value(x) < (value(a) + 1.0) / (value(a) + value(b) + 2.0))
    return front * detail::beta_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_fraction(b, a, 1.0 - x) / b;
}

// --- standard normal ------------------------------------------------------

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

template <std::size_t N>
inline Dual<N> norm_cdf(const Dual<N>& x) {
  return chain(x, norm_cdf(x.v), norm_pdf(x.v));
}

/// log Phi(x), accurate far into the lower tail.
inline double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(norm_cdf(x));
  // Asymptotic expansion of the Mills ratio.
  const double z2 = 1.0 / (x * x);
  const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
  return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

template <std::size_t N>
inline Dual<N> log_norm_cdf(const Dual<N>& x) {
  const double l = log_norm_cdf(x.v);
  return chain(x, l, std::exp(-0.5 * x.v * x.v - kLogSqrt2Pi - l));
}

/// Standard normal quantile.
double norm_quantile(double p);

template <std::size_t N>
inline Dual<N> norm_quantile(const Dual<N>& p) {
  const double q = norm_quantile(p.v);
  return chain(p, q, 1.0 / norm_pdf(q));
}

/// Phi_2(x, y; rho): standard bivariate normal cdf.
double bivariate_norm_cdf(double x, double y, double rho);

/// Standard bivariate normal density.
inline double bivariate_norm_pdf(double x, double y, double rho) {
  const double s = 1.0 - rho * rho;
  return std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s)) / (2.0 * kPi * std::sqrt(s));
}

}  // namespace bcam
