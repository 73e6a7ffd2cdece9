#pragma once

// Forward-mode dual numbers used to obtain exact first derivatives of the
// templated copula and margin kernels.

#include <array>
#include <cmath>
#include <cstddef>

#include <boost/math/special_functions/digamma.hpp>

namespace bcam {

template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit constant lift

  static Dual variable(double value, std::size_t slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
};

// Apply a scalar function with known derivative: f(x), f'(x).
template <std::size_t N>
inline Dual<N> chain(const Dual<N>& x, double fx, double dfx) {
  Dual<N> r(fx);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = dfx * x.d[i];
  return r;
}

template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N>
inline Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N>
inline Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <std::size_t N>
inline Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N>
inline Dual<N> operator+(double a, Dual<N> b) { b.v += a; return b; }
template <std::size_t N>
inline Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N>
inline Dual<N> operator-(double a, const Dual<N>& b) {
  Dual<N> r(a - b.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = -b.d[i];
  return r;
}
template <std::size_t N>
inline Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <std::size_t N>
inline Dual<N> operator*(double a, Dual<N> b) { return b * a; }
template <std::size_t N>
inline Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N>
inline Dual<N> operator/(double a, const Dual<N>& b) {
  const double q = a / b.v;
  return chain(b, q, -q / b.v);
}
template <std::size_t N>
inline Dual<N> operator-(const Dual<N>& a) { return 0.0 - a; }

template <std::size_t N>
inline bool operator<(const Dual<N>& a, const Dual<N>& b) { return a.v < b.v; }
template <std::size_t N>
inline bool operator>(const Dual<N>& a, const Dual<N>& b) { return a.v > b.v; }
template <std::size_t N>
inline bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <std::size_t N>
inline bool operator>(const Dual<N>& a, double b) { return a.v > b; }
template <std::size_t N>
inline bool operator<=(const Dual<N>& a, double b) { return a.v <= b; }
template <std::size_t N>
inline bool operator>=(const Dual<N>& a, double b) { return a.v >= b; }

inline double value(double x) { return x; }
template <std::size_t N>
inline double value(const Dual<N>& x) { return x.v; }

template <std::size_t N>
inline Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return chain(x, e, e);
}
template <std::size_t N>
inline Dual<N> expm1(const Dual<N>& x) {
  return chain(x, std::expm1(x.v), std::exp(x.v));
}
template <std::size_t N>
inline Dual<N> log(const Dual<N>& x) {
  return chain(x, std::log(x.v), 1.0 / x.v);
}
template <std::size_t N>
inline Dual<N> log1p(const Dual<N>& x) {
  return chain(x, std::log1p(x.v), 1.0 / (1.0 + x.v));
}
template <std::size_t N>
inline Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.v);
  return chain(x, s, 0.5 / s);
}
template <std::size_t N>
inline Dual<N> pow(const Dual<N>& x, double p) {
  const double r = std::pow(x.v, p);
  return chain(x, r, p * std::pow(x.v, p - 1.0));
}
template <std::size_t N>
inline Dual<N> pow(const Dual<N>& x, const Dual<N>& p) {
  return exp(p * log(x));
}
template <std::size_t N>
inline Dual<N> pow(double x, const Dual<N>& p) {
  const double r = std::pow(x, p.v);
  return chain(p, r, r * std::log(x));
}
template <std::size_t N>
inline Dual<N> tanh(const Dual<N>& x) {
  const double t = std::tanh(x.v);
  return chain(x, t, 1.0 - t * t);
}
template <std::size_t N>
inline Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}
template <std::size_t N>
inline Dual<N> lgamma(const Dual<N>& x) {
  return chain(x, std::lgamma(x.v), boost::math::digamma(x.v));
}
template <std::size_t N>
inline Dual<N> erfc(const Dual<N>& x) {
  constexpr double two_over_sqrt_pi = 1.1283791670955126;
  return chain(x, std::erfc(x.v), -two_over_sqrt_pi * std::exp(-x.v * x.v));
}

}  // namespace bcam
