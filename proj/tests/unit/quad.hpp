#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bcam::test {

// Adaptive 1-D integral over [a, b].
template <class F>
double integrate(F f, double a, double b, double tol = 1e-11) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol);
}

// Iterated adaptive integral over [a1, b1] x [a2, b2].
template <class F>
double integrate2d(F f, double a1, double b1, double a2, double b2, double tol = 1e-10) {
  auto outer = [&](double x) {
    return integrate([&](double y) { return f(x, y); }, a2, b2, tol);
  };
  return integrate(outer, a1, b1, tol);
}

}  // namespace bcam::test

#include "bcam/special.hpp"

namespace bcam::test {

// Integral of a density on the unit square after the normal-score change of
// variables u = Phi(s), v = Phi(t), which flattens corner peaks.
template <class F>
double integrate_unit_square(F c, double tol = 1e-9) {
  auto inner = [&](double s) {
    const double u = norm_cdf(s);
    const double ws = norm_pdf(s);
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double t) { return c(u, norm_cdf(t)) * ws * norm_pdf(t); }, -8.5, 8.5, 15, tol);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, -8.5, 8.5, 15, tol);
}

}  // namespace bcam::test
