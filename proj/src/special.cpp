#include "bcam/special.hpp"

#include <algorithm>
#include <array>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace bcam {

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p must lie in [0, 1]");
  }
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

// Genz's adaptation of the Drezner-Wesolowsky method for the upper
// orthant probability P(X > h, Y > k) with correlation r.
template <int Points>
double bvn_upper_impl(double h, double k, double r) {
  using Rule = boost::math::quadrature::gauss<double, Points>;
  const auto& xs = Rule::abscissa();
  const auto& ws = Rule::weights();
  constexpr double two_pi = 2.0 * kPi;

  double hk = h * k;
  double bvn = 0.0;
  if (std::fabs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      // Boost stores the non-negative half of a symmetric rule; the zero
      // node (odd rules only) carries its full weight once.
      const double w = (xs[i] == 0.0) ? ws[i] / 2.0 : ws[i];
      for (double sgn : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sgn * xs[i]) / 2.0);
        bvn += w * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::fabs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double w = (xs[i] == 0.0) ? ws[i] / 2.0 : ws[i];
      for (double sgn : {-1.0, 1.0}) {
        double xsq = a * (sgn * xs[i] + 1.0);
        xsq *= xsq;
        const double rs = std::sqrt(1.0 - xsq);
        bvn += a * w *
               (std::exp(-bs / (2.0 * xsq) - hk / (1.0 + rs)) / rs -
                std::exp(-(bs / xsq + hk) / 2.0) * (1.0 + c * xsq * (1.0 + d * xsq)));
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) {
    bvn += norm_cdf(-std::max(h, k));
  } else {
    bvn = -bvn;
    if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
  }
  return bvn;
}

}  // namespace

double bivariate_norm_cdf(double x, double y, double rho) {
  if (std::isinf(x) || std::isinf(y)) {
    if (x == -std::numeric_limits<double>::infinity() ||
        y == -std::numeric_limits<double>::infinity())
      return 0.0;
    if (std::isinf(x)) return norm_cdf(y);
    return norm_cdf(x);
  }
  const double ar = std::fabs(rho);
  double p;
  if (ar < 0.3)
    p = bvn_upper_impl<6>(-x, -y, rho);
  else if (ar < 0.75)
    p = bvn_upper_impl<12>(-x, -y, rho);
  else
    p = bvn_upper_impl<20>(-x, -y, rho);
  return std::clamp(p, 0.0, std::min(norm_cdf(x), norm_cdf(y)));
}

}  // namespace bcam
