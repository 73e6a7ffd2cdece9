#include "bcam/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "bcam/copula.hpp"
#include "bcam/dual.hpp"
#include "bcam/errors.hpp"
#include "bcam/special.hpp"

namespace bcam {

namespace {

// log(1 + e^x) without overflow.
template <class T>
T softplus(const T& x) {
  using std::exp;
  using std::log1p;
  if (value(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

template <class T>
T cdf_kernel(MarginFamily f, double y, const T& mu, const T& sigma, const T& nu) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  using std::sqrt;
  switch (f) {
    case MarginFamily::BE: {
      const T s2 = sigma * sigma;
      const T a1 = mu * (1.0 - s2) / s2;
      const T a2 = (1.0 - mu) * (1.0 - s2) / s2;
      return beta_inc(a1, a2, T(y));
    }
    case MarginFamily::DAGUM: {
      const T lr = std::log(y) - log(mu);
      return exp(-nu * softplus(-sigma * lr));
    }
    case MarginFamily::GA: {
      const T s2 = sigma * sigma;
      return gamma_p(1.0 / s2, y / (mu * s2));
    }
    case MarginFamily::GU: return -expm1(-exp((y - mu) / sigma));
    case MarginFamily::iG: {
      const T root = sqrt(y * sigma * sigma);
      const T z1 = (y / mu - 1.0) / root;
      const T z2 = -(y / mu + 1.0) / root;
      return norm_cdf(z1) + exp(2.0 / (mu * sigma * sigma) + log_norm_cdf(z2));
    }
    case MarginFamily::LN: return norm_cdf((std::log(y) - mu) / sigma);
    case MarginFamily::LO: return 1.0 / (1.0 + exp(-(y - mu) / sigma));
    case MarginFamily::N: return norm_cdf((y - mu) / sigma);
    case MarginFamily::rGU: return exp(-exp(-(y - mu) / sigma));
    case MarginFamily::SM: {
      const T lr = std::log(y) - log(mu);
      return -expm1(-nu * softplus(sigma * lr));
    }
    case MarginFamily::WEI: {
      const T lr = std::log(y) - log(mu);
      return -expm1(-exp(sigma * lr));
    }
  }
  return T(0.0);
}

template <class T>
T logpdf_kernel(MarginFamily f, double y, const T& mu, const T& sigma, const T& nu) {
  using std::exp;
  using std::lgamma;
  using std::log;
  using std::log1p;
  switch (f) {
    case MarginFamily::BE: {
      const T s2 = sigma * sigma;
      const T a1 = mu * (1.0 - s2) / s2;
      const T a2 = (1.0 - mu) * (1.0 - s2) / s2;
      return (a1 - 1.0) * std::log(y) + (a2 - 1.0) * std::log1p(-y) -
             (lgamma(a1) + lgamma(a2) - lgamma(a1 + a2));
    }
    case MarginFamily::DAGUM: {
      const T lr = std::log(y) - log(mu);
      return log(sigma) + log(nu) - std::log(y) + sigma * nu * lr - (nu + 1.0) * softplus(sigma * lr);
    }
    case MarginFamily::GA: {
      const T s2 = sigma * sigma;
      const T a = 1.0 / s2;
      return -a * log(mu * s2) + (a - 1.0) * std::log(y) - y / (mu * s2) - lgamma(a);
    }
    case MarginFamily::GU: {
      const T z = (y - mu) / sigma;
      return -log(sigma) + z - exp(z);
    }
    case MarginFamily::iG: {
      const T s2 = sigma * sigma;
      return -0.5 * log(2.0 * kPi * s2) - 1.5 * std::log(y) - (y - mu) * (y - mu) / (2.0 * mu * mu * s2 * y);
    }
    case MarginFamily::LN: {
      const T z = (std::log(y) - mu) / sigma;
      return -std::log(y) - log(sigma) - kLogSqrt2Pi - 0.5 * z * z;
    }
    case MarginFamily::LO: {
      const T z = (y - mu) / sigma;
      return -log(sigma) - z - 2.0 * softplus(-z);
    }
    case MarginFamily::N: {
      const T z = (y - mu) / sigma;
      return -log(sigma) - kLogSqrt2Pi - 0.5 * z * z;
    }
    case MarginFamily::rGU: {
      const T z = (y - mu) / sigma;
      return -log(sigma) - z - exp(-z);
    }
    case MarginFamily::SM: {
      const T lr = std::log(y) - log(mu);
      return log(sigma) + log(nu) + (sigma - 1.0) * std::log(y) - sigma * log(mu) -
             (nu + 1.0) * softplus(sigma * lr);
    }
    case MarginFamily::WEI: {
      const T lr = std::log(y) - log(mu);
      return log(sigma) - log(mu) + (sigma - 1.0) * lr - exp(sigma * lr);
    }
  }
  return T(0.0);
}

enum class Support { unit, positive, real };

Support support_of(MarginFamily f) {
  switch (f) {
    case MarginFamily::BE: return Support::unit;
    case MarginFamily::GU:
    case MarginFamily::LO:
    case MarginFamily::N:
    case MarginFamily::rGU: return Support::real;
    default: return Support::positive;
  }
}

double gamma_fn(double x) { return std::tgamma(x); }

// Numerical inversion of the cdf on a bracket grown until it contains p.
double invert_cdf(MarginFamily f, double prob, const MarginParams& p) {
  auto g = [&](double y) { return margin_cdf(f, y, p) - prob; };
  double lo, hi;
  if (support_of(f) == Support::unit) {
    lo = 0.0;
    hi = 1.0;
  } else {
    const Moments m = margin_moments(f, p);
    double guess = (m.mean && *m.mean > 0.0) ? *m.mean : 1.0;
    lo = guess;
    hi = guess;
    while (g(lo) > 0.0 && lo > 1e-300) lo *= 0.5;
    while (g(hi) < 0.0 && hi < 1e300) hi *= 2.0;
    if (lo == hi) {
      if (g(lo) == 0.0) return lo;
      lo *= 0.5;
    }
  }
  boost::uintmax_t iters = 300;
  const auto r = boost::math::tools::toms748_solve(
      [&](double y) {
        if (y <= 0.0) return -prob;
        if (support_of(f) == Support::unit && y >= 1.0) return 1.0 - prob;
        return g(y);
      },
      lo, hi, boost::math::tools::eps_tolerance<double>(48), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

int n_params(MarginFamily f) {
  return (f == MarginFamily::DAGUM || f == MarginFamily::SM) ? 3 : 2;
}

const std::vector<MarginFamily>& all_margins() {
  static const std::vector<MarginFamily> all = {
      MarginFamily::BE, MarginFamily::DAGUM, MarginFamily::GA, MarginFamily::GU,
      MarginFamily::iG, MarginFamily::LN,    MarginFamily::LO, MarginFamily::N,
      MarginFamily::rGU, MarginFamily::SM,   MarginFamily::WEI};
  return all;
}

std::string margin_tag(MarginFamily f) {
  switch (f) {
    case MarginFamily::BE: return "BE";
    case MarginFamily::DAGUM: return "DAGUM";
    case MarginFamily::GA: return "GA";
    case MarginFamily::GU: return "GU";
    case MarginFamily::iG: return "iG";
    case MarginFamily::LN: return "LN";
    case MarginFamily::LO: return "LO";
    case MarginFamily::N: return "N";
    case MarginFamily::rGU: return "rGU";
    case MarginFamily::SM: return "SM";
    case MarginFamily::WEI: return "WEI";
  }
  return "?";
}

MarginFamily margin_from_tag(std::string_view tag) {
  for (MarginFamily f : all_margins())
    if (margin_tag(f) == tag) return f;
  std::ostringstream os;
  os << "unknown margin tag '" << tag << "'; valid tags:";
  for (MarginFamily f : all_margins()) os << ' ' << margin_tag(f);
  throw InputError(os.str());
}

LinkKind param_link(MarginFamily f, int which) {
  if (f == MarginFamily::BE) return LinkKind::logistic;
  if (which == 0) {
    switch (support_of(f)) {
      case Support::real: return LinkKind::identity;
      default: return LinkKind::log_shifted;
    }
  }
  return LinkKind::log_shifted;
}

double link_apply(LinkKind k, double eta) {
  switch (k) {
    case LinkKind::identity: return eta;
    case LinkKind::log_shifted: return std::exp(eta) + kLinkEpsilon;
    case LinkKind::logistic: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      return std::clamp(p, kLinkEpsilon, 1.0 - std::numeric_limits<double>::epsilon() / 2.0);
    }
  }
  return eta;
}

double link_inverse(LinkKind k, double param) {
  switch (k) {
    case LinkKind::identity: return param;
    case LinkKind::log_shifted:
      return std::log(std::max(param - kLinkEpsilon, std::numeric_limits<double>::min()));
    case LinkKind::logistic: return std::log(param) - std::log1p(-param);
  }
  return param;
}

double link_deriv(LinkKind k, double eta) {
  switch (k) {
    case LinkKind::identity: return 1.0;
    case LinkKind::log_shifted: return std::exp(eta);
    case LinkKind::logistic: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      return p * (1.0 - p);
    }
  }
  return 1.0;
}

bool in_support(MarginFamily f, double y) {
  if (!std::isfinite(y)) return false;
  switch (support_of(f)) {
    case Support::unit: return y > 0.0 && y < 1.0;
    case Support::positive: return y > 0.0;
    case Support::real: return true;
  }
  return false;
}

void check_support(MarginFamily f, double y) {
  if (in_support(f, y)) return;
  std::ostringstream os;
  os << margin_tag(f) << " margin: y = " << y << " outside support ";
  switch (support_of(f)) {
    case Support::unit: os << "(0, 1)"; break;
    case Support::positive: os << "(0, inf)"; break;
    case Support::real: os << "(-inf, inf)"; break;
  }
  throw DomainError(os.str());
}

void check_params(MarginFamily f, const MarginParams& p) {
  auto fail = [&](const char* what) {
    std::ostringstream os;
    os << margin_tag(f) << " margin: " << what << " (mu=" << p.mu << ", sigma=" << p.sigma;
    if (n_params(f) == 3) os << ", nu=" << p.nu;
    os << ")";
    throw DomainError(os.str());
  };
  if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || (n_params(f) == 3 && !std::isfinite(p.nu)))
    fail("parameters must be finite");
  if (!(p.sigma > 0.0)) fail("requires sigma > 0");
  if (n_params(f) == 3 && !(p.nu > 0.0)) fail("requires nu > 0");
  if (f == MarginFamily::BE) {
    if (!(p.mu > 0.0 && p.mu < 1.0)) fail("requires 0 < mu < 1");
    if (!(p.sigma < 1.0)) fail("requires 0 < sigma < 1");
  } else if (support_of(f) == Support::positive && !(p.mu > 0.0)) {
    fail("requires mu > 0");
  }
}

double margin_cdf(MarginFamily f, double y, const MarginParams& p) {
  check_params(f, p);
  check_support(f, y);
  return std::clamp(cdf_kernel<double>(f, y, p.mu, p.sigma, p.nu), 0.0, 1.0);
}

double margin_logpdf(MarginFamily f, double y, const MarginParams& p) {
  check_params(f, p);
  check_support(f, y);
  return logpdf_kernel<double>(f, y, p.mu, p.sigma, p.nu);
}

double margin_pdf(MarginFamily f, double y, const MarginParams& p) {
  return std::exp(margin_logpdf(f, y, p));
}

double margin_quantile(MarginFamily f, double prob, const MarginParams& p) {
  check_params(f, p);
  if (!(prob > 0.0 && prob < 1.0)) {
    std::ostringstream os;
    os << margin_tag(f) << " quantile: probability " << prob << " outside (0, 1)";
    throw DomainError(os.str());
  }
  const double mu = p.mu, s = p.sigma, nu = p.nu;
  switch (f) {
    case MarginFamily::N: return mu + s * norm_quantile(prob);
    case MarginFamily::LN: return std::exp(mu + s * norm_quantile(prob));
    case MarginFamily::LO: return mu + s * (std::log(prob) - std::log1p(-prob));
    case MarginFamily::GU: return mu + s * std::log(-std::log1p(-prob));
    case MarginFamily::rGU: return mu - s * std::log(-std::log(prob));
    case MarginFamily::WEI: return mu * std::pow(-std::log1p(-prob), 1.0 / s);
    case MarginFamily::DAGUM: return mu * std::pow(std::expm1(-std::log(prob) / nu), -1.0 / s);
    case MarginFamily::SM: return mu * std::pow(std::expm1(-std::log1p(-prob) / nu), 1.0 / s);
    case MarginFamily::BE:
    case MarginFamily::GA:
    case MarginFamily::iG: return invert_cdf(f, prob, p);
  }
  return 0.0;
}

Moments margin_moments(MarginFamily f, const MarginParams& p) {
  check_params(f, p);
  const double mu = p.mu, s = p.sigma, nu = p.nu;
  Moments m;
  switch (f) {
    case MarginFamily::BE:
      m.mean = mu;
      m.variance = s * s * mu * (1.0 - mu);
      break;
    case MarginFamily::DAGUM: {
      // E Y^k = mu^k Gamma(1 - k/s) Gamma(nu + k/s) / Gamma(nu), k < s.
      if (s > 1.0) {
        const double g1 = -gamma_fn(-1.0 / s) * gamma_fn(1.0 / s + nu) / gamma_fn(nu);
        m.mean = mu / s * g1;
        if (s > 2.0) {
          const double g2 = gamma_fn(-2.0 / s) * gamma_fn(2.0 / s + nu) / gamma_fn(nu);
          const double h1 = gamma_fn(-1.0 / s) * gamma_fn(1.0 / s + nu) / gamma_fn(nu);
          m.variance = -(mu / s) * (mu / s) * (2.0 * s * g2 + h1 * h1);
        }
      }
      break;
    }
    case MarginFamily::GA:
      m.mean = mu;
      m.variance = mu * mu * s * s;
      break;
    case MarginFamily::GU:
      m.mean = mu - kEulerGamma * s;
      m.variance = kPi * kPi * s * s / 6.0;
      break;
    case MarginFamily::iG:
      m.mean = mu;
      m.variance = mu * mu * mu * s * s;
      break;
    case MarginFamily::LN:
      m.mean = std::sqrt(std::exp(s * s)) * std::exp(mu);
      m.variance = std::exp(s * s) * std::expm1(s * s) * std::exp(2.0 * mu);
      break;
    case MarginFamily::LO:
      m.mean = mu;
      m.variance = kPi * kPi * s * s / 3.0;
      break;
    case MarginFamily::N:
      m.mean = mu;
      m.variance = s * s;
      break;
    case MarginFamily::rGU:
      m.mean = mu + kEulerGamma * s;
      m.variance = kPi * kPi * s * s / 6.0;
      break;
    case MarginFamily::SM: {
      // E Y^k = mu^k Gamma(1 + k/s) Gamma(nu - k/s) / Gamma(nu), k < s nu.
      if (s * nu > 1.0) {
        const double e1 = gamma_fn(1.0 + 1.0 / s) * gamma_fn(nu - 1.0 / s) / gamma_fn(nu);
        m.mean = mu * e1;
        if (s * nu > 2.0) {
          const double e2 = gamma_fn(1.0 + 2.0 / s) * gamma_fn(nu - 2.0 / s) / gamma_fn(nu);
          m.variance = mu * mu * (e2 - e1 * e1);
        }
      }
      break;
    }
    case MarginFamily::WEI: {
      const double g1 = gamma_fn(1.0 / s + 1.0);
      m.mean = mu * g1;
      m.variance = mu * mu * (gamma_fn(2.0 / s + 1.0) - g1 * g1);
      break;
    }
  }
  return m;
}

MarginDerivs margin_derivs_unchecked(MarginFamily f, double y, const MarginParams& p) {
  using D = Dual<3>;
  const D mu = D::variable(p.mu, 0);
  const D sigma = D::variable(p.sigma, 1);
  const D nu = n_params(f) == 3 ? D::variable(p.nu, 2) : D(p.nu);
  const D cdf = cdf_kernel(f, y, mu, sigma, nu);
  const D lp = logpdf_kernel(f, y, mu, sigma, nu);
  MarginDerivs out;
  out.cdf = cdf.v;
  out.logpdf = lp.v;
  out.dcdf = cdf.d;
  out.dlogpdf = lp.d;
  return out;
}

MarginDerivs margin_derivs(MarginFamily f, double y, const MarginParams& p) {
  check_params(f, p);
  check_support(f, y);
  return margin_derivs_unchecked(f, y, p);
}

std::array<double, 3> margin_cdf_derivs(MarginFamily f, double y, const MarginParams& p) {
  return margin_derivs(f, y, p).dcdf;
}

std::array<double, 3> margin_logpdf_derivs(MarginFamily f, double y, const MarginParams& p) {
  return margin_derivs(f, y, p).dlogpdf;
}

std::vector<double> margin_sample(MarginFamily f, const MarginParams& p, std::size_t n, Rng& rng) {
  check_params(f, p);
  std::vector<double> out(n);
  for (auto& y : out) y = margin_quantile(f, uniform01(rng), p);
  return out;
}

}  // namespace bcam
