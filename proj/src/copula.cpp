#include "bcam/copula.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "bcam/dual.hpp"
#include "bcam/errors.hpp"
#include "bcam/special.hpp"

namespace bcam {

namespace {

const char* family_name(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::AMH: return "AMH";
    case CopulaFamily::Clayton: return "Clayton";
    case CopulaFamily::FGM: return "FGM";
    case CopulaFamily::Frank: return "Frank";
    case CopulaFamily::Gaussian: return "Gaussian";
    case CopulaFamily::Gumbel: return "Gumbel";
    case CopulaFamily::Joe: return "Joe";
  }
  return "?";
}

bool rotatable(CopulaFamily f) {
  return f == CopulaFamily::Clayton || f == CopulaFamily::Gumbel || f == CopulaFamily::Joe;
}

ThetaRange base_range(CopulaFamily f) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (f) {
    case CopulaFamily::AMH:
    case CopulaFamily::FGM:
    case CopulaFamily::Gaussian: return {-1.0, 1.0, true, true};
    case CopulaFamily::Clayton: return {0.0, inf, false, false};
    case CopulaFamily::Frank: return {-inf, inf, false, false, true};
    case CopulaFamily::Gumbel: return {1.0, inf, true, false};
    case CopulaFamily::Joe: return {1.0, inf, false, false};
  }
  return {-inf, inf, false, false};
}

// log(e^a + e^b - 1) for a, b >= 0 without overflow or cancellation.
template <class T>
T log_sum_exp_m1(const T& a, const T& b) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  const double m = std::max(value(a), value(b));
  if (m < 30.0) return log1p(expm1(a) + expm1(b));
  const T mm = value(a) >= value(b) ? a : b;
  return mm + log(exp(a - mm) + exp(b - mm) - exp(-mm));
}

template <class T>
T log_sum_exp(const T& a, const T& b) {
  using std::exp;
  using std::log1p;
  const T hi = value(a) >= value(b) ? a : b;
  const T lo = value(a) >= value(b) ? b : a;
  return hi + log1p(exp(lo - hi));
}

// --- unrotated kernels -------------------------------------------------------

template <class T>
T gaussian_cdf(const T& u, const T& v, const T& rho);

template <>
double gaussian_cdf<double>(const double& u, const double& v, const double& rho) {
  return bivariate_norm_cdf(norm_quantile(u), norm_quantile(v), rho);
}

template <class T>
T gaussian_cdf(const T& u, const T& v, const T& rho) {
  const T x = norm_quantile(u);
  const T y = norm_quantile(v);
  const double s = std::sqrt(1.0 - rho.v * rho.v);
  const double dx = norm_pdf(x.v) * norm_cdf((y.v - rho.v * x.v) / s);
  const double dy = norm_pdf(y.v) * norm_cdf((x.v - rho.v * y.v) / s);
  const double dr = bivariate_norm_pdf(x.v, y.v, rho.v);
  T out(bivariate_norm_cdf(x.v, y.v, rho.v));
  for (std::size_t i = 0; i < out.d.size(); ++i)
    out.d[i] = dx * x.d[i] + dy * y.d[i] + dr * rho.d[i];
  return out;
}

template <class T>
T base_cdf(CopulaFamily f, const T& u, const T& v, const T& th) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  switch (f) {
    case CopulaFamily::AMH:
      return u * v / (1.0 - th * (1.0 - u) * (1.0 - v));
    case CopulaFamily::Clayton: {
      const T lsum = log_sum_exp_m1(-th * log(u), -th * log(v));
      return exp(-lsum / th);
    }
    case CopulaFamily::FGM:
      return u * v * (1.0 + th * (1.0 - u) * (1.0 - v));
    case CopulaFamily::Frank: {
      // Scaled by theta so the expression stays finite as theta -> 0.
      const T a = -expm1(-th) / th;
      const T p = -expm1(-th * u) / th;
      const T q = -expm1(-th * v) / th;
      return -log1p(-th * p * q / a) / th;
    }
    case CopulaFamily::Gaussian:
      return gaussian_cdf(u, v, th);
    case CopulaFamily::Gumbel: {
      const T lx = log(-log(u));
      const T ly = log(-log(v));
      const T ls = log_sum_exp(th * lx, th * ly);
      return exp(-exp(ls / th));
    }
    case CopulaFamily::Joe: {
      // S = x + y - xy with x = (1-u)^theta; summed directly so that it keeps
      // full precision in the upper corner where x, y -> 0.
      const T x = exp(th * log1p(-u));
      const T y = exp(th * log1p(-v));
      const T ls = log(x + y * (1.0 - x));
      return -expm1(ls / th);
    }
  }
  return T(0.0);
}

template <class T>
T base_log_density(CopulaFamily f, const T& u, const T& v, const T& th) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  switch (f) {
    case CopulaFamily::AMH: {
      const T ub = 1.0 - u;
      const T vb = 1.0 - v;
      const T num = 1.0 + th * ((1.0 + u) * (1.0 + v) - 3.0) + th * th * ub * vb;
      return log(num) - 3.0 * log(1.0 - th * ub * vb);
    }
    case CopulaFamily::Clayton: {
      const T lu = log(u);
      const T lv = log(v);
      const T lsum = log_sum_exp_m1(-th * lu, -th * lv);
      return log1p(th) - (1.0 + th) * (lu + lv) - (1.0 / th + 2.0) * lsum;
    }
    case CopulaFamily::FGM:
      return log1p(th * (1.0 - 2.0 * u) * (1.0 - 2.0 * v));
    case CopulaFamily::Frank: {
      const T a = -expm1(-th) / th;
      const T p = -expm1(-th * u) / th;
      const T q = -expm1(-th * v) / th;
      return log(a) - th * (u + v) - 2.0 * log(a - th * p * q);
    }
    case CopulaFamily::Gaussian: {
      const T x = norm_quantile(u);
      const T y = norm_quantile(v);
      const T s = 1.0 - th * th;
      return -0.5 * log(s) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * s);
    }
    case CopulaFamily::Gumbel: {
      const T lu = log(u);
      const T lv = log(v);
      const T lx = log(-lu);
      const T ly = log(-lv);
      const T ls = log_sum_exp(th * lx, th * ly);
      const T big_a = exp(ls / th);
      return -big_a - lu - lv + (th - 1.0) * (lx + ly) + (1.0 / th - 2.0) * ls +
             log(big_a + th - 1.0);
    }
    case CopulaFamily::Joe: {
      const T lub = log1p(-u);
      const T lvb = log1p(-v);
      const T x = exp(th * lub);
      const T y = exp(th * lvb);
      const T ls = log(x + y * (1.0 - x));
      return (1.0 / th - 2.0) * ls + (th - 1.0) * (lub + lvb) + log(th - 1.0 + exp(ls));
    }
  }
  return T(0.0);
}

// --- rotations ---------------------------------------------------------------

template <class T>
T rotated_cdf(const CopulaSpec& s, const T& u, const T& v, const T& th) {
  switch (s.rotation) {
    case Rotation::deg0: return base_cdf(s.family, u, v, th);
    case Rotation::deg90: return v - base_cdf(s.family, 1.0 - u, v, -th);
    case Rotation::deg180: return u + v - 1.0 + base_cdf(s.family, 1.0 - u, 1.0 - v, th);
    case Rotation::deg270: return u - base_cdf(s.family, u, 1.0 - v, -th);
  }
  return T(0.0);
}

template <class T>
T rotated_log_density(const CopulaSpec& s, const T& u, const T& v, const T& th) {
  switch (s.rotation) {
    case Rotation::deg0: return base_log_density(s.family, u, v, th);
    case Rotation::deg90: return base_log_density(s.family, 1.0 - u, v, -th);
    case Rotation::deg180: return base_log_density(s.family, 1.0 - u, 1.0 - v, th);
    case Rotation::deg270: return base_log_density(s.family, u, 1.0 - v, -th);
  }
  return T(0.0);
}

using D3 = Dual<3>;

std::string range_text(const ThetaRange& r) {
  std::ostringstream os;
  os << (r.lower_closed ? "[" : "(") << r.lower << ", " << r.upper << (r.upper_closed ? "]" : ")");
  if (r.excludes_zero) os << " excluding 0";
  return os.str();
}

double base_tau(CopulaFamily f, double th) {
  switch (f) {
    case CopulaFamily::AMH: {
      if (std::fabs(th) < 1e-4) {
        // Series of the closed form below; the direct formula cancels.
        return 2.0 * th / 9.0 + th * th / 18.0;
      }
      const double l = (th == 1.0) ? 0.0 : (1.0 - th) * (1.0 - th) * std::log1p(-th);
      return 1.0 - 2.0 * (th + l) / (3.0 * th * th);
    }
    case CopulaFamily::Clayton: return th / (th + 2.0);
    case CopulaFamily::FGM: return 2.0 * th / 9.0;
    case CopulaFamily::Frank: return 1.0 - 4.0 / th * (1.0 - debye1(th));
    case CopulaFamily::Gaussian: return 2.0 / kPi * std::asin(th);
    case CopulaFamily::Gumbel: return 1.0 - 1.0 / th;
    case CopulaFamily::Joe: return 1.0 + 4.0 / (th * th) * joe_tau_integral(th);
  }
  return 0.0;
}

}  // namespace

bool ThetaRange::contains(double theta) const {
  if (std::isnan(theta)) return false;
  if (excludes_zero && theta == 0.0) return false;
  const bool lo_ok = lower_closed ? theta >= lower : theta > lower;
  const bool hi_ok = upper_closed ? theta <= upper : theta < upper;
  return lo_ok && hi_ok;
}

CopulaSpec::CopulaSpec(CopulaFamily f, Rotation r) : family(f), rotation(r) {
  if (r != Rotation::deg0 && r != Rotation::deg180 && !rotatable(f))
    throw InputError(std::string("rotation by 90/270 degrees is only available for Clayton, Gumbel and Joe, not ") +
                     family_name(f));
  if (r == Rotation::deg180 && !rotatable(f))
    throw InputError(std::string("rotation is only available for Clayton, Gumbel and Joe, not ") +
                     family_name(f));
}

const std::vector<std::string>& CopulaSpec::all_tags() {
  static const std::vector<std::string> tags = {"AMH", "C0",   "C90", "C180", "C270", "FGM",
                                                "F",   "N",    "G0",  "G90",  "G180", "G270",
                                                "J0",  "J90",  "J180", "J270"};
  return tags;
}

CopulaSpec CopulaSpec::from_tag(std::string_view tag) {
  auto fail = [&]() -> CopulaSpec {
    std::ostringstream os;
    os << "unknown copula tag '" << tag << "'; valid tags:";
    for (const auto& t : all_tags()) os << ' ' << t;
    os << " (rotations 0, 90, 180, 270 apply to C, G and J)";
    throw InputError(os.str());
  };
  if (tag == "AMH") return {CopulaFamily::AMH};
  if (tag == "FGM") return {CopulaFamily::FGM};
  if (tag == "F") return {CopulaFamily::Frank};
  if (tag == "N") return {CopulaFamily::Gaussian};
  if (tag.size() < 2) return fail();
  CopulaFamily fam;
  switch (tag[0]) {
    case 'C': fam = CopulaFamily::Clayton; break;
    case 'G': fam = CopulaFamily::Gumbel; break;
    case 'J': fam = CopulaFamily::Joe; break;
    default: return fail();
  }
  const std::string_view deg = tag.substr(1);
  if (deg == "0") return {fam, Rotation::deg0};
  if (deg == "90") return {fam, Rotation::deg90};
  if (deg == "180") return {fam, Rotation::deg180};
  if (deg == "270") return {fam, Rotation::deg270};
  return fail();
}

std::string CopulaSpec::tag() const {
  switch (family) {
    case CopulaFamily::AMH: return "AMH";
    case CopulaFamily::FGM: return "FGM";
    case CopulaFamily::Frank: return "F";
    case CopulaFamily::Gaussian: return "N";
    default: break;
  }
  const char letter = family == CopulaFamily::Clayton ? 'C' : family == CopulaFamily::Gumbel ? 'G' : 'J';
  return letter + std::to_string(static_cast<int>(rotation));
}

bool CopulaSpec::negative_rotation() const {
  return rotation == Rotation::deg90 || rotation == Rotation::deg270;
}

ThetaRange CopulaSpec::theta_range() const {
  ThetaRange r = base_range(family);
  if (negative_rotation()) {
    return {-r.upper, -r.lower, r.upper_closed, r.lower_closed, r.excludes_zero};
  }
  return r;
}

void CopulaSpec::check_theta(double theta) const {
  const ThetaRange r = theta_range();
  if (!r.contains(theta)) {
    std::ostringstream os;
    os << family_name(family) << " copula (" << tag() << ") requires theta in " << range_text(r)
       << ", got " << theta;
    throw DomainError(os.str());
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double copula_cdf(const CopulaSpec& spec, double u, double v, double theta) {
  spec.check_theta(theta);
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw DomainError("copula_cdf: u and v must lie in [0, 1]");
  const double c = rotated_cdf(spec, clamp_prob(u), clamp_prob(v), theta);
  // Frechet-Hoeffding bounds absorb rounding at the clamped boundary.
  const double uu = clamp_prob(u), vv = clamp_prob(v);
  return std::clamp(c, std::max(uu + vv - 1.0, 0.0), std::min(uu, vv));
}

double copula_log_density(const CopulaSpec& spec, double u, double v, double theta) {
  spec.check_theta(theta);
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw DomainError("copula_density: u and v must lie in [0, 1]");
  return rotated_log_density(spec, clamp_prob(u), clamp_prob(v), theta);
}

double copula_density(const CopulaSpec& spec, double u, double v, double theta) {
  return std::exp(copula_log_density(spec, u, v, theta));
}

CopulaDerivs copula_derivs(const CopulaSpec& spec, double u, double v, double theta) {
  spec.check_theta(theta);
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw DomainError("copula_derivs: u and v must lie in [0, 1]");
  const D3 du = D3::variable(clamp_prob(u), 0);
  const D3 dv = D3::variable(clamp_prob(v), 1);
  const D3 dt = D3::variable(theta, 2);
  const D3 cdf = rotated_cdf(spec, du, dv, dt);
  const D3 lc = rotated_log_density(spec, du, dv, dt);
  CopulaDerivs out;
  out.cdf = cdf.v;
  out.dC_du = cdf.d[0];
  out.dC_dv = cdf.d[1];
  out.dC_dtheta = cdf.d[2];
  out.log_density = lc.v;
  out.density = std::exp(lc.v);
  out.dlogc_du = lc.d[0];
  out.dlogc_dv = lc.d[1];
  out.dlogc_dtheta = lc.d[2];
  out.dc_du = out.density * lc.d[0];
  out.dc_dv = out.density * lc.d[1];
  out.dc_dtheta = out.density * lc.d[2];
  return out;
}

LogDensityGrad copula_log_density_grad(const CopulaSpec& spec, double u, double v, double theta) {
  const D3 lc = rotated_log_density(spec, D3::variable(u, 0), D3::variable(v, 1), D3::variable(theta, 2));
  return {lc.v, lc.d[0], lc.d[1], lc.d[2]};
}

double copula_h(const CopulaSpec& spec, double u, double v, double theta) {
  using D1 = Dual<1>;
  const D1 c = rotated_cdf(spec, D1::variable(clamp_prob(u), 0), D1(clamp_prob(v)), D1(theta));
  return std::clamp(c.d[0], 0.0, 1.0);
}

double debye1(double theta) {
  if (theta == 0.0) return 1.0;
  auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const double a = std::min(0.0, theta), b = std::max(0.0, theta);
  double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
  if (theta < 0.0) integral = -integral;
  return integral / theta;
}

double joe_tau_integral(double theta) {
  const double e = 2.0 * (1.0 - theta) / theta;
  auto f = [e](double t, double tc) {
    const double one_minus_t = (t > 0.5 && tc > 0.0) ? tc : 1.0 - t;
    if (t <= 0.0 || one_minus_t <= 0.0) return 0.0;
    const double log_t = t > 0.5 ? std::log1p(-one_minus_t) : std::log(t);
    // t log t (1 - t)^e assembled in log space; the factor is singular at 1.
    return -std::exp(std::log(t) + std::log(-log_t) + e * std::log(one_minus_t));
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, 0.0, 1.0, 1e-12);
}

double theta_to_tau(const CopulaSpec& spec, double theta) {
  spec.check_theta(theta);
  if (spec.negative_rotation()) return -base_tau(spec.family, -theta);
  return base_tau(spec.family, theta);
}

std::pair<double, double> attainable_tau(const CopulaSpec& spec) {
  std::pair<double, double> base;
  switch (spec.family) {
    case CopulaFamily::AMH: base = {base_tau(CopulaFamily::AMH, -1.0), 1.0 / 3.0}; break;
    case CopulaFamily::FGM: base = {-2.0 / 9.0, 2.0 / 9.0}; break;
    case CopulaFamily::Frank:
    case CopulaFamily::Gaussian: base = {-1.0, 1.0}; break;
    default: base = {0.0, 1.0}; break;
  }
  if (spec.negative_rotation()) return {-base.second, -base.first};
  return base;
}

double tau_to_theta(const CopulaSpec& spec, double tau) {
  const bool neg = spec.negative_rotation();
  auto [lo, hi] = attainable_tau(CopulaSpec(spec.family));
  double t = neg ? -tau : tau;
  const double guard = 1e-6;
  t = std::clamp(t, lo + guard, hi - guard);
  double th = 0.0;
  auto solve = [&](double a, double b) {
    auto f = [&](double x) { return base_tau(spec.family, x) - t; };
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(f, a, b, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
  };
  switch (spec.family) {
    case CopulaFamily::AMH: th = solve(-1.0, 1.0); break;
    case CopulaFamily::Clayton: th = std::max(2.0 * t / (1.0 - t), 1e-8); break;
    case CopulaFamily::FGM: th = std::clamp(4.5 * t, -1.0, 1.0); break;
    case CopulaFamily::Frank:
      if (std::fabs(t) < 1e-10) {
        th = spec.epsilon;
      } else if (t > 0.0) {
        th = solve(1e-9, 2000.0);
      } else {
        th = solve(-2000.0, -1e-9);
      }
      break;
    case CopulaFamily::Gaussian: th = std::sin(kPi * t / 2.0); break;
    case CopulaFamily::Gumbel: th = std::max(1.0 / (1.0 - t), 1.0); break;
    case CopulaFamily::Joe: th = solve(1.0 + 1e-9, 5000.0); break;
  }
  return neg ? -th : th;
}

double theta_link(const CopulaSpec& spec, double eta) {
  const double sign = spec.negative_rotation() ? -1.0 : 1.0;
  switch (spec.family) {
    case CopulaFamily::AMH:
    case CopulaFamily::FGM:
    case CopulaFamily::Gaussian:
      return std::clamp(std::tanh(eta), -1.0 + kTanhGuard, 1.0 - kTanhGuard);
    case CopulaFamily::Clayton: return sign * (std::exp(eta) + spec.epsilon);
    case CopulaFamily::Frank:
      if (std::fabs(eta) < spec.epsilon) return eta < 0.0 ? -spec.epsilon : spec.epsilon;
      return eta;
    case CopulaFamily::Gumbel: return sign * (std::exp(eta) + 1.0);
    case CopulaFamily::Joe: return sign * (std::exp(eta) + 1.0 + spec.epsilon);
  }
  return eta;
}

double theta_link_inv(const CopulaSpec& spec, double theta) {
  const double t = spec.negative_rotation() ? -theta : theta;
  switch (spec.family) {
    case CopulaFamily::AMH:
    case CopulaFamily::FGM:
    case CopulaFamily::Gaussian:
      return std::atanh(std::clamp(t, -1.0 + kTanhGuard, 1.0 - kTanhGuard));
    case CopulaFamily::Clayton: return std::log(std::max(t - spec.epsilon, std::numeric_limits<double>::min()));
    case CopulaFamily::Frank: return theta;
    case CopulaFamily::Gumbel: return std::log(std::max(t - 1.0, std::numeric_limits<double>::min()));
    case CopulaFamily::Joe:
      return std::log(std::max(t - 1.0 - spec.epsilon, std::numeric_limits<double>::min()));
  }
  return theta;
}

double theta_link_deriv(const CopulaSpec& spec, double eta) {
  const double sign = spec.negative_rotation() ? -1.0 : 1.0;
  switch (spec.family) {
    case CopulaFamily::AMH:
    case CopulaFamily::FGM:
    case CopulaFamily::Gaussian: {
      const double t = std::tanh(eta);
      if (std::fabs(t) >= 1.0 - kTanhGuard) return 0.0;
      return 1.0 - t * t;
    }
    case CopulaFamily::Clayton:
    case CopulaFamily::Gumbel:
    case CopulaFamily::Joe: return sign * std::exp(eta);
    case CopulaFamily::Frank: return 1.0;
  }
  return 1.0;
}

}  // namespace bcam
