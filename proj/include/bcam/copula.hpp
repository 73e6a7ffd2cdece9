#pragma once

// One-parameter bivariate copulas: cdfs, densities, rotations, parameter
// links, Kendall's tau conversions and the partial derivatives required by
// the likelihood score.

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace bcam {

enum class CopulaFamily { AMH, Clayton, FGM, Frank, Gaussian, Gumbel, Joe };

enum class Rotation : int { deg0 = 0, deg90 = 90, deg180 = 180, deg270 = 270 };

/// Boundary guard used by the parameter links: smallest positive normal
/// double times 1e6.
inline constexpr double kLinkEpsilon = std::numeric_limits<double>::min() * 1e6;

/// Probabilities handed to a copula are clamped into [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-12;

/// Correlation-type links (tanh) keep |theta| <= 1 - kTanhGuard.
inline constexpr double kTanhGuard = 1e-10;

struct ThetaRange {
  double lower;
  double upper;
  bool lower_closed;
  bool upper_closed;
  bool excludes_zero = false;

  bool contains(double theta) const;
};

class CopulaSpec {
 public:
  CopulaFamily family = CopulaFamily::Gaussian;
  Rotation rotation = Rotation::deg0;
  double epsilon = kLinkEpsilon;

  CopulaSpec() = default;
  CopulaSpec(CopulaFamily f, Rotation r = Rotation::deg0);

  /// Parses "AMH", "C0", "C90", ..., "N", "J270". Throws InputError listing
  /// the valid tags.
  static CopulaSpec from_tag(std::string_view tag);
  static const std::vector<std::string>& all_tags();

  std::string tag() const;

  /// 90 and 270 degree rotations model negative dependence; their theta is
  /// reported with a negative sign.
  bool negative_rotation() const;

  ThetaRange theta_range() const;

  /// Throws DomainError naming the family and range when theta is invalid.
  void check_theta(double theta) const;

  bool operator==(const CopulaSpec& o) const {
    return family == o.family && rotation == o.rotation;
  }
};

struct CopulaDerivs {
  double cdf = 0.0;
  double dC_du = 0.0;
  double dC_dv = 0.0;
  double dC_dtheta = 0.0;
  double density = 0.0;
  double log_density = 0.0;
  double dlogc_du = 0.0;
  double dlogc_dv = 0.0;
  double dlogc_dtheta = 0.0;
  double dc_du = 0.0;
  double dc_dv = 0.0;
  double dc_dtheta = 0.0;
};

/// log c and its gradient in (u, v, theta); the hot path of the likelihood.
struct LogDensityGrad {
  double value = 0.0;
  double du = 0.0;
  double dv = 0.0;
  double dtheta = 0.0;
};

double clamp_prob(double p);

double copula_cdf(const CopulaSpec& spec, double u, double v, double theta);
double copula_density(const CopulaSpec& spec, double u, double v, double theta);
double copula_log_density(const CopulaSpec& spec, double u, double v, double theta);
CopulaDerivs copula_derivs(const CopulaSpec& spec, double u, double v, double theta);

/// Unchecked fast path (theta assumed valid, u and v clamped by the caller).
LogDensityGrad copula_log_density_grad(const CopulaSpec& spec, double u, double v, double theta);

/// h-function dC/du(u, v), the conditional cdf of V given U = u.
double copula_h(const CopulaSpec& spec, double u, double v, double theta);

double theta_to_tau(const CopulaSpec& spec, double theta);

/// Inverse of theta_to_tau. Targets outside the attainable range are
/// pulled to just inside the boundary.
double tau_to_theta(const CopulaSpec& spec, double tau);

/// Range of Kendall's tau the family/rotation can reach.
std::pair<double, double> attainable_tau(const CopulaSpec& spec);

double theta_link(const CopulaSpec& spec, double eta);
double theta_link_inv(const CopulaSpec& spec, double theta);
double theta_link_deriv(const CopulaSpec& spec, double eta);

/// Debye-type integrals entering the Frank and Joe tau maps.
double debye1(double theta);
double joe_tau_integral(double theta);

}  // namespace bcam
