#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bcam/copula.hpp"
#include "bcam/errors.hpp"
#include "quad.hpp"

using namespace bcam;

namespace {

// Five in-range theta values per spec, covering weak to strong dependence.
std::vector<double> theta_grid(const CopulaSpec& s) {
  const double sign = s.negative_rotation() ? -1.0 : 1.0;
  switch (s.family) {
    case CopulaFamily::AMH: return {-0.9, -0.4, 0.2, 0.6, 0.95};
    case CopulaFamily::FGM: return {-0.9, -0.4, 0.1, 0.5, 0.95};
    case CopulaFamily::Gaussian: return {-0.8, -0.3, 0.1, 0.5, 0.85};
    case CopulaFamily::Frank: return {-8.0, -2.0, 0.5, 3.0, 10.0};
    case CopulaFamily::Clayton: return {sign * 0.3, sign * 1.0, sign * 2.0, sign * 4.0, sign * 7.0};
    case CopulaFamily::Gumbel: return {sign * 1.1, sign * 1.5, sign * 2.0, sign * 3.0, sign * 4.5};
    case CopulaFamily::Joe: return {sign * 1.2, sign * 1.8, sign * 2.5, sign * 4.0, sign * 6.0};
  }
  return {};
}

std::vector<CopulaSpec> all_specs() {
  std::vector<CopulaSpec> out;
  for (const auto& t : CopulaSpec::all_tags()) out.push_back(CopulaSpec::from_tag(t));
  return out;
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace

TEST(Copula, TagsRoundTrip) {
  EXPECT_EQ(CopulaSpec::all_tags().size(), 16u);
  for (const auto& t : CopulaSpec::all_tags()) EXPECT_EQ(CopulaSpec::from_tag(t).tag(), t);
  EXPECT_THROW(CopulaSpec::from_tag("J45"), InputError);
  try {
    CopulaSpec::from_tag("J45");
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("J270"), std::string::npos);
  }
  EXPECT_THROW(CopulaSpec(CopulaFamily::Frank, Rotation::deg90), InputError);
}

TEST(Copula, CdfExamples) {
  EXPECT_NEAR(copula_cdf(CopulaSpec::from_tag("FGM"), 0.3, 0.5, 0.0), 0.15, 1e-14);
  EXPECT_NEAR(copula_cdf(CopulaSpec::from_tag("C0"), 0.5, 0.5, 2.0), 1.0 / std::sqrt(7.0), 1e-12);
  for (const auto& s : all_specs()) {
    const double th = theta_grid(s)[2];
    EXPECT_NEAR(copula_cdf(s, 0.7, 1.0, th), 0.7, 1e-10) << s.tag();
  }
}

TEST(Copula, DensityIndependenceCases) {
  for (double u : {0.1, 0.4, 0.9})
    for (double v : {0.2, 0.5, 0.8}) {
      EXPECT_NEAR(copula_density(CopulaSpec::from_tag("FGM"), u, v, 0.0), 1.0, 1e-14);
      EXPECT_NEAR(copula_density(CopulaSpec::from_tag("N"), u, v, 0.0), 1.0, 1e-12);
    }
}

TEST(Copula, ClaytonDensityIntegratesToOne) {
  const auto s = CopulaSpec::from_tag("C0");
  const double total = test::integrate2d([&](double u, double v) { return copula_density(s, u, v, 2.0); },
                                         0.0, 1.0, 0.0, 1.0);
  EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(Copula, BoundaryIdentities) {
  for (const auto& s : all_specs()) {
    for (double th : theta_grid(s)) {
      for (int k = 1; k <= 20; ++k) {
        const double w = k / 21.0;
        EXPECT_NEAR(copula_cdf(s, w, 0.0, th), 0.0, 1e-10) << s.tag();
        EXPECT_NEAR(copula_cdf(s, 0.0, w, th), 0.0, 1e-10) << s.tag();
        EXPECT_NEAR(copula_cdf(s, w, 1.0, th), w, 1e-10) << s.tag();
        EXPECT_NEAR(copula_cdf(s, 1.0, w, th), w, 1e-10) << s.tag();
      }
    }
  }
}

TEST(Copula, FrechetBounds) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto specs = all_specs();
  for (int i = 0; i < 10000; ++i) {
    const auto& s = specs[i % specs.size()];
    const auto grid = theta_grid(s);
    const double th = grid[i % grid.size()];
    const double u = unif(rng), v = unif(rng);
    const double c = copula_cdf(s, u, v, th);
    EXPECT_GE(c, std::max(u + v - 1.0, 0.0) - 1e-15);
    EXPECT_LE(c, std::min(u, v) + 1e-15);
  }
}

TEST(Copula, DerivsBoundaryAndFgm) {
  for (const auto& s : all_specs()) {
    const auto d = copula_derivs(s, 0.35, 1.0, theta_grid(s)[3]);
    EXPECT_NEAR(d.dC_du, 1.0, 1e-8) << s.tag();
  }
  const auto fgm = CopulaSpec::from_tag("FGM");
  for (double u : {0.2, 0.7})
    for (double v : {0.3, 0.9}) {
      const auto d = copula_derivs(fgm, u, v, 0.0);
      EXPECT_NEAR(d.dC_dtheta, u * v * (1 - u) * (1 - v), 1e-14);
    }
}

TEST(Copula, FrankDensityThetaDerivative) {
  const auto s = CopulaSpec::from_tag("F");
  const double h = 1e-6;
  const double fd = (copula_density(s, 0.4, 0.6, 3.0 + h) - copula_density(s, 0.4, 0.6, 3.0 - h)) / (2 * h);
  const auto d = copula_derivs(s, 0.4, 0.6, 3.0);
  EXPECT_LT(std::fabs(d.dc_dtheta - fd) / std::fabs(fd), 1e-6);
}

TEST(Copula, PartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.03, 0.97);
  const auto specs = all_specs();
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const auto& s = specs[i % specs.size()];
    const auto grid = theta_grid(s);
    const double th = grid[(i / specs.size()) % grid.size()];
    const double u = unif(rng), v = unif(rng);
    const auto d = copula_derivs(s, u, v, th);
    auto C = [&](double a, double b, double t) { return copula_cdf(s, a, b, t); };
    auto c = [&](double a, double b, double t) { return copula_density(s, a, b, t); };
    const double th_h = h * std::max(1.0, std::fabs(th));
    EXPECT_LT(rel_err(d.dC_du, (C(u + h, v, th) - C(u - h, v, th)) / (2 * h)), 1e-5) << s.tag();
    EXPECT_LT(rel_err(d.dC_dv, (C(u, v + h, th) - C(u, v - h, th)) / (2 * h)), 1e-5) << s.tag();
    EXPECT_LT(rel_err(d.dC_dtheta, (C(u, v, th + th_h) - C(u, v, th - th_h)) / (2 * th_h)), 1e-5) << s.tag();
    EXPECT_LT(rel_err(d.dc_du, (c(u + h, v, th) - c(u - h, v, th)) / (2 * h)), 1e-5) << s.tag();
    EXPECT_LT(rel_err(d.dc_dv, (c(u, v + h, th) - c(u, v - h, th)) / (2 * h)), 1e-5) << s.tag();
    EXPECT_LT(rel_err(d.dc_dtheta, (c(u, v, th + th_h) - c(u, v, th - th_h)) / (2 * th_h)), 1e-5) << s.tag();
    // density is the mixed second derivative of the cdf
    const double hh = 1e-4;
    const double mixed = (C(u + hh, v + hh, th) - C(u + hh, v - hh, th) - C(u - hh, v + hh, th) +
                          C(u - hh, v - hh, th)) / (4 * hh * hh);
    EXPECT_LT(rel_err(d.density, mixed), 1e-4) << s.tag();
    EXPECT_NEAR(d.log_density, std::log(d.density), 1e-10);
  }
}

TEST(Copula, SurvivalRotationIsInvolution) {
  for (const char* base : {"C", "G", "J"}) {
    const auto s0 = CopulaSpec::from_tag(std::string(base) + "0");
    const auto s180 = CopulaSpec::from_tag(std::string(base) + "180");
    for (double th : theta_grid(s0))
      for (double u : {0.1, 0.45, 0.8})
        for (double v : {0.15, 0.6, 0.95}) {
          const double twice = u + v - 1.0 + copula_cdf(s180, 1.0 - u, 1.0 - v, th);
          EXPECT_NEAR(twice, copula_cdf(s0, u, v, th), 1e-12);
        }
  }
}

TEST(Copula, RotationIdentities) {
  const auto c0 = CopulaSpec::from_tag("G0");
  const auto c90 = CopulaSpec::from_tag("G90");
  const auto c270 = CopulaSpec::from_tag("G270");
  for (double u : {0.2, 0.7})
    for (double v : {0.3, 0.6}) {
      EXPECT_NEAR(copula_cdf(c90, u, v, -2.0), v - copula_cdf(c0, 1 - u, v, 2.0), 1e-13);
      EXPECT_NEAR(copula_cdf(c270, u, v, -2.0), u - copula_cdf(c0, u, 1 - v, 2.0), 1e-13);
    }
}

TEST(Copula, DensityIntegratesToOneForEveryTag) {
  for (const auto& s : all_specs()) {
    const double th = theta_grid(s)[3];
    const double total = test::integrate_unit_square([&](double u, double v) { return copula_density(s, u, v, th); });
    EXPECT_NEAR(total, 1.0, 1e-4) << s.tag();
  }
}

TEST(Copula, TauExamples) {
  EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("C0"), 2.0), 0.5, 1e-14);
  EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("G0"), 1.0), 0.0, 1e-14);
  EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("N"), 0.5), 2.0 / M_PI * std::asin(0.5), 1e-14);
  EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("C90"), -2.0), -0.5, 1e-14);
  EXPECT_THROW(theta_to_tau(CopulaSpec::from_tag("G0"), 0.5), DomainError);
}

TEST(Copula, JoeTauMatchesSeries) {
  // tau = 1 - 4 sum_k 1 / (k (theta k + 2) (theta (k - 1) + 2))
  for (double th : {1.05, 1.5, 2.5, 4.0, 8.0, 20.0}) {
    double sum = 0.0;
    for (int k = 1; k < 2000000; ++k) sum += 1.0 / (k * (th * k + 2.0) * (th * (k - 1) + 2.0));
    EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("J0"), th), 1.0 - 4.0 * sum, 1e-9) << th;
  }
}

TEST(Copula, FrankTauMatchesDebyeQuadrature) {
  for (double th : {-6.0, -0.7, 0.3, 5.0, 15.0}) {
    const double a = std::fabs(th);
    const double d1 = test::integrate([](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); }, 0.0, a) / a;
    double tau = 1.0 - 4.0 / a * (1.0 - d1);
    if (th < 0) tau = -tau;
    EXPECT_NEAR(theta_to_tau(CopulaSpec::from_tag("F"), th), tau, 1e-9) << th;
  }
}

TEST(Copula, AmhTauLimits) {
  const auto s = CopulaSpec::from_tag("AMH");
  EXPECT_NEAR(theta_to_tau(s, 1e-9), 0.0, 1e-9);
  EXPECT_NEAR(theta_to_tau(s, 1.0 - 1e-10), 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(theta_to_tau(s, -1.0), (5.0 - 8.0 * std::log(2.0)) / 3.0, 1e-10);
}

TEST(Copula, TauToThetaInverts) {
  for (const auto& s : all_specs()) {
    if (s.family == CopulaFamily::AMH || s.family == CopulaFamily::FGM) continue;
    for (double th : theta_grid(s)) {
      const double tau = theta_to_tau(s, th);
      EXPECT_NEAR(tau_to_theta(s, tau), th, 1e-6 * std::max(1.0, std::fabs(th))) << s.tag();
    }
  }
  EXPECT_NEAR(tau_to_theta(CopulaSpec::from_tag("C0"), 0.5), 2.0, 1e-12);
  EXPECT_NEAR(tau_to_theta(CopulaSpec::from_tag("AMH"), 0.2), 0.7, 0.3);
  const double f0 = tau_to_theta(CopulaSpec::from_tag("F"), 0.0);
  EXPECT_NE(f0, 0.0);
  EXPECT_LT(std::fabs(f0), 1e-6);
}

TEST(Copula, LinkExamplesAndRoundTrip) {
  EXPECT_DOUBLE_EQ(theta_link(CopulaSpec::from_tag("G0"), 0.0), 2.0);
  EXPECT_DOUBLE_EQ(theta_link(CopulaSpec::from_tag("N"), 0.0), 0.0);
  for (const auto& s : all_specs()) {
    for (double eta = -3.0; eta <= 3.0; eta += 0.25) {
      const double th = theta_link(s, eta);
      EXPECT_TRUE(s.theta_range().contains(th)) << s.tag() << " " << eta;
      EXPECT_NEAR(theta_link_inv(s, th), eta, 1e-12) << s.tag() << " " << eta;
      const double h = 1e-6;
      EXPECT_NEAR(theta_link_deriv(s, eta), (theta_link(s, eta + h) - theta_link(s, eta - h)) / (2 * h),
                  1e-6 * std::max(1.0, std::fabs(th)));
    }
  }
}

TEST(Copula, OutOfRangeThetaNamesFamily) {
  try {
    copula_cdf(CopulaSpec::from_tag("C0"), 0.3, 0.3, -1.0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("Clayton"), std::string::npos);
  }
  EXPECT_THROW(copula_density(CopulaSpec::from_tag("N"), 0.3, 0.3, 1.5), DomainError);
  EXPECT_THROW(copula_density(CopulaSpec::from_tag("F"), 0.3, 0.3, 0.0), DomainError);
}
