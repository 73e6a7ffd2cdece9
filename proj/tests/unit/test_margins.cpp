#include <cmath>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "bcam/errors.hpp"
#include "bcam/margins.hpp"
#include "bcam/special.hpp"
#include "bcam/stats.hpp"

using namespace bcam;

namespace {

std::vector<MarginParams> param_grid(MarginFamily f) {
  switch (f) {
    case MarginFamily::BE: return {{0.3, 0.4, 1}, {0.7, 0.2, 1}};
    case MarginFamily::DAGUM: return {{2.0, 3.5, 1.5}, {1.0, 5.0, 0.7}};
    case MarginFamily::GA: return {{1.0, 1.0, 1}, {3.0, 0.4, 1}};
    case MarginFamily::GU: return {{0.0, 1.0, 1}, {2.0, 0.5, 1}};
    case MarginFamily::iG: return {{1.0, 0.8, 1}, {2.5, 0.3, 1}};
    case MarginFamily::LN: return {{0.5, 0.6, 1}, {1.5, 0.3, 1}};
    case MarginFamily::LO: return {{0.0, 1.0, 1}, {-1.0, 2.0, 1}};
    case MarginFamily::N: return {{0.0, 1.0, 1}, {3.0, 0.5, 1}};
    case MarginFamily::rGU: return {{0.0, 1.0, 1}, {-2.0, 1.5, 1}};
    case MarginFamily::SM: return {{1.5, 3.0, 1.5}, {2.0, 4.0, 0.9}};
    case MarginFamily::WEI: return {{1.0, 1.0, 1}, {2.0, 2.5, 1}};
  }
  return {};
}

double integrate_support(MarginFamily f, const std::function<double(double)>& g) {
  if (f == MarginFamily::BE) return boost::math::quadrature::tanh_sinh<double>().integrate(g, 0.0, 1.0);
  if (f == MarginFamily::GU || f == MarginFamily::LO || f == MarginFamily::N || f == MarginFamily::rGU)
    return boost::math::quadrature::sinh_sinh<double>().integrate(g);
  // positive support: split at 1 to help the double-exponential rules
  return boost::math::quadrature::tanh_sinh<double>().integrate(g, 0.0, 1.0) +
         boost::math::quadrature::exp_sinh<double>().integrate(g, 1.0, std::numeric_limits<double>::infinity());
}

double draw_point(MarginFamily f, const MarginParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.02, 0.98);
  return margin_quantile(f, unif(rng), p);
}

}  // namespace

TEST(Margins, TagsAndParamCounts) {
  EXPECT_EQ(all_margins().size(), 11u);
  for (MarginFamily f : all_margins()) {
    EXPECT_EQ(margin_from_tag(margin_tag(f)), f);
    EXPECT_EQ(n_params(f), (f == MarginFamily::DAGUM || f == MarginFamily::SM) ? 3 : 2);
  }
  EXPECT_THROW(margin_from_tag("XX"), InputError);
}

TEST(Margins, CdfExamples) {
  EXPECT_NEAR(margin_cdf(MarginFamily::N, 2.0, {2.0, 3.0}), 0.5, 1e-15);
  for (double s : {0.5, 1.0, 4.0})
    EXPECT_NEAR(margin_cdf(MarginFamily::WEI, 1.7, {1.7, s}), 1.0 - std::exp(-1.0), 1e-14);
  EXPECT_NEAR(margin_cdf(MarginFamily::LO, -1.0, {-1.0, 2.0}), 0.5, 1e-15);
  EXPECT_NEAR(margin_logpdf(MarginFamily::N, 1.0, {1.0, 1.0}), -0.5 * std::log(2 * M_PI), 1e-14);
}

TEST(Margins, SupportAndParamErrors) {
  EXPECT_THROW(margin_cdf(MarginFamily::GA, -1.0, {1.0, 1.0}), DomainError);
  EXPECT_THROW(margin_cdf(MarginFamily::BE, 1.0, {0.5, 0.5}), DomainError);
  EXPECT_THROW(margin_cdf(MarginFamily::BE, 0.5, {0.5, 1.2}), DomainError);
  EXPECT_THROW(margin_cdf(MarginFamily::N, 0.0, {0.0, -1.0}), DomainError);
  EXPECT_THROW(margin_cdf(MarginFamily::SM, 1.0, {1.0, 1.0, 0.0}), DomainError);
  EXPECT_THROW(margin_quantile(MarginFamily::N, 1.0, {0.0, 1.0}), DomainError);
}

TEST(Margins, PdfIntegratesToOne) {
  for (MarginFamily f : all_margins())
    for (const auto& p : param_grid(f)) {
      const double total = integrate_support(f, [&](double y) {
        return in_support(f, y) ? std::exp(margin_logpdf(f, y, p)) : 0.0;
      });
      EXPECT_NEAR(total, 1.0, 1e-6) << margin_tag(f);
    }
}

TEST(Margins, PdfMatchesCdfDifference) {
  std::mt19937_64 rng(3);
  for (MarginFamily f : all_margins())
    for (const auto& p : param_grid(f))
      for (int i = 0; i < 50; ++i) {
        const double y = draw_point(f, p, rng);
        const double h = 1e-5 * std::max(1e-2, std::fabs(y));
        const double fd = (margin_cdf(f, y + h, p) - margin_cdf(f, y - h, p)) / (2 * h);
        const double pdf = margin_pdf(f, y, p);
        EXPECT_LT(std::fabs(fd - pdf) / pdf, 1e-4) << margin_tag(f) << " y=" << y;
      }
}

TEST(Margins, QuantileRoundTrip) {
  for (MarginFamily f : all_margins())
    for (const auto& p : param_grid(f))
      for (int k = 1; k <= 99; ++k) {
        const double prob = k / 100.0;
        EXPECT_NEAR(margin_cdf(f, margin_quantile(f, prob, p), p), prob, 1e-8) << margin_tag(f);
      }
  EXPECT_NEAR(margin_quantile(MarginFamily::N, 0.5, {1.3, 2.0}), 1.3, 1e-14);
  EXPECT_NEAR(margin_quantile(MarginFamily::GU, 1.0 - std::exp(-1.0), {0.7, 2.0}), 0.7, 1e-13);
}

TEST(Margins, MomentExamples) {
  const auto gu = margin_moments(MarginFamily::GU, {1.0, 2.0});
  EXPECT_NEAR(*gu.mean, 1.0 - 0.5772156649 * 2.0, 1e-9);
  EXPECT_NEAR(*margin_moments(MarginFamily::WEI, {1.0, 1.0}).mean, 1.0, 1e-14);
  EXPECT_FALSE(margin_moments(MarginFamily::DAGUM, {1.0, 0.5, 1.0}).mean.has_value());
  EXPECT_TRUE(margin_moments(MarginFamily::DAGUM, {1.0, 1.5, 1.0}).mean.has_value());
  EXPECT_FALSE(margin_moments(MarginFamily::DAGUM, {1.0, 1.5, 1.0}).variance.has_value());
  // SM mean needs sigma*nu > 1 and the variance sigma*nu > 2
  EXPECT_FALSE(margin_moments(MarginFamily::SM, {1.0, 2.0, 0.45}).mean.has_value());
  EXPECT_TRUE(margin_moments(MarginFamily::SM, {1.0, 2.0, 0.9}).mean.has_value());
  EXPECT_FALSE(margin_moments(MarginFamily::SM, {1.0, 2.0, 0.9}).variance.has_value());
  EXPECT_TRUE(margin_moments(MarginFamily::SM, {1.0, 2.0, 1.1}).variance.has_value());
}

TEST(Margins, MomentsMatchQuadrature) {
  // Independent oracle: E[Y] and Var[Y] by integrating the density.
  for (MarginFamily f : all_margins())
    for (const auto& p : param_grid(f)) {
      const auto m = margin_moments(f, p);
      ASSERT_TRUE(m.mean && m.variance) << margin_tag(f);
      auto pdf = [&](double y) { return in_support(f, y) ? std::exp(margin_logpdf(f, y, p)) : 0.0; };
      const double mean = integrate_support(f, [&](double y) { return y * pdf(y); });
      const double var = integrate_support(f, [&](double y) { return (y - mean) * (y - mean) * pdf(y); });
      EXPECT_NEAR(*m.mean, mean, 1e-6 * std::max(1.0, std::fabs(mean))) << margin_tag(f);
      EXPECT_NEAR(*m.variance, var, 1e-6 * std::max(1.0, var)) << margin_tag(f);
    }
}

TEST(Margins, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (MarginFamily f : all_margins()) {
    const auto grid = param_grid(f);
    for (int i = 0; i < 200; ++i) {
      const MarginParams p = grid[i % grid.size()];
      const double y = draw_point(f, p, rng);
      const auto d = margin_derivs(f, y, p);
      for (int j = 0; j < n_params(f); ++j) {
        const double h = 1e-6 * std::max(1.0, std::fabs(p[j]));
        MarginParams up = p, dn = p;
        up[j] += h;
        dn[j] -= h;
        const double fd_cdf = (margin_cdf(f, y, up) - margin_cdf(f, y, dn)) / (2 * h);
        const double fd_lp = (margin_logpdf(f, y, up) - margin_logpdf(f, y, dn)) / (2 * h);
        EXPECT_LT(std::fabs(d.dcdf[j] - fd_cdf) / std::max(1.0, std::fabs(fd_cdf)), 1e-5)
            << margin_tag(f) << " param " << j << " y=" << y;
        EXPECT_LT(std::fabs(d.dlogpdf[j] - fd_lp) / std::max(1.0, std::fabs(fd_lp)), 1e-5)
            << margin_tag(f) << " param " << j << " y=" << y;
      }
      if (n_params(f) == 2) {
        EXPECT_EQ(d.dcdf[2], 0.0);
        EXPECT_EQ(d.dlogpdf[2], 0.0);
      }
    }
  }
}

TEST(Margins, DerivativeIdentities) {
  for (double y : {-1.0, 0.3, 2.0}) {
    const MarginParams p{0.5, 1.3};
    EXPECT_NEAR(margin_cdf_derivs(MarginFamily::N, y, p)[0], -margin_pdf(MarginFamily::N, y, p), 1e-14);
  }
  EXPECT_NEAR(margin_cdf_derivs(MarginFamily::LO, 2.0, {2.0, 3.0})[0], -1.0 / 12.0, 1e-14);
}

TEST(Margins, LinksAreBijections) {
  for (MarginFamily f : all_margins())
    for (int j = 0; j < n_params(f); ++j) {
      const LinkKind k = param_link(f, j);
      for (double eta = -4.0; eta <= 4.0; eta += 0.5) {
        MarginParams p = param_grid(f)[0];
        p[j] = link_apply(k, eta);
        EXPECT_NO_THROW(check_params(f, p)) << margin_tag(f) << " " << j;
        EXPECT_NEAR(link_inverse(k, link_apply(k, eta)), eta, 1e-10);
        const double h = 1e-6;
        EXPECT_NEAR(link_deriv(k, eta), (link_apply(k, eta + h) - link_apply(k, eta - h)) / (2 * h), 1e-7);
      }
    }
  EXPECT_EQ(param_link(MarginFamily::N, 0), LinkKind::identity);
  EXPECT_EQ(param_link(MarginFamily::BE, 1), LinkKind::logistic);
  EXPECT_EQ(param_link(MarginFamily::GA, 0), LinkKind::log_shifted);
}

TEST(Margins, IncompleteFunctionsMatchBoost) {
  for (double a : {0.05, 0.5, 1.0, 3.7, 25.0, 140.0})
    for (double x : {1e-4, 0.3, 1.0, 4.0, 30.0, 160.0}) {
      EXPECT_NEAR(gamma_p(a, x), boost::math::gamma_p(a, x), 1e-12) << a << " " << x;
      EXPECT_NEAR(gamma_q(a, x), boost::math::gamma_q(a, x), 1e-12) << a << " " << x;
    }
  for (double a : {0.2, 1.0, 4.5, 60.0})
    for (double b : {0.3, 2.0, 9.0, 80.0})
      for (double x : {1e-3, 0.2, 0.5, 0.9, 0.999})
        EXPECT_NEAR(beta_inc(a, b, x), boost::math::ibeta(a, b, x), 1e-12) << a << " " << b << " " << x;
}

TEST(Margins, SamplingMatchesMoments) {
  Rng rng = make_stream(42, 0);
  const auto y = margin_sample(MarginFamily::N, {0.0, 1.0}, 1000000, rng);
  EXPECT_LT(std::fabs(mean(y)), 0.01);
  const auto g = margin_sample(MarginFamily::GU, {0.0, 1.0}, 1000000, rng);
  EXPECT_NEAR(mean(g), -0.57722, 0.01);
}

TEST(Margins, ReversedGumbelIsNegatedGumbel) {
  Rng rng = make_stream(9, 0);
  auto a = margin_sample(MarginFamily::rGU, {0.7, 1.2}, 200000, rng);
  for (double& x : a) x = -x;
  const auto b = margin_sample(MarginFamily::GU, {-0.7, 1.2}, 200000, rng);
  EXPECT_LT(ks_distance(a, b), 0.01);
}

TEST(Margins, LogOfLogNormalIsNormal) {
  Rng rng = make_stream(10, 0);
  auto y = margin_sample(MarginFamily::LN, {0.4, 0.7}, 20000, rng);
  for (double& x : y) x = (std::log(x) - 0.4) / 0.7;
  EXPECT_GT(ks_test_std_normal(y).p_value, 0.01);
}
