#include <cmath>

#include <gtest/gtest.h>

#include "bcam/errors.hpp"
#include "bcam/inference.hpp"
#include "bcam/simulator.hpp"
#include "bcam/special.hpp"
#include "bcam/stats.hpp"

using namespace bcam;

namespace {

// Constant-parameter design with the given margins and copula.
SimDesign constant_design(MarginFamily m1, MarginFamily m2, const std::string& cop, std::vector<std::string> eta,
                          std::size_t n) {
  SimDesign d;
  d.margin1 = m1;
  d.margin2 = m2;
  d.copula = CopulaSpec::from_tag(cop);
  d.eta = std::move(eta);
  d.n = n;
  d.fit_equations.assign(d.eta.size(), PredictorSpec{});
  return d;
}

struct Fitted {
  Dataset data;
  ModelSpec spec;
  std::unique_ptr<Likelihood> lik;
  FitResult fit;
};

Fitted fit_design(const SimDesign& d, std::uint64_t rep, const std::string& cop = "",
                  std::vector<PredictorSpec> eqs = {}) {
  Fitted f;
  f.data = simulate_dataset(d, rep);
  f.spec = d.model(cop.empty() ? d.copula.tag() : cop);
  if (!eqs.empty()) f.spec.equations = eqs;
  f.lik = std::make_unique<Likelihood>(f.spec, f.data);
  f.fit = fit(*f.lik, FitOptions{});
  return f;
}

}  // namespace

TEST(Inference, InformationCriteriaAlgebra) {
  const auto ic = information_criteria(-100.0, 7.5, 400);
  EXPECT_DOUBLE_EQ(ic.aic, 200.0 + 15.0);
  EXPECT_DOUBLE_EQ(ic.bic, 200.0 + std::log(400.0) * 7.5);
  EXPECT_NEAR(ic.bic - ic.aic, (std::log(400.0) - 2.0) * 7.5, 1e-12);
}

TEST(Inference, UnpenalizedAicUsesCoefficientCount) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::N, "N", {"0", "1", "0", "log(2)", "0.5"}, 300);
  const auto f = fit_design(d, 1);
  ASSERT_TRUE(f.fit.converged);
  const auto ic = information_criteria(f.fit, *f.lik);
  EXPECT_NEAR(ic.aic, -2 * f.fit.loglik + 2.0 * 5, 1e-8);
}

TEST(Inference, NoiseCovariateNeverLowersLikelihood) {
  auto d = constant_design(MarginFamily::N, MarginFamily::GA, "C0", {"0.2", "0.5", "0", "log(0.5)", "0.5"}, 400);
  const auto base = fit_design(d, 2);
  std::vector<PredictorSpec> eqs(5);
  eqs[0].terms = {{BlockKind::linear, "x1"}};
  const auto big = fit_design(d, 2, "", eqs);
  ASSERT_TRUE(base.fit.converged && big.fit.converged);
  EXPECT_GE(big.fit.loglik, base.fit.loglik - 1e-8);
  EXPECT_GT(big.fit.edf.total, base.fit.edf.total);
}

TEST(Inference, QuantileResidualAtMedianIsZero) {
  const auto d = constant_design(MarginFamily::LO, MarginFamily::GU, "F", {"0.3", "0.1", "0", "0", "2"}, 200);
  auto f = fit_design(d, 3);
  // Replace one response by the fitted median of its margin.
  const double mu = f.fit.fitted(0, 0), s = f.fit.fitted(0, 2);
  std::vector<double> y1 = f.data.numeric("y1");
  y1[0] = margin_quantile(MarginFamily::LO, 0.5, {mu, s});
  Dataset d2;
  for (const auto& name : {"x1", "x2", "x3", "y2"}) d2.add_numeric(name, f.data.numeric(name));
  d2.add_numeric("y1", y1);
  const Likelihood lik(f.spec, d2);
  const auto r = quantile_residuals(f.fit, lik);
  EXPECT_NEAR(r.r(0, 0), 0.0, 1e-12);
  EXPECT_EQ(r.r.cols(), 2);
  EXPECT_EQ(r.clamp_events, 0u);
}

TEST(Inference, ResidualsDetectWrongMargin) {
  const auto d = constant_design(MarginFamily::GA, MarginFamily::N, "C0", {"0.5", "0", "log(0.8)", "0", "1"}, 800);
  const auto good = fit_design(d, 4);
  const auto r = quantile_residuals(good.fit, *good.lik);
  std::vector<double> r1(r.r.col(0).data(), r.r.col(0).data() + r.r.rows());
  EXPECT_GT(ks_test_std_normal(r1).p_value, 0.01);
  auto wrong = d;
  wrong.margin1 = MarginFamily::N;
  const Dataset data = simulate_dataset(d, 4);
  const Likelihood lik(wrong.model("C0"), data);
  const auto bad = fit(lik, FitOptions{});
  const auto rb = quantile_residuals(bad, lik);
  std::vector<double> b1(rb.r.col(0).data(), rb.r.col(0).data() + rb.r.rows());
  EXPECT_LT(ks_test_std_normal(b1).p_value, 0.01);
}

TEST(Inference, PosteriorIntervalMatchesWald) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::N, "N", {"0", "1", "0", "0", "0.5"}, 300);
  const auto f = fit_design(d, 5);
  const auto draws = posterior_draws(f.fit, 10000, 42);
  for (Eigen::Index j = 0; j < f.fit.delta.size(); ++j) {
    const auto iv = interval(f.fit, draws, [j](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[j]); }, 0.95);
    const auto [lo, hi] = wald_interval(f.fit, j, 0.95);
    const double w = hi - lo;
    EXPECT_NEAR(iv.lo[0], lo, 0.05 * w) << j;
    EXPECT_NEAR(iv.hi[0], hi, 0.05 * w) << j;
  }
  const auto cst = interval(f.fit, draws, [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(3, 2.5); }, 0.9);
  EXPECT_EQ(cst.lo, cst.hi);
  // Seed-deterministic.
  EXPECT_EQ(posterior_draws(f.fit, 50, 7).draws, posterior_draws(f.fit, 50, 7).draws);
  EXPECT_NE(posterior_draws(f.fit, 50, 7).draws, posterior_draws(f.fit, 50, 8).draws);
}

TEST(Inference, PosteriorMomentsConverge) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::LO, "C0", {"0", "1", "0", "0", "0.3"}, 200);
  const auto f = fit_design(d, 6);
  const auto draws = posterior_draws(f.fit, 20000, 1);
  const Eigen::VectorXd m = draws.draws.colwise().mean();
  const Eigen::MatrixXd c = draws.draws.rowwise() - m.transpose();
  const Eigen::MatrixXd cov = c.transpose() * c / (draws.draws.rows() - 1.0);
  const Eigen::MatrixXd V = posterior_covariance(f.fit).V;
  for (Eigen::Index j = 0; j < m.size(); ++j) EXPECT_NEAR(m[j], f.fit.delta[j], 4 * std::sqrt(V(j, j) / 20000));
  EXPECT_LT((cov - V).cwiseAbs().maxCoeff() / V.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Inference, JointProbabilities) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::GA, "C0", {"0", "0.5", "0", "log(0.6)", "log(2)"}, 300);
  auto eqs = std::vector<PredictorSpec>(5);
  eqs[0].terms = {{BlockKind::linear, "x1"}};
  eqs[4].terms = {{BlockKind::linear, "x2"}};
  const auto f = fit_design(d, 7, "", eqs);
  const auto pc = joint_prob(f.fit, *f.lik, 0.3, 1.5, ProbMode::copula);
  const auto pi = joint_prob(f.fit, *f.lik, 0.3, 1.5, ProbMode::independence);
  for (Eigen::Index i = 0; i < pc.size(); ++i) {
    const double u = margin_cdf(MarginFamily::N, 0.3, {f.fit.fitted(i, 0), f.fit.fitted(i, 2)});
    const double v = margin_cdf(MarginFamily::GA, 1.5, {f.fit.fitted(i, 1), f.fit.fitted(i, 3)});
    EXPECT_NEAR(pi[i], u * v, 1e-14);
    EXPECT_LE(pc[i], std::min(u, v) + 1e-15);
    EXPECT_GT(pc[i], pi[i]);
  }
  EXPECT_THROW(joint_prob(f.fit, *f.lik, 0.3, -1.0, ProbMode::copula), DomainError);
}

TEST(Inference, ConditionalProbabilities) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::N, "C0", {"0", "0", "0", "0", "log(2)"}, 300);
  const auto f = fit_design(d, 8);
  const auto ind = conditional_prob(f.fit, *f.lik, 0.2, -0.4, CondDirection::y1_given_y2, ProbMode::independence);
  const double f1 = margin_cdf(MarginFamily::N, 0.2, {f.fit.fitted(0, 0), f.fit.fitted(0, 2)});
  EXPECT_NEAR(ind[0], f1, 1e-14);
  const auto far = conditional_prob(f.fit, *f.lik, 0.2, 60.0, CondDirection::y1_given_y2);
  EXPECT_NEAR(far[0], f1, 1e-9);
  // Monte Carlo oracle at the fitted parameters.
  const auto cop = f.spec.copula;
  const double th = f.fit.fitted(0, 6);
  const MarginParams p1{f.fit.fitted(0, 0), f.fit.fitted(0, 2)}, p2{f.fit.fitted(0, 1), f.fit.fitted(0, 3)};
  Rng rng(99);
  double num = 0, den = 0;
  for (int k = 0; k < 1000000; ++k) {
    const auto [u, v] = sample_copula_pair(cop, th, rng);
    const double y1 = margin_quantile(MarginFamily::N, u, p1), y2 = margin_quantile(MarginFamily::N, v, p2);
    if (y2 <= -0.4) {
      den += 1;
      num += (y1 <= 0.2);
    }
  }
  const auto cp = conditional_prob(f.fit, *f.lik, 0.2, -0.4, CondDirection::y1_given_y2);
  EXPECT_NEAR(cp[0], num / den, 0.005);
  const auto tiny = conditional_prob(f.fit, *f.lik, 0.2, -40.0, CondDirection::y1_given_y2);
  EXPECT_TRUE(std::isnan(tiny[0]));
}

TEST(Inference, DependenceSummary) {
  const auto d = constant_design(MarginFamily::N, MarginFamily::N, "AMH", {"0", "0", "0", "0", "0.8"}, 300);
  const auto f = fit_design(d, 9);
  const auto s = dependence_summary(f.fit, *f.lik);
  EXPECT_EQ(s.tau.minCoeff(), s.tau.maxCoeff());
  EXPECT_NEAR(s.mean_tau, theta_to_tau(f.spec.copula, s.mean_theta), 1e-14);
  const auto [lo, hi] = attainable_tau(f.spec.copula);
  EXPECT_GE(s.tau.minCoeff(), lo);
  EXPECT_LE(s.tau.maxCoeff(), hi);
  const auto txt = summary_text(f.fit, *f.lik);
  EXPECT_NE(txt.find("mean tau"), std::string::npos);
  EXPECT_NE(txt.find("AIC"), std::string::npos);
}
