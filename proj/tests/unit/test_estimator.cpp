#include <cmath>

#include <gtest/gtest.h>

#include "bcam/estimator.hpp"
#include "bcam/special.hpp"
#include "fixtures.hpp"

using namespace bcam;
using namespace bcam::test;

namespace {

Objective quadratic(const Eigen::VectorXd& b, const Eigen::MatrixXd& A) {
  return {[b, A](const Eigen::VectorXd& d, Eigen::VectorXd* g, Eigen::MatrixXd* H) {
    if (g) *g = b - A * d;
    if (H) *H = -A;
    return b.dot(d) - 0.5 * d.dot(A * d);
  }};
}

// Negative Rosenbrock, maximized at (1, 1).
Objective rosenbrock() {
  return {[](const Eigen::VectorXd& d, Eigen::VectorXd* g, Eigen::MatrixXd* H) {
    const double x = d[0], y = d[1];
    if (g) *g = Eigen::Vector2d(-(-2 * (1 - x) - 400 * x * (y - x * x)), -(200 * (y - x * x)));
    if (H) {
      H->resize(2, 2);
      *H << -(2 - 400 * (y - 3 * x * x)), 400 * x, 400 * x, -200.0;
    }
    return -((1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x));
  }};
}

// Responses from a Gaussian copula with normal margins; mu1 depends on x2.
Dataset gaussian_data(int n, double rho, unsigned seed, bool wiggle) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;
  std::normal_distribution<double> nd;
  std::vector<double> x1(n), x2(n), y1(n), y2(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = unif(rng);
    x2[i] = unif(rng);
    const double z1 = nd(rng), z2 = rho * z1 + std::sqrt(1 - rho * rho) * nd(rng);
    y1[i] = (wiggle ? std::sin(3 * kPi * x2[i]) : 0.5) + 0.3 * z1;
    y2[i] = 1.0 + 0.5 * x1[i] + 0.8 * z2;
  }
  Dataset d;
  d.add_numeric("x1", x1);
  d.add_numeric("x2", x2);
  d.add_numeric("y1", y1);
  d.add_numeric("y2", y2);
  return d;
}

// Clayton pairs by conditional inversion, with gamma/lognormal margins.
Dataset clayton_data(int n, double theta, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;
  std::vector<double> x1(n), y1(n), y2(n);
  for (int i = 0; i < n; ++i) {
    const double u = unif(rng), w = unif(rng);
    const double v = std::pow((std::pow(w, -theta / (1 + theta)) - 1) * std::pow(u, -theta) + 1, -1 / theta);
    x1[i] = unif(rng);
    y1[i] = margin_quantile(MarginFamily::GA, u, {1.5, 0.6});
    y2[i] = margin_quantile(MarginFamily::LN, v, {0.5, 0.6});
  }
  Dataset d;
  d.add_numeric("x1", x1);
  d.add_numeric("y1", y1);
  d.add_numeric("y2", y2);
  return d;
}

ModelSpec plain_spec(MarginFamily m1, MarginFamily m2, const std::string& cop, std::vector<PredictorSpec> eqs = {}) {
  ModelSpec s;
  s.margin1 = m1;
  s.margin2 = m2;
  s.copula = CopulaSpec::from_tag(cop);
  if (eqs.empty()) eqs.assign(static_cast<std::size_t>(s.n_equations()), PredictorSpec{});
  s.equations = eqs;
  return s;
}

}  // namespace

TEST(TrustRegion, QuadraticIsSolvedInOneStep) {
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d b(1, -2, 0.5);
  const auto obj = quadratic(b, A);
  FitOptions opt;
  opt.initial_radius = 100;
  const auto r = maximize(obj, Eigen::VectorXd::Zero(3), 100, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT((r.delta - A.ldlt().solve(b)).norm(), 1e-12);
}

TEST(TrustRegion, SubproblemRespectsRadius) {
  Eigen::MatrixXd A(2, 2);
  A << 2, 0, 0, 1;
  const Eigen::Vector2d g(4, 3);
  const Eigen::VectorXd p = solve_trust_subproblem(g, -A, 0.5);
  EXPECT_NEAR(p.norm(), 0.5, 1e-10);
  // Boundary optimality: (A + mu I) p = g for some mu >= 0.
  const double mu0 = (g[0] - 2 * p[0]) / p[0], mu1 = (g[1] - p[1]) / p[1];
  EXPECT_NEAR(mu0, mu1, 1e-8);
  EXPECT_GT(mu0, 0);
}

TEST(TrustRegion, IndefiniteAndHardCase) {
  // Indefinite Hessian: step lands on the boundary and ascends the model.
  Eigen::MatrixXd H(2, 2);
  H << 1, 0, 0, -2;
  Eigen::Vector2d g(0.3, 1.0);
  Eigen::VectorXd p = solve_trust_subproblem(g, H, 1.0);
  EXPECT_NEAR(p.norm(), 1.0, 1e-10);
  EXPECT_GT(g.dot(p) + 0.5 * p.dot(H * p), 0.0);
  // Hard case: gradient orthogonal to the direction of positive curvature.
  g << 0.0, 1.0;
  p = solve_trust_subproblem(g, H, 1.0);
  EXPECT_NEAR(p.norm(), 1.0, 1e-10);
  EXPECT_GT(std::fabs(p[0]), 0.5);
}

TEST(TrustRegion, RejectedStepShrinksRadius) {
  // The model promises an increase but the objective falls everywhere away from 0.
  const Objective obj{[](const Eigen::VectorXd& d, Eigen::VectorXd*, Eigen::MatrixXd*) { return -d.squaredNorm(); }};
  FitOptions opt;
  opt.shrink = 0.5;
  const Eigen::Vector2d g(1, 0);
  const Eigen::MatrixXd H = -Eigen::MatrixXd::Identity(2, 2);
  const auto st = trust_region_step(obj, Eigen::VectorXd::Zero(2), 0.0, g, H, 0.8, opt);
  EXPECT_FALSE(st.accepted);
  EXPECT_DOUBLE_EQ(st.radius, 0.4);
  EXPECT_EQ(st.delta, Eigen::VectorXd(Eigen::VectorXd::Zero(2)));
  // Non-finite trial value counts as a failed step too.
  const Objective bad{[](const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*) { return std::nan(""); }};
  const auto st2 = trust_region_step(bad, Eigen::VectorXd::Zero(2), 0.0, g, H, 0.8, opt);
  EXPECT_FALSE(st2.accepted);
  EXPECT_LT(st2.radius, 0.8);
}

TEST(TrustRegion, RosenbrockMonotoneAscent) {
  const auto obj = rosenbrock();
  FitOptions opt;
  opt.inner_grad_tol = 1e-9;
  Eigen::VectorXd d(2);
  d << -1.2, 1.0;
  double f = obj.eval(d, nullptr, nullptr);
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  double radius = 1.0;
  for (int it = 0; it < 200; ++it) {
    f = obj.eval(d, &g, &H);
    if (g.lpNorm<Eigen::Infinity>() < 1e-9) break;
    const auto st = trust_region_step(obj, d, f, g, H, radius, opt);
    EXPECT_GE(st.value, f);
    d = st.delta;
    radius = st.radius;
  }
  EXPECT_NEAR(d[0], 1.0, 1e-6);
  EXPECT_NEAR(d[1], 1.0, 1e-6);
}

TEST(Estimator, MomentStarts) {
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  const auto n = moment_start(MarginFamily::N, y);
  EXPECT_DOUBLE_EQ(n.mu, 3.0);
  EXPECT_NEAR(n.sigma, std::sqrt(2.5), 1e-12);
  const auto ga = moment_start(MarginFamily::GA, y);
  EXPECT_NEAR(ga.sigma, std::sqrt(2.5) / 3.0, 1e-12);
  const auto gu = moment_start(MarginFamily::GU, y);
  EXPECT_NEAR(gu.mu - kEulerGamma * gu.sigma, 3.0, 1e-12);
  for (auto f : all_margins()) {
    Rng rng(7);
    const auto s = margin_sample(f, test::base_params(f), 400, rng);
    const auto p = moment_start(f, Eigen::Map<const Eigen::VectorXd>(s.data(), 400));
    EXPECT_NO_THROW(check_params(f, p)) << margin_tag(f);
  }
}

TEST(Estimator, NoPenaltyModelConvergesInOneOuterStep) {
  const Dataset d = gaussian_data(300, 0.5, 3, false);
  PredictorSpec lin;
  lin.terms = {{BlockKind::linear, "x1"}};
  const auto spec = plain_spec(MarginFamily::N, MarginFamily::N, "N", {lin, lin, {}, {}, {}});
  const Likelihood lik(spec, d);
  const auto r = fit(lik, FitOptions{});
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_EQ(r.outer_iterations, 1);
  EXPECT_NEAR(r.edf.total, static_cast<double>(lik.n_coef()), 1e-8);
  EXPECT_LT(r.grad_norm, 1e-6);
  EXPECT_TRUE(r.hessian_negative_definite);
  EXPECT_NEAR(r.fitted(0, 6), 0.5, 0.1);
}

TEST(Estimator, RecoversGaussianModel) {
  const Dataset d = gaussian_data(800, 0.6, 11, false);
  PredictorSpec lin;
  lin.terms = {{BlockKind::linear, "x1"}};
  const auto spec = plain_spec(MarginFamily::N, MarginFamily::N, "N", {{}, lin, {}, {}, {}});
  const Likelihood lik(spec, d);
  const auto r = fit(lik, FitOptions{});
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_LT(r.grad_norm, 1e-5);
  EXPECT_NEAR(r.delta[0], 0.5, 0.05);
  EXPECT_NEAR(r.delta[2], 0.5, 0.2);
  EXPECT_NEAR(r.fitted(0, 2), 0.3, 0.03);
  EXPECT_NEAR(r.fitted(0, 3), 0.8, 0.06);
  EXPECT_NEAR(r.fitted(0, 6), 0.6, 0.06);
  EXPECT_TRUE(std::isnan(r.fitted(0, 4)));
}

TEST(Estimator, RecoversClaytonDependence) {
  const Dataset d = clayton_data(1000, 2.0, 5);
  const auto spec = plain_spec(MarginFamily::GA, MarginFamily::LN, "C0");
  const Likelihood lik(spec, d);
  const auto r = fit(lik, FitOptions{});
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_LT(r.grad_norm, 1e-5);
  EXPECT_NEAR(r.fitted(0, 7), 0.5, 0.05);
  EXPECT_NEAR(r.fitted(0, 0), 1.5, 0.1);
  EXPECT_NEAR(r.fitted(0, 1), 0.5, 0.05);
}

TEST(Estimator, SmoothingSeparatesSignalFromNoise) {
  const Dataset d = gaussian_data(600, 0.3, 21, true);
  PredictorSpec mu1;
  mu1.terms = {{BlockKind::spline, "x1", 10}, {BlockKind::spline, "x2", 10}};
  const auto spec = plain_spec(MarginFamily::N, MarginFamily::N, "N", {mu1, {}, {}, {}, {}});
  const Likelihood lik(spec, d);
  const auto r = fit(lik, FitOptions{});
  ASSERT_TRUE(r.converged) << r.message;
  ASSERT_EQ(r.edf.per_term.size(), 2u);
  EXPECT_LT(r.edf.per_term[0], 1.5);
  EXPECT_GT(r.edf.per_term[1], 3.0);
  EXPECT_LT(r.grad_norm, 1e-5);
  const auto js = diagnostics_json(r, lik);
  EXPECT_NE(js.find("\"converged\": true"), std::string::npos);
}

TEST(Estimator, EdfLimitsAndMonotonicity) {
  const Dataset d = make_dataset(MarginFamily::N, MarginFamily::N, 200, 4);
  const auto spec = make_spec(MarginFamily::N, MarginFamily::N, "N");
  const Likelihood lik(spec, d);
  const Eigen::VectorXd delta = base_delta(lik, 0.05, 1);
  const Eigen::MatrixXd H = lik.hessian(delta);
  const auto zero = effective_df(H, lik.penalty_matrix(Eigen::VectorXd::Zero(lik.n_lambda())), lik);
  EXPECT_NEAR(zero.total, static_cast<double>(lik.n_coef()), 1e-6);
  double prev = zero.total;
  for (double lam : {0.01, 1.0, 100.0, 1e4, 1e8}) {
    const auto e = effective_df(H, lik.penalty_matrix(Eigen::VectorXd::Constant(lik.n_lambda(), lam)), lik);
    EXPECT_LT(e.total, prev);
    prev = e.total;
  }
}

TEST(Estimator, SmoothingCriterionGradientMatchesDifferences) {
  const Dataset d = make_dataset(MarginFamily::N, MarginFamily::LO, 200, 9);
  const auto spec = make_spec(MarginFamily::N, MarginFamily::LO, "F");
  const Likelihood lik(spec, d);
  const Eigen::VectorXd delta = base_delta(lik, 0.1, 2);
  const auto ev = lik.evaluate(delta, 2);
  Eigen::VectorXd rho = Eigen::VectorXd::LinSpaced(lik.n_lambda(), -2.0, 3.0);
  Eigen::VectorXd grad;
  const double n_tilde = 5.0 * 200;
  smoothing_criterion(delta, ev.gradient, ev.hessian, lik.penalties(), rho, n_tilde, &grad);
  for (Eigen::Index k = 0; k < rho.size(); ++k) {
    Eigen::VectorXd a = rho, b = rho;
    a[k] += 1e-5;
    b[k] -= 1e-5;
    const double fd = (smoothing_criterion(delta, ev.gradient, ev.hessian, lik.penalties(), a, n_tilde, nullptr) -
                       smoothing_criterion(delta, ev.gradient, ev.hessian, lik.penalties(), b, n_tilde, nullptr)) /
                      2e-5;
    EXPECT_NEAR(grad[k], fd, 1e-5 * (1.0 + std::fabs(fd))) << k;
  }
}
