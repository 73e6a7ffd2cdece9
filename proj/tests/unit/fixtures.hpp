#pragma once

#include <random>
#include <string>

#include "bcam/likelihood.hpp"

namespace bcam::test {

inline MarginParams base_params(MarginFamily f) {
  switch (f) {
    case MarginFamily::BE: return {0.4, 0.3, 1};
    case MarginFamily::DAGUM: return {2.0, 3.5, 1.5};
    case MarginFamily::GA: return {1.5, 0.6, 1};
    case MarginFamily::GU: return {0.5, 1.2, 1};
    case MarginFamily::iG: return {1.0, 0.7, 1};
    case MarginFamily::LN: return {0.5, 0.6, 1};
    case MarginFamily::LO: return {0.2, 0.8, 1};
    case MarginFamily::N: return {0.0, 1.0, 1};
    case MarginFamily::rGU: return {-0.3, 1.1, 1};
    case MarginFamily::SM: return {1.5, 3.0, 1.5};
    case MarginFamily::WEI: return {1.2, 1.8, 1};
  }
  return {};
}

inline double base_theta(const CopulaSpec& s) {
  const double sign = s.negative_rotation() ? -1.0 : 1.0;
  switch (s.family) {
    case CopulaFamily::AMH: return 0.5;
    case CopulaFamily::FGM: return 0.4;
    case CopulaFamily::Gaussian: return 0.5;
    case CopulaFamily::Frank: return 3.0;
    case CopulaFamily::Clayton: return sign * 1.5;
    case CopulaFamily::Gumbel: return sign * 1.8;
    case CopulaFamily::Joe: return sign * 1.8;
  }
  return 0.0;
}

/// Dataset with covariates x1, x2 ~ U(0,1), a 3-level factor g and
/// responses y1, y2 drawn independently from the base margins.
inline Dataset make_dataset(MarginFamily m1, MarginFamily m2, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x1(n), x2(n), y1(n), y2(n);
  std::vector<std::string> g(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = unif(rng);
    x2[i] = unif(rng);
    g[i] = std::string(1, static_cast<char>('a' + i % 3));
    y1[i] = margin_quantile(m1, 0.02 + 0.96 * unif(rng), base_params(m1));
    y2[i] = margin_quantile(m2, 0.02 + 0.96 * unif(rng), base_params(m2));
  }
  Dataset d;
  d.add_numeric("x1", x1);
  d.add_numeric("x2", x2);
  d.add_factor("g", g);
  d.add_numeric("y1", y1);
  d.add_numeric("y2", y2);
  return d;
}

/// Every equation gets x1 + s(x2, k=5); intercepts sit at the base values.
inline ModelSpec make_spec(MarginFamily m1, MarginFamily m2, const std::string& copula, bool smooth = true) {
  ModelSpec s;
  s.margin1 = m1;
  s.margin2 = m2;
  s.copula = CopulaSpec::from_tag(copula);
  PredictorSpec p;
  if (smooth) p.terms = {{BlockKind::linear, "x1"}, {BlockKind::spline, "x2", 5}};
  s.equations.assign(static_cast<std::size_t>(s.n_equations()), p);
  return s;
}

inline Eigen::VectorXd base_delta(const Likelihood& lik, double jitter, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(lik.n_coef());
  for (int e = 0; e < lik.n_equations(); ++e) {
    const auto r = lik.roles()[static_cast<std::size_t>(e)];
    const auto off = lik.equation_offsets()[static_cast<std::size_t>(e)];
    const auto w = lik.predictors()[static_cast<std::size_t>(e)].n_coef();
    if (r.is_theta()) {
      delta[off] = theta_link_inv(lik.spec().copula, base_theta(lik.spec().copula));
    } else {
      const auto f = lik.spec().margin(r.margin);
      delta[off] = link_inverse(param_link(f, r.param), base_params(f)[r.param]);
    }
    for (Eigen::Index j = 1; j < w; ++j) delta[off + j] = jitter * nd(rng);
  }
  return delta;
}

}  // namespace bcam::test
