#include "bcam/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bcam/errors.hpp"
#include "bcam/rng.hpp"
#include "bcam/special.hpp"

namespace bcam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCondFloor = 1e-12;

struct ObsParams {
  std::array<MarginParams, 2> margin;
  double theta = 0.0;
};

std::vector<ObsParams> observation_params(const Likelihood& lik, const Eigen::VectorXd& delta) {
  const Eigen::MatrixXd eta = lik.linear_predictors(delta);
  std::vector<ObsParams> out(static_cast<std::size_t>(eta.rows()));
  Eigen::VectorXd row(eta.cols());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    row = eta.row(i).transpose();
    auto& o = out[static_cast<std::size_t>(i)];
    lik.params_from_eta(row.data(), o.margin, o.theta);
  }
  return out;
}

double empirical_quantile(std::vector<double>& v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void require_joint(const Likelihood& lik) {
  if (lik.kind() != Likelihood::Kind::joint) throw InputError("joint probabilities need the copula model");
}

}  // namespace

InformationCriteria information_criteria(double loglik, double edf, std::size_t n) {
  return {-2.0 * loglik + 2.0 * edf, -2.0 * loglik + std::log(static_cast<double>(n)) * edf};
}

InformationCriteria information_criteria(const FitResult& fit, const Likelihood& lik) {
  return information_criteria(fit.loglik, fit.edf.total, lik.n_obs());
}

ResidualSet quantile_residuals(const FitResult& fit, const Likelihood& lik) {
  std::vector<int> margins;
  for (int m = 0; m < 2; ++m)
    if (lik.equation_of({m, 0}) >= 0) margins.push_back(m);
  const auto params = observation_params(lik, fit.delta);
  ResidualSet res;
  res.r.resize(static_cast<Eigen::Index>(params.size()), static_cast<Eigen::Index>(margins.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < margins.size(); ++k) {
      const int m = margins[k];
      const double u = margin_cdf(lik.spec().margin(m), lik.response(m)[static_cast<Eigen::Index>(i)], params[i].margin[m]);
      const double uc = clamp_prob(u);
      if (uc != u) ++res.clamp_events;
      res.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = norm_quantile(uc);
    }
  return res;
}

Covariance posterior_covariance(const FitResult& fit) {
  Covariance c;
  const Eigen::MatrixXd info = -0.5 * (fit.penalized_hessian + fit.penalized_hessian.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  Eigen::VectorXd lam = es.eigenvalues();
  const double floor = 1e-10 * std::max(lam.maxCoeff(), 1e-300);
  for (auto& l : lam)
    if (l < floor) {
      l = floor;
      c.stabilized = true;
    }
  c.factor = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  c.V = c.factor * c.factor.transpose();
  return c;
}

PosteriorDraws posterior_draws(const FitResult& fit, int n_sim, std::uint64_t seed) {
  if (n_sim <= 0) throw InputError("n_sim must be positive");
  const Covariance c = posterior_covariance(fit);
  PosteriorDraws d;
  d.seed = seed;
  d.stabilized = c.stabilized;
  const Eigen::Index p = fit.delta.size();
  d.draws.resize(n_sim, p);
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(p);
  for (int k = 0; k < n_sim; ++k) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
    for (Eigen::Index j = 0; j < p; ++j) z[j] = nd(rng);
    d.draws.row(k) = (fit.delta + c.factor * z).transpose();
  }
  return d;
}

IntervalSet interval(const FitResult& fit, const PosteriorDraws& draws, const Target& target, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("interval level must lie in (0, 1)");
  IntervalSet out;
  out.estimate = target(fit.delta);
  const Eigen::Index m = out.estimate.size();
  const auto ns = static_cast<std::size_t>(draws.draws.rows());
  Eigen::MatrixXd vals(m, static_cast<Eigen::Index>(ns));
  for (std::size_t k = 0; k < ns; ++k) vals.col(static_cast<Eigen::Index>(k)) = target(draws.draws.row(static_cast<Eigen::Index>(k)).transpose());
  out.lo.resize(m);
  out.hi.resize(m);
  std::vector<double> buf(ns);
  const double a = 0.5 * (1.0 - level);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < ns; ++k) buf[k] = vals(i, static_cast<Eigen::Index>(k));
    out.lo[i] = empirical_quantile(buf, a);
    out.hi[i] = empirical_quantile(buf, 1.0 - a);
  }
  return out;
}

std::pair<double, double> wald_interval(const FitResult& fit, Eigen::Index j, double level) {
  const Covariance c = posterior_covariance(fit);
  const double z = norm_quantile(0.5 + 0.5 * level);
  const double se = std::sqrt(c.V(j, j));
  return {fit.delta[j] - z * se, fit.delta[j] + z * se};
}

ProbMode prob_mode_from_string(const std::string& s) {
  if (s == "copula") return ProbMode::copula;
  if (s == "independence") return ProbMode::independence;
  throw InputError("unknown probability mode '" + s + "' (expected copula or independence)");
}

Eigen::VectorXd joint_prob_at(const Likelihood& lik, const Eigen::VectorXd& delta, double y1_star, double y2_star,
                              ProbMode mode) {
  require_joint(lik);
  check_support(lik.spec().margin1, y1_star);
  check_support(lik.spec().margin2, y2_star);
  const auto params = observation_params(lik, delta);
  Eigen::VectorXd p(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double u = margin_cdf(lik.spec().margin1, y1_star, params[i].margin[0]);
    const double v = margin_cdf(lik.spec().margin2, y2_star, params[i].margin[1]);
    p[static_cast<Eigen::Index>(i)] =
        mode == ProbMode::independence ? u * v : std::min(copula_cdf(lik.spec().copula, u, v, params[i].theta), std::min(u, v));
  }
  return p;
}

Eigen::VectorXd joint_prob(const FitResult& fit, const Likelihood& lik, double y1_star, double y2_star, ProbMode mode) {
  return joint_prob_at(lik, fit.delta, y1_star, y2_star, mode);
}

Eigen::VectorXd conditional_prob_at(const Likelihood& lik, const Eigen::VectorXd& delta, double y1_star,
                                    double y2_star, CondDirection dir, ProbMode mode) {
  require_joint(lik);
  check_support(lik.spec().margin1, y1_star);
  check_support(lik.spec().margin2, y2_star);
  const auto params = observation_params(lik, delta);
  Eigen::VectorXd p(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double u = margin_cdf(lik.spec().margin1, y1_star, params[i].margin[0]);
    const double v = margin_cdf(lik.spec().margin2, y2_star, params[i].margin[1]);
    const double c = mode == ProbMode::independence ? u * v
                                                    : std::min(copula_cdf(lik.spec().copula, u, v, params[i].theta), std::min(u, v));
    const double cond = dir == CondDirection::y1_given_y2 ? v : u;
    p[static_cast<Eigen::Index>(i)] = cond < kCondFloor ? kNaN : c / cond;
  }
  return p;
}

Eigen::VectorXd conditional_prob(const FitResult& fit, const Likelihood& lik, double y1_star, double y2_star,
                                 CondDirection dir, ProbMode mode) {
  return conditional_prob_at(lik, fit.delta, y1_star, y2_star, dir, mode);
}

DependenceSummary dependence_summary(const FitResult& fit, const Likelihood& lik) {
  require_joint(lik);
  DependenceSummary d;
  const auto params = observation_params(lik, fit.delta);
  const auto n = static_cast<Eigen::Index>(params.size());
  d.theta.resize(n);
  d.tau.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.theta[i] = params[static_cast<std::size_t>(i)].theta;
    d.tau[i] = theta_to_tau(lik.spec().copula, d.theta[i]);
  }
  d.mean_theta = d.theta.mean();
  d.mean_tau = d.tau.mean();
  return d;
}

std::string summary_text(const FitResult& fit, const Likelihood& lik) {
  std::ostringstream os;
  const Covariance c = posterior_covariance(fit);
  const auto names = lik.spec().equation_names();
  const auto roles = lik.spec().roles();
  os << "margins: " << margin_tag(lik.spec().margin1) << ", " << margin_tag(lik.spec().margin2)
     << "   copula: " << lik.spec().copula.tag() << "   n = " << lik.n_obs() << "\n\n";
  for (int e = 0; e < lik.n_equations(); ++e) {
    std::string name;
    for (std::size_t k = 0; k < roles.size(); ++k)
      if (roles[k] == lik.roles()[static_cast<std::size_t>(e)]) name = names[k];
    const auto& pred = lik.predictors()[static_cast<std::size_t>(e)];
    const auto off = lik.equation_offsets()[static_cast<std::size_t>(e)];
    os << "equation " << name << "\n";
    os << "  " << std::left << std::setw(24) << "coefficient" << std::right << std::setw(14) << "estimate"
       << std::setw(14) << "std.err" << std::setw(10) << "z" << "\n";
    const auto cn = pred.coef_names();
    // Parametric coefficients are the unpenalized ones.
    std::vector<bool> penalized(static_cast<std::size_t>(pred.n_coef()), false);
    for (std::size_t b = 0; b < pred.blocks.size(); ++b)
      for (Eigen::Index k = 0; k < pred.blocks[b].width(); ++k)
        penalized[static_cast<std::size_t>(pred.offsets[b] + k)] = pred.blocks[b].penalized;
    for (std::size_t j = 0; j < cn.size(); ++j) {
      if (penalized[j]) continue;
      const auto idx = off + static_cast<Eigen::Index>(j);
      const double se = std::sqrt(c.V(idx, idx));
      os << "  " << std::left << std::setw(24) << cn[j] << std::right << std::setw(14) << std::setprecision(6)
         << fit.delta[idx] << std::setw(14) << se << std::setw(10) << std::setprecision(4) << fit.delta[idx] / se
         << "\n";
    }
    os << "\n";
  }
  if (!lik.penalties().empty()) {
    os << "smooth terms\n  " << std::left << std::setw(24) << "term" << std::right << std::setw(12) << "edf"
       << std::setw(14) << "lambda" << "\n";
    for (std::size_t k = 0; k < lik.penalties().size(); ++k)
      os << "  " << std::left << std::setw(24) << lik.penalties()[k].name << std::right << std::setw(12)
         << std::setprecision(4) << fit.edf.per_term[k] << std::setw(14) << std::setprecision(4)
         << fit.lambda[static_cast<Eigen::Index>(k)] << "\n";
    os << "\n";
  }
  const auto ic = information_criteria(fit, lik);
  os << std::setprecision(8) << "logLik = " << fit.loglik << "   edf = " << std::setprecision(5) << fit.edf.total
     << "   AIC = " << std::setprecision(8) << ic.aic << "   BIC = " << ic.bic << "\n";
  if (lik.kind() == Likelihood::Kind::joint) {
    const auto d = dependence_summary(fit, lik);
    os << "mean theta = " << std::setprecision(5) << d.mean_theta << "   mean tau = " << d.mean_tau << "\n";
  }
  os << "converged: " << (fit.converged ? "yes" : "no") << " (" << fit.message << ")\n";
  return os.str();
}

}  // namespace bcam
