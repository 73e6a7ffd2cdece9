#pragma once

// Post-fit quantities: information criteria, quantile residuals, posterior
// simulation intervals, joint/conditional probabilities and dependence
// summaries.

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "bcam/estimator.hpp"
#include "bcam/likelihood.hpp"

namespace bcam {

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

/// aic = -2 l + 2 edf, bic = -2 l + log(n) edf.
InformationCriteria information_criteria(double loglik, double edf, std::size_t n);
InformationCriteria information_criteria(const FitResult& fit, const Likelihood& lik);

struct ResidualSet {
  Eigen::MatrixXd r;  // n x (number of margins in the model)
  std::size_t clamp_events = 0;
};

/// Phi^{-1} of the fitted margin cdf for each margin present in `lik`.
ResidualSet quantile_residuals(const FitResult& fit, const Likelihood& lik);

/// -H_p^{-1} via a floored symmetric eigendecomposition.
struct Covariance {
  Eigen::MatrixXd V;
  Eigen::MatrixXd factor;  // V = factor * factor^T
  bool stabilized = false;
};
Covariance posterior_covariance(const FitResult& fit);

struct PosteriorDraws {
  Eigen::MatrixXd draws;  // n_sim x P
  std::uint64_t seed = 0;
  bool stabilized = false;
};

/// n_sim draws from N(delta_hat, -H_p^{-1}); draw k uses stream (seed, k).
PosteriorDraws posterior_draws(const FitResult& fit, int n_sim, std::uint64_t seed);

struct IntervalSet {
  Eigen::VectorXd estimate;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

using Target = std::function<Eigen::VectorXd(const Eigen::VectorXd& delta)>;

/// Pointwise equal-tailed intervals of target(delta) across the draws.
IntervalSet interval(const FitResult& fit, const PosteriorDraws& draws, const Target& target, double level);

/// delta_j +- z se_j.
std::pair<double, double> wald_interval(const FitResult& fit, Eigen::Index j, double level);

enum class ProbMode { copula, independence };
enum class CondDirection { y1_given_y2, y2_given_y1 };

ProbMode prob_mode_from_string(const std::string& s);

/// Lower-orthant probability P(Y1 <= y1*, Y2 <= y2*) per observation at delta.
Eigen::VectorXd joint_prob_at(const Likelihood& lik, const Eigen::VectorXd& delta, double y1_star, double y2_star,
                              ProbMode mode);
Eigen::VectorXd joint_prob(const FitResult& fit, const Likelihood& lik, double y1_star, double y2_star, ProbMode mode);

/// P(Y1 <= y1* | Y2 <= y2*) = C(u, v)/v (or C(u, v)/u). NaN where the
/// conditioning probability is below 1e-12.
Eigen::VectorXd conditional_prob_at(const Likelihood& lik, const Eigen::VectorXd& delta, double y1_star,
                                    double y2_star, CondDirection dir, ProbMode mode = ProbMode::copula);
Eigen::VectorXd conditional_prob(const FitResult& fit, const Likelihood& lik, double y1_star, double y2_star,
                                 CondDirection dir, ProbMode mode = ProbMode::copula);

struct DependenceSummary {
  Eigen::VectorXd theta;
  Eigen::VectorXd tau;
  double mean_theta = 0.0;
  double mean_tau = 0.0;
};
DependenceSummary dependence_summary(const FitResult& fit, const Likelihood& lik);

/// Aligned text table of coefficients with Wald standard errors, smooth-term
/// edf and lambda, information criteria and mean dependence.
std::string summary_text(const FitResult& fit, const Likelihood& lik);

}  // namespace bcam
