#pragma once

// Penalized maximum likelihood with automatic smoothing-parameter selection:
// trust-region ascent of the penalized log-likelihood at fixed lambda,
// alternated with minimization of the prediction criterion V(lambda).

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bcam/likelihood.hpp"

namespace bcam {

struct FitOptions {
  int max_outer_iters = 100;
  double tol = 1e-7;              // relative log-likelihood change between outer steps
  int max_inner_iters = 200;
  double inner_grad_tol = 1e-6;   // sup-norm of the penalized score
  double initial_radius = 1.0;
  double max_radius = 100.0;
  double grow = 2.0;
  double shrink = 0.25;
  double min_radius = 1e-12;
  double initial_lambda = 1.0;
  double log_lambda_min = std::log(1e-8);
  double log_lambda_max = std::log(1e10);
  int max_smoothing_iters = 30;
  bool fit_margins_first = true;
  std::uint64_t seed = 1;
};

struct TrustRegionStep {
  Eigen::VectorXd delta;
  double radius = 0.0;
  double value = 0.0;      // penalized log-likelihood at the returned delta
  bool accepted = false;
  bool failed = false;     // radius underflow
  double ratio = 0.0;
};

/// Exact trust-region subproblem: maximize g'p + p'Hp/2 subject to ||p|| <= r.
Eigen::VectorXd solve_trust_subproblem(const Eigen::VectorXd& g, const Eigen::MatrixXd& H, double radius);

/// Generic objective for the trust-region solver: returns the value and,
/// when requested, the gradient and Hessian. A non-finite value signals an
/// evaluation failure.
struct Objective {
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)> eval;
};

struct InnerResult {
  Eigen::VectorXd delta;
  double value = 0.0;
  double radius = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  double grad_norm = 0.0;
};

/// One trust-region step from delta (objective value f0, gradient g, Hessian H).
TrustRegionStep trust_region_step(const Objective& obj, const Eigen::VectorXd& delta, double f0,
                                  const Eigen::VectorXd& g, const Eigen::MatrixXd& H, double radius,
                                  const FitOptions& opt);

/// Maximizes the objective by repeated trust-region steps.
InnerResult maximize(const Objective& obj, Eigen::VectorXd delta, double radius, const FitOptions& opt);

struct SmoothingResult {
  Eigen::VectorXd lambda;
  double criterion = 0.0;
  bool ridge_applied = false;
  bool floor_applied = false;
  int iterations = 0;
};

/// Minimizes V(lambda) = ||z - A z||^2 - n_tilde + 2 tr(A) over log lambda,
/// with I = -H, z = sqrt(I) delta + sqrt(I)^{-1} g and
/// A = sqrt(I) (I + S_lambda)^{-1} sqrt(I).
SmoothingResult select_smoothing(const Eigen::VectorXd& delta, const Eigen::VectorXd& g, const Eigen::MatrixXd& H,
                                 const std::vector<PenaltyTerm>& penalties, const Eigen::VectorXd& lambda0,
                                 double n_tilde, const FitOptions& opt);

/// V(lambda) and its gradient in log lambda (exposed for testing).
double smoothing_criterion(const Eigen::VectorXd& delta, const Eigen::VectorXd& g, const Eigen::MatrixXd& H,
                           const std::vector<PenaltyTerm>& penalties, const Eigen::VectorXd& log_lambda,
                           double n_tilde, Eigen::VectorXd* grad = nullptr);

struct EdfResult {
  double total = 0.0;
  std::vector<double> per_term;      // one per penalty slot
  std::vector<double> per_equation;  // one per equation
};

/// edf = tr((I + S)^{-1} I) with I = -H.
EdfResult effective_df(const Eigen::MatrixXd& H, const Eigen::MatrixXd& S, const Likelihood& lik);

struct FitResult {
  Eigen::VectorXd delta;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd hessian;            // unpenalized
  Eigen::MatrixXd penalized_hessian;  // H - S_lambda
  Eigen::VectorXd gradient;           // penalized score at delta
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  EdfResult edf;
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double grad_norm = 0.0;
  double last_relative_change = 0.0;
  bool hessian_negative_definite = false;
  std::size_t clamp_events = 0;
  bool start_fallback = false;
  bool step_failure = false;
  std::vector<std::string> warnings;
  std::string message;
  /// n x 8: mu1, mu2, sigma1, sigma2, nu1, nu2, theta, tau (NaN where absent).
  Eigen::MatrixXd fitted;
  std::vector<double> lambda_history_criterion;
};

/// Method-of-moments intercepts for a margin, on the parameter scale.
MarginParams moment_start(MarginFamily f, const Eigen::VectorXd& y);

struct StartValues {
  Eigen::VectorXd delta;
  Eigen::VectorXd lambda;  // smoothing parameters from the margin fits (NaN-free)
  bool fallback = false;
  std::vector<std::string> notes;
};

StartValues starting_values(const Likelihood& lik, const FitOptions& opt);

/// Full fit of the model held by `lik` (joint or restricted).
FitResult fit(const Likelihood& lik, const FitOptions& opt = {},
              const std::optional<Eigen::VectorXd>& start = std::nullopt,
              const std::optional<Eigen::VectorXd>& lambda_start = std::nullopt);

/// Per-observation parameter table for a coefficient vector.
Eigen::MatrixXd fitted_parameters(const Likelihood& lik, const Eigen::VectorXd& delta);

/// Machine-readable diagnostics (convergence, gradient, edf table).
std::string diagnostics_json(const FitResult& fit, const Likelihood& lik);

}  // namespace bcam
