#pragma once

// Joint log-likelihood of the copula model, its penalized version, the
// analytic score and a Hessian obtained by differencing the score.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bcam/copula.hpp"
#include "bcam/data.hpp"
#include "bcam/design.hpp"
#include "bcam/margins.hpp"

namespace bcam {

/// Which distribution parameter an equation drives. margin = -1 marks the
/// copula parameter.
struct EquationRole {
  int margin = 0;
  int param = 0;

  bool is_theta() const { return margin < 0; }
  bool operator==(const EquationRole&) const = default;
};

struct ModelSpec {
  MarginFamily margin1 = MarginFamily::N;
  MarginFamily margin2 = MarginFamily::N;
  CopulaSpec copula;
  /// Ordered as mu1, mu2, sigma1, sigma2, [nu1], [nu2], theta.
  std::vector<PredictorSpec> equations;
  std::string response1 = "y1";
  std::string response2 = "y2";

  MarginFamily margin(int m) const { return m == 0 ? margin1 : margin2; }
  int n_equations() const { return n_params(margin1) + n_params(margin2) + 1; }
  std::vector<EquationRole> roles() const;
  std::vector<std::string> equation_names() const;
  /// Throws InputError when the equation count does not match the margins.
  void validate() const;
};

/// One smoothing-parameter slot: penalty D placed at coefficient `offset`.
struct PenaltyTerm {
  int equation = 0;
  Eigen::Index offset = 0;
  Eigen::MatrixXd D;
  std::string name;
};

/// Log density of one observation pair (checked; throws DomainError).
double joint_log_density(MarginFamily m1, MarginFamily m2, const CopulaSpec& copula, double y1, double y2,
                         const MarginParams& p1, const MarginParams& p2, double theta);

class Likelihood {
 public:
  enum class Kind { joint, margin1, margin2, independence };

  struct Evaluation {
    double value = 0.0;  // log-likelihood (not penalized)
    bool finite = true;
    std::size_t first_bad_obs = 0;
    std::size_t clamp_events = 0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
  };

  Likelihood(const ModelSpec& spec, const Dataset& data, const Adjacency* adjacency = nullptr);

  /// Sub-model with the copula removed: a single margin, or both margins
  /// under independence.
  Likelihood restricted(Kind kind) const;

  Kind kind() const { return kind_; }
  const ModelSpec& spec() const { return spec_; }
  std::size_t n_obs() const { return static_cast<std::size_t>(y_[0].size()); }
  int n_equations() const { return static_cast<int>(roles_.size()); }
  Eigen::Index n_coef() const { return n_coef_; }
  const std::vector<EquationRole>& roles() const { return roles_; }
  const std::vector<Predictor>& predictors() const { return preds_; }
  const std::vector<Eigen::Index>& equation_offsets() const { return eq_offset_; }
  const std::vector<PenaltyTerm>& penalties() const { return penalties_; }
  int n_lambda() const { return static_cast<int>(penalties_.size()); }
  const Eigen::VectorXd& response(int m) const { return y_[m]; }
  /// Index of the equation driving `role`, or -1.
  int equation_of(EquationRole role) const;

  /// S_lambda as a dense P x P matrix.
  Eigen::MatrixXd penalty_matrix(const Eigen::VectorXd& lambda) const;

  /// order 0: value; 1: + gradient; 2: + Hessian.
  Evaluation evaluate(const Eigen::VectorXd& delta, int order) const;

  double log_likelihood(const Eigen::VectorXd& delta) const { return evaluate(delta, 0).value; }
  double penalized_log_likelihood(const Eigen::VectorXd& delta, const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd score(const Eigen::VectorXd& delta) const { return evaluate(delta, 1).gradient; }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& delta) const { return evaluate(delta, 2).hessian; }

  /// n x E matrix of linear predictors.
  Eigen::MatrixXd linear_predictors(const Eigen::VectorXd& delta) const;

  /// Per-observation distribution parameters from a row of linear predictors.
  void params_from_eta(const double* eta, std::array<MarginParams, 2>& margins, double& theta) const;

  /// Coefficient vector slice for equation e.
  Eigen::VectorXd equation_coef(const Eigen::VectorXd& delta, int e) const;

 private:
  Likelihood() = default;
  void finish_layout();
  double observation(std::size_t i, const double* eta, double* grad, std::size_t* clamps) const;

  Kind kind_ = Kind::joint;
  ModelSpec spec_;
  std::array<Eigen::VectorXd, 2> y_;
  std::vector<EquationRole> roles_;
  std::vector<Predictor> preds_;
  std::vector<Eigen::Index> eq_offset_;
  Eigen::Index n_coef_ = 0;
  std::vector<PenaltyTerm> penalties_;
};

}  // namespace bcam
