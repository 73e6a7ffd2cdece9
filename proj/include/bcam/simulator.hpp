#pragma once

// Sampling from copula models and the simulation-study harness with
// AIC/BIC model-selection tallies.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bcam/copula.hpp"
#include "bcam/data.hpp"
#include "bcam/estimator.hpp"
#include "bcam/likelihood.hpp"
#include "bcam/rng.hpp"

namespace bcam {

/// Solves h(u, v) = w for v (conditional inversion). Closed forms for
/// Clayton, Frank, FGM and Gaussian; bracketed root-finding otherwise.
double copula_h_inverse(const CopulaSpec& spec, double u, double w, double theta);

/// (u, v) from the copula by conditional inversion.
std::pair<double, double> sample_copula_pair(const CopulaSpec& spec, double theta, Rng& rng);

/// Number of root-bracketing failures that forced a resample (diagnostic).
std::uint64_t sampler_resample_count();

struct SimDesign {
  MarginFamily margin1 = MarginFamily::iG;
  MarginFamily margin2 = MarginFamily::SM;
  CopulaSpec copula = CopulaSpec::from_tag("J0");
  /// True linear predictors in ModelSpec::roles() order; variables x1, x2, x3.
  std::vector<std::string> eta;
  /// Model fitted to each replicate, in the same order.
  std::vector<PredictorSpec> fit_equations;
  std::size_t n = 1000;
  std::size_t replicates = 25;
  std::vector<std::string> candidates;
  std::uint64_t seed = 1;
  double covariate_correlation = 0.5;
  int threads = 1;
  int grid_points = 200;
  FitOptions fit_options;

  /// Model spec with the given copula tag and the fit equations.
  ModelSpec model(const std::string& copula_tag) const;
};

/// The inverse Gaussian / Singh-Maddala / Joe design with a binary x3 and
/// correlated uniform covariates.
SimDesign reference_design(std::size_t n = 1000, std::size_t replicates = 25, std::uint64_t seed = 1);

struct TruthValues {
  std::vector<std::array<MarginParams, 2>> margins;
  std::vector<double> theta;
};

/// Per-observation true parameters; DomainError names the offending expression.
TruthValues truth_values(const SimDesign& design, const Dataset& covariates);

/// Covariates x1, x2 (uniform), x3 (binary) from a Gaussian copula.
Dataset simulate_covariates(const SimDesign& design, Rng& rng);

/// Covariates plus responses y1, y2.
Dataset simulate_dataset(const SimDesign& design, Rng& rng);
/// Replicate r uses stream (seed, r).
Dataset simulate_dataset(const SimDesign& design, std::uint64_t replicate);

struct CandidateFit {
  std::string tag;
  bool ok = false;
  bool converged = false;
  double loglik = 0.0;
  double edf = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::string error;
};

struct ReplicateRecord {
  std::size_t index = 0;
  std::vector<CandidateFit> fits;
  std::string aic_choice;  // empty when every candidate failed
  std::string bic_choice;
  bool reference_ok = false;
  Eigen::VectorXd coef;              // reference-model coefficients
  Eigen::MatrixXd smooths;           // grid_points x number of smooth terms
  double mean_tau_fitted = 0.0;
};

struct SimReport {
  std::vector<std::string> candidates;
  std::string reference;             // candidate whose coefficients are stored
  std::vector<std::string> coef_names;
  std::vector<std::string> smooth_names;  // "equation:term"
  Eigen::VectorXd grid;
  std::vector<ReplicateRecord> replicates;
  std::map<std::string, double> aic_share;
  std::map<std::string, double> bic_share;
  std::size_t failed_fits = 0;
};

/// Fits every candidate to every replicate, tallies argmin-AIC/BIC and stores
/// the reference fit's coefficients and smooth curves on a grid in [0, 1].
SimReport run_sim_study(const SimDesign& design,
                        const std::function<void(std::size_t)>& on_replicate_done = {});

/// selection.csv, coefficients.csv, smooths.csv, fits.csv and summary.txt.
void write_sim_report(const SimReport& report, const std::string& dir);
std::string sim_summary_text(const SimReport& report);

}  // namespace bcam
