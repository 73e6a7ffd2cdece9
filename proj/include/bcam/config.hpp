#pragma once

// Declarative model and simulation configuration files.
//
//   margins   = N, GU
//   copula    = C0
//   data      = births.csv
//   adjacency = counties.adj        (needed by mrf terms)
//   eq.mu1    = x1 + s(x2, k=10) + re(g) + mrf(region)
//   eq.sigma1 = 1                   (intercept only)
//   option.tol = 1e-7
//
// Lines starting with '#' are comments.

#include <string>
#include <vector>

#include "bcam/data.hpp"
#include "bcam/errors.hpp"
#include "bcam/estimator.hpp"
#include "bcam/likelihood.hpp"
#include "bcam/simulator.hpp"

namespace bcam {

/// Every problem found in a configuration, each with line context.
class ConfigError : public InputError {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ModelConfig {
  ModelSpec spec;
  FitOptions options;
  std::string data_path;
  std::string adjacency_path;
  std::string text;
};

/// "x1", "s(x2)", "s(x2, k=12)", "re(g)", "mrf(county)".
TermSpec parse_term(const std::string& text);
/// "1" or terms joined by '+'.
PredictorSpec parse_predictor(const std::string& text);

/// Parses and validates; when `data` is given, term columns and response
/// columns are checked against it. Throws ConfigError listing all problems.
ModelConfig parse_config(const std::string& text, const Dataset* data = nullptr);
ModelConfig load_config(const std::string& path, const Dataset* data = nullptr);

/// Simulation configuration: starts from the reference design and
/// overrides margins, copula, eta.<equation> (truth), eq.<equation> (fitted
/// model), n, replicates, seed, threads, candidates, correlation,
/// grid_points and option.* keys.
SimDesign parse_sim_config(const std::string& text);

}  // namespace bcam
