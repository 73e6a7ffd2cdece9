#pragma once

// Additive-predictor building blocks: linear terms, penalized cubic
// B-spline smooths, ridge random effects and Markov random field effects,
// assembled into eta = Z beta with an intercept column first.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bcam/data.hpp"

namespace bcam {

enum class BlockKind { linear, spline, random_effect, mrf };

/// Undirected neighbourhood graph over named regions.
struct Adjacency {
  std::vector<std::string> regions;       // sorted, unique
  std::vector<std::vector<int>> neighbors;

  static Adjacency from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                              const std::vector<std::string>& isolated = {});
  /// Edge list "regionA,regionB" per line; a line with a single name adds an
  /// isolated region.
  static Adjacency parse(const std::string& text, const std::string& source = "<adjacency>");
  static Adjacency load(const std::string& path);

  std::size_t size() const { return regions.size(); }
  int index_of(const std::string& region) const;  // -1 when absent
};

struct DesignBlock {
  BlockKind kind = BlockKind::linear;
  std::string name;    // term label, e.g. "s(x2)"
  std::string column;  // covariate column

  Eigen::MatrixXd Z;  // n x J, after constraint absorption
  Eigen::MatrixXd D;  // J x J penalty used in fitting (zero for linear blocks)
  Eigen::MatrixXd raw_penalty;  // penalty before centering and scaling
  bool penalized = false;
  bool centered = false;

  // Metadata needed to rebuild the basis for new covariate values.
  std::vector<double> knots;          // spline knot sequence
  int k_basis = 0;                    // spline basis size before centering
  double penalty_scale = 1.0;
  Eigen::MatrixXd constraint;         // raw -> constrained coefficient map (K x J)
  std::vector<std::string> levels;    // factor levels / regions, one column each
  bool factor_dummies = false;        // linear block coded from a factor

  std::vector<std::string> warnings;

  Eigen::Index width() const { return Z.cols(); }

  /// Basis evaluated at the rows of `data`.
  Eigen::MatrixXd basis(const Dataset& data) const;
};

/// Numeric column -> one column; factor -> dummies for every level except the
/// alphabetically first.
DesignBlock build_linear_block(const Dataset& data, const std::string& column);
DesignBlock build_linear_block(const std::string& name, const std::vector<double>& x);
DesignBlock build_factor_block(const std::string& name, const std::vector<std::string>& labels);

/// One-hot indicator basis with identity penalty; needs >= 2 levels.
DesignBlock build_random_effect_block(const std::string& name, const std::vector<std::string>& labels);

/// Cubic B-spline with knots at quantiles of the distinct x values, a
/// second-order difference penalty on the Greville abscissae and a
/// sum-to-zero constraint.
DesignBlock build_spline_block(const std::string& name, const std::vector<double>& x, int k_basis = 10);

/// Region indicators with graph-Laplacian penalty and sum-to-zero constraint.
DesignBlock build_mrf_block(const std::string& name, const std::vector<std::string>& labels,
                            const Adjacency& adjacency);

/// Cubic B-spline basis (size knots.size() - 4) at x, extrapolated linearly
/// outside the boundary knots.
Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double x);

struct TermSpec {
  BlockKind kind = BlockKind::linear;
  std::string column;
  int k = 10;

  std::string label() const;
  bool operator==(const TermSpec&) const = default;
};

/// Intercept plus an ordered list of terms.
struct PredictorSpec {
  std::vector<TermSpec> terms;

  std::string label() const;
  bool operator==(const PredictorSpec&) const = default;
};

struct Predictor {
  std::vector<DesignBlock> blocks;
  Eigen::MatrixXd Z;                   // n x P, column 0 is the intercept
  std::vector<Eigen::Index> offsets;   // first column of each block in Z
  std::vector<std::string> warnings;

  Eigen::Index n_coef() const { return Z.cols(); }
  Eigen::MatrixXd design(const Dataset& data) const;
  std::vector<std::string> coef_names() const;
};

Predictor assemble(const PredictorSpec& spec, const Dataset& data, const Adjacency* adjacency = nullptr);

/// Rebuilds a predictor from stored block metadata without refitting bases.
Predictor assemble_from_blocks(std::vector<DesignBlock> blocks, const Dataset& data);

}  // namespace bcam
