#include "bcam/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bcam/errors.hpp"
#include "bcam/stats.hpp"

namespace bcam {

namespace {

std::vector<std::string> sorted_levels(const std::vector<std::string>& labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

// Null-space basis M of the single constraint c' beta = 0 (K x (K-1)).
Eigen::MatrixXd sum_to_zero_basis(const Eigen::VectorXd& c) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(c.size() - 1);
}

void absorb_constraint(DesignBlock& b) {
  const Eigen::VectorXd c = b.Z.colwise().sum().transpose();
  b.constraint = sum_to_zero_basis(c);
  b.Z = b.Z * b.constraint;
  b.D = b.constraint.transpose() * b.D * b.constraint;
  b.D = 0.5 * (b.D + b.D.transpose());
  b.centered = true;
}

// Cox-de Boor recursion for all B-splines of the given degree at x.
Eigen::VectorXd bspline_values(const std::vector<double>& t, int degree, double x) {
  const int m = static_cast<int>(t.size());
  const int nb0 = m - 1;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nb0);
  // locate span, treating the right boundary as closed
  const double hi = t[m - 1];
  int span = -1;
  for (int j = 0; j < nb0; ++j) {
    if (t[j] < t[j + 1] && ((x >= t[j] && x < t[j + 1]) || (x == hi && t[j + 1] == hi))) {
      span = j;
      if (x != hi) break;
    }
  }
  if (span < 0) return Eigen::VectorXd::Zero(m - degree - 1);
  b[span] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    Eigen::VectorXd nb = Eigen::VectorXd::Zero(nb0 - d);
    for (int j = 0; j < nb0 - d; ++j) {
      double v = 0.0;
      const double l = t[j + d] - t[j];
      const double r = t[j + d + 1] - t[j + 1];
      if (l > 0.0) v += (x - t[j]) / l * b[j];
      if (r > 0.0) v += (t[j + d + 1] - x) / r * b[j + 1];
      nb[j] = v;
    }
    b = nb;
  }
  return b;
}

Eigen::VectorXd bspline_derivative(const std::vector<double>& t, double x) {
  const int k = static_cast<int>(t.size()) - 4;
  const Eigen::VectorXd b2 = bspline_values(t, 2, x);  // size k + 1
  Eigen::VectorXd d(k);
  for (int j = 0; j < k; ++j) {
    const double l = t[j + 3] - t[j];
    const double r = t[j + 4] - t[j + 1];
    d[j] = (l > 0.0 ? 3.0 * b2[j] / l : 0.0) - (r > 0.0 ? 3.0 * b2[j + 1] / r : 0.0);
  }
  return d;
}

}  // namespace

// --- adjacency --------------------------------------------------------------

Adjacency Adjacency::from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                                const std::vector<std::string>& isolated) {
  std::set<std::string> names(isolated.begin(), isolated.end());
  for (const auto& [a, b] : edges) {
    if (a == b) throw InputError("adjacency: region '" + a + "' listed as its own neighbour");
    names.insert(a);
    names.insert(b);
  }
  Adjacency adj;
  adj.regions.assign(names.begin(), names.end());
  std::vector<std::set<int>> nb(adj.regions.size());
  for (const auto& [a, b] : edges) {
    const int i = adj.index_of(a), j = adj.index_of(b);
    nb[i].insert(j);
    nb[j].insert(i);
  }
  for (const auto& s : nb) adj.neighbors.emplace_back(s.begin(), s.end());
  return adj;
}

Adjacency Adjacency::parse(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> isolated;
  std::size_t ln = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    const auto e = s.find_last_not_of(" \t\r\"");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      isolated.push_back(t);
      continue;
    }
    const std::string a = trim(t.substr(0, comma));
    const std::string b = trim(t.substr(comma + 1));
    if (a.empty() || b.empty() || b.find(',') != std::string::npos)
      throw InputError(source + ":" + std::to_string(ln) + ": expected 'regionA,regionB'");
    if (a == b) throw InputError(source + ":" + std::to_string(ln) + ": self-neighbour '" + a + "'");
    edges.emplace_back(a, b);
  }
  if (edges.empty() && isolated.empty()) throw InputError(source + ": no regions");
  return from_edges(edges, isolated);
}

Adjacency Adjacency::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open adjacency file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

int Adjacency::index_of(const std::string& region) const {
  const auto it = std::lower_bound(regions.begin(), regions.end(), region);
  if (it == regions.end() || *it != region) return -1;
  return static_cast<int>(it - regions.begin());
}

// --- blocks -----------------------------------------------------------------

Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double x) {
  const double a = knots.front();
  const double b = knots.back();
  if (x < a) return bspline_values(knots, 3, a) + (x - a) * bspline_derivative(knots, a);
  if (x > b) return bspline_values(knots, 3, b) + (x - b) * bspline_derivative(knots, b);
  return bspline_values(knots, 3, x);
}

DesignBlock build_linear_block(const std::string& name, const std::vector<double>& x) {
  DesignBlock b;
  b.kind = BlockKind::linear;
  b.name = name;
  b.column = name;
  b.Z.resize(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw InputError("linear term '" + name + "': non-finite value at row " + std::to_string(i));
    b.Z(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  b.D = Eigen::MatrixXd::Zero(1, 1);
  b.raw_penalty = b.D;
  return b;
}

DesignBlock build_factor_block(const std::string& name, const std::vector<std::string>& labels) {
  DesignBlock b;
  b.kind = BlockKind::linear;
  b.name = name;
  b.column = name;
  b.factor_dummies = true;
  b.levels = sorted_levels(labels);
  if (b.levels.size() < 2) b.warnings.push_back("factor '" + name + "' has a single level; term is empty");
  b.Z = b.basis([&] {
    Dataset d;
    d.add_factor(name, labels);
    return d;
  }());
  b.D = Eigen::MatrixXd::Zero(b.Z.cols(), b.Z.cols());
  b.raw_penalty = b.D;
  return b;
}

DesignBlock build_linear_block(const Dataset& data, const std::string& column) {
  const Column& c = data.column(column);
  return c.is_factor ? build_factor_block(column, c.labels) : build_linear_block(column, c.numeric);
}

DesignBlock build_random_effect_block(const std::string& name, const std::vector<std::string>& labels) {
  DesignBlock b;
  b.kind = BlockKind::random_effect;
  b.name = "re(" + name + ")";
  b.column = name;
  b.levels = sorted_levels(labels);
  if (b.levels.size() < 2)
    throw InputError("random effect '" + name + "' needs at least 2 levels, found " + std::to_string(b.levels.size()));
  Dataset d;
  d.add_factor(name, labels);
  b.Z = b.basis(d);
  b.D = Eigen::MatrixXd::Identity(b.Z.cols(), b.Z.cols());
  b.raw_penalty = b.D;
  b.penalized = true;
  return b;
}

DesignBlock build_spline_block(const std::string& name, const std::vector<double>& x, int k_basis) {
  if (k_basis < 4) throw InputError("smooth of '" + name + "': k must be >= 4, got " + std::to_string(k_basis));
  std::vector<double> u(x.begin(), x.end());
  for (double v : u)
    if (!std::isfinite(v)) throw InputError("smooth of '" + name + "': non-finite covariate value");
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (static_cast<int>(u.size()) < k_basis)
    throw InputError("smooth of '" + name + "': " + std::to_string(u.size()) + " distinct values, need at least k = " +
                     std::to_string(k_basis));
  DesignBlock b;
  b.kind = BlockKind::spline;
  b.name = "s(" + name + ")";
  b.column = name;
  b.k_basis = k_basis;
  const int n_interior = k_basis - 4;
  for (int j = 0; j < 4; ++j) b.knots.push_back(u.front());
  for (int j = 1; j <= n_interior; ++j) b.knots.push_back(quantile(u, static_cast<double>(j) / (n_interior + 1)));
  for (int j = 0; j < 4; ++j) b.knots.push_back(u.back());

  // Second divided differences on the Greville abscissae, weighted so that
  // beta' D beta approximates the integrated squared second derivative.
  std::vector<double> g(k_basis);
  for (int j = 0; j < k_basis; ++j) g[j] = (b.knots[j + 1] + b.knots[j + 2] + b.knots[j + 3]) / 3.0;
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(k_basis - 2, k_basis);
  for (int r = 0; r < k_basis - 2; ++r) {
    const double w1 = 1.0 / (g[r + 1] - g[r]);
    const double w2 = 1.0 / (g[r + 2] - g[r + 1]);
    const double span = 0.5 * (g[r + 2] - g[r]);
    const double scale = std::sqrt(span) / span;
    diff(r, r) = w1 * scale;
    diff(r, r + 1) = -(w1 + w2) * scale;
    diff(r, r + 2) = w2 * scale;
  }
  b.raw_penalty = diff.transpose() * diff;
  b.D = b.raw_penalty;

  const auto n = static_cast<Eigen::Index>(x.size());
  b.Z.resize(n, k_basis);
  for (Eigen::Index i = 0; i < n; ++i) b.Z.row(i) = bspline_basis(b.knots, x[static_cast<std::size_t>(i)]).transpose();
  absorb_constraint(b);
  // Put the penalty on the scale of the basis cross-product.
  const double dn = b.D.norm();
  b.penalty_scale = dn > 0.0 ? (b.Z.transpose() * b.Z).norm() / dn : 1.0;
  b.D *= b.penalty_scale;
  b.penalized = true;
  return b;
}

DesignBlock build_mrf_block(const std::string& name, const std::vector<std::string>& labels, const Adjacency& adjacency) {
  DesignBlock b;
  b.kind = BlockKind::mrf;
  b.name = "mrf(" + name + ")";
  b.column = name;
  b.levels = adjacency.regions;
  if (b.levels.size() < 2) throw InputError("MRF term '" + name + "' needs at least 2 regions");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (adjacency.index_of(labels[i]) < 0)
      throw InputError("MRF term '" + name + "': region '" + labels[i] + "' (row " + std::to_string(i) +
                       ") is not in the adjacency");
  const auto r = static_cast<Eigen::Index>(adjacency.size());
  b.raw_penalty = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& nb = adjacency.neighbors[static_cast<std::size_t>(i)];
    b.raw_penalty(i, i) = static_cast<double>(nb.size());
    for (int j : nb) b.raw_penalty(i, j) = -1.0;
  }
  b.D = b.raw_penalty;
  Dataset d;
  d.add_factor(name, labels);
  b.Z = b.basis(d);
  absorb_constraint(b);
  b.penalized = true;
  return b;
}

Eigen::MatrixXd DesignBlock::basis(const Dataset& data) const {
  const auto n = static_cast<Eigen::Index>(data.n_rows());
  switch (kind) {
    case BlockKind::linear: {
      if (!factor_dummies) {
        const auto& x = data.numeric(column);
        return Eigen::Map<const Eigen::VectorXd>(x.data(), n);
      }
      const auto& l = data.factor(column);
      const auto width = static_cast<Eigen::Index>(levels.empty() ? 0 : levels.size() - 1);
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, width);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = std::lower_bound(levels.begin(), levels.end(), l[static_cast<std::size_t>(i)]);
        if (it == levels.end() || *it != l[static_cast<std::size_t>(i)])
          throw InputError("factor '" + column + "': unknown level '" + l[static_cast<std::size_t>(i)] + "'");
        const auto j = it - levels.begin();
        if (j > 0) out(i, j - 1) = 1.0;
      }
      return out;
    }
    case BlockKind::random_effect:
    case BlockKind::mrf: {
      const auto& l = data.factor(column);
      Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(levels.size()));
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = std::lower_bound(levels.begin(), levels.end(), l[static_cast<std::size_t>(i)]);
        if (it == levels.end() || *it != l[static_cast<std::size_t>(i)]) {
          if (kind == BlockKind::mrf)
            throw InputError("MRF term '" + column + "': region '" + l[static_cast<std::size_t>(i)] +
                             "' is not in the adjacency");
          continue;  // unseen random-effect level: population-level prediction
        }
        raw(i, it - levels.begin()) = 1.0;
      }
      return constraint.size() ? Eigen::MatrixXd(raw * constraint) : raw;
    }
    case BlockKind::spline: {
      const auto& x = data.numeric(column);
      Eigen::MatrixXd raw(n, k_basis);
      for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = bspline_basis(knots, x[static_cast<std::size_t>(i)]).transpose();
      return raw * constraint;
    }
  }
  return {};
}

// --- specs and assembly -------------------------------------------------------

std::string TermSpec::label() const {
  switch (kind) {
    case BlockKind::linear: return column;
    case BlockKind::spline: return "s(" + column + ", k=" + std::to_string(k) + ")";
    case BlockKind::random_effect: return "re(" + column + ")";
    case BlockKind::mrf: return "mrf(" + column + ")";
  }
  return column;
}

std::string PredictorSpec::label() const {
  if (terms.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + terms[i].label();
  return s;
}

namespace {

void finish_assembly(Predictor& p, Eigen::Index n) {
  Eigen::Index width = 1;
  p.offsets.clear();
  for (const auto& b : p.blocks) {
    p.offsets.push_back(width);
    width += b.width();
  }
  p.Z.resize(n, width);
  p.Z.col(0).setOnes();
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    p.Z.middleCols(p.offsets[k], p.blocks[k].width()) = p.blocks[k].Z;
}

}  // namespace

Predictor assemble(const PredictorSpec& spec, const Dataset& data, const Adjacency* adjacency) {
  Predictor p;
  for (const auto& t : spec.terms) {
    switch (t.kind) {
      case BlockKind::linear: p.blocks.push_back(build_linear_block(data, t.column)); break;
      case BlockKind::spline: p.blocks.push_back(build_spline_block(t.column, data.numeric(t.column), t.k)); break;
      case BlockKind::random_effect:
        p.blocks.push_back(build_random_effect_block(t.column, data.factor(t.column)));
        break;
      case BlockKind::mrf:
        if (!adjacency) throw InputError("term " + t.label() + " requires an adjacency file");
        p.blocks.push_back(build_mrf_block(t.column, data.factor(t.column), *adjacency));
        break;
    }
  }
  finish_assembly(p, static_cast<Eigen::Index>(data.n_rows()));
  for (const auto& b : p.blocks)
    for (const auto& w : b.warnings) p.warnings.push_back(w);

  // Rank check of the unpenalized columns.
  std::vector<Eigen::Index> cols = {0};
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    if (!p.blocks[k].penalized)
      for (Eigen::Index j = 0; j < p.blocks[k].width(); ++j) cols.push_back(p.offsets[k] + j);
  Eigen::MatrixXd x(p.Z.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = p.Z.col(cols[j]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols())
    p.warnings.push_back("parametric design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                         std::to_string(x.cols()) + " columns)");
  return p;
}

Predictor assemble_from_blocks(std::vector<DesignBlock> blocks, const Dataset& data) {
  Predictor p;
  p.blocks = std::move(blocks);
  for (auto& b : p.blocks) b.Z = b.basis(data);
  finish_assembly(p, static_cast<Eigen::Index>(data.n_rows()));
  return p;
}

Eigen::MatrixXd Predictor::design(const Dataset& data) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.n_rows()), n_coef());
  out.col(0).setOnes();
  for (std::size_t k = 0; k < blocks.size(); ++k) out.middleCols(offsets[k], blocks[k].width()) = blocks[k].basis(data);
  return out;
}

std::vector<std::string> Predictor::coef_names() const {
  std::vector<std::string> names = {"(Intercept)"};
  for (const auto& b : blocks) {
    if (b.kind == BlockKind::linear && b.factor_dummies) {
      for (std::size_t j = 1; j < b.levels.size(); ++j) names.push_back(b.column + b.levels[j]);
    } else if (b.width() == 1) {
      names.push_back(b.name);
    } else {
      for (Eigen::Index j = 0; j < b.width(); ++j) names.push_back(b.name + "." + std::to_string(j + 1));
    }
  }
  return names;
}

}  // namespace bcam
