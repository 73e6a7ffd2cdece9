#include "bcam/likelihood.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bcam/errors.hpp"

namespace bcam {

namespace {

const char* kParamNames[3] = {"mu", "sigma", "nu"};

}  // namespace

std::vector<EquationRole> ModelSpec::roles() const {
  std::vector<EquationRole> r = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  if (n_params(margin1) == 3) r.push_back({0, 2});
  if (n_params(margin2) == 3) r.push_back({1, 2});
  r.push_back({-1, 0});
  return r;
}

std::vector<std::string> ModelSpec::equation_names() const {
  std::vector<std::string> out;
  for (const auto& r : roles())
    out.push_back(r.is_theta() ? std::string("theta") : kParamNames[r.param] + std::to_string(r.margin + 1));
  return out;
}

void ModelSpec::validate() const {
  if (static_cast<int>(equations.size()) != n_equations()) {
    std::ostringstream os;
    os << "margins (" << margin_tag(margin1) << ", " << margin_tag(margin2) << ") with copula " << copula.tag()
       << " need " << n_equations() << " equations, got " << equations.size();
    throw InputError(os.str());
  }
}

double joint_log_density(MarginFamily m1, MarginFamily m2, const CopulaSpec& copula, double y1, double y2,
                         const MarginParams& p1, const MarginParams& p2, double theta) {
  const double u = margin_cdf(m1, y1, p1);
  const double v = margin_cdf(m2, y2, p2);
  return copula_log_density(copula, u, v, theta) + margin_logpdf(m1, y1, p1) + margin_logpdf(m2, y2, p2);
}

Likelihood::Likelihood(const ModelSpec& spec, const Dataset& data, const Adjacency* adjacency) : spec_(spec) {
  spec_.validate();
  for (int m = 0; m < 2; ++m) {
    const std::string& name = m == 0 ? spec_.response1 : spec_.response2;
    const auto& y = data.numeric(name);
    y_[m] = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!in_support(spec_.margin(m), y[i])) {
        std::ostringstream os;
        os << "response '" << name << "' row " << i << ": value " << y[i] << " outside the support of the "
           << margin_tag(spec_.margin(m)) << " margin";
        throw DomainError(os.str());
      }
  }
  if (data.n_rows() == 0) throw InputError("empty dataset");
  roles_ = spec_.roles();
  for (const auto& eq : spec_.equations) preds_.push_back(assemble(eq, data, adjacency));
  finish_layout();
}

Likelihood Likelihood::restricted(Kind kind) const {
  if (kind_ != Kind::joint) throw InputError("can only restrict the joint likelihood");
  Likelihood out;
  out.kind_ = kind;
  out.spec_ = spec_;
  out.y_ = y_;
  for (std::size_t e = 0; e < roles_.size(); ++e) {
    const auto& r = roles_[e];
    const bool keep = kind == Kind::joint || (!r.is_theta() && (kind == Kind::independence ||
                                                                (kind == Kind::margin1 && r.margin == 0) ||
                                                                (kind == Kind::margin2 && r.margin == 1)));
    if (!keep) continue;
    out.roles_.push_back(r);
    out.preds_.push_back(preds_[e]);
  }
  out.finish_layout();
  return out;
}

void Likelihood::finish_layout() {
  eq_offset_.clear();
  penalties_.clear();
  n_coef_ = 0;
  const auto names = spec_.equation_names();
  const auto all_roles = spec_.roles();
  for (std::size_t e = 0; e < preds_.size(); ++e) {
    eq_offset_.push_back(n_coef_);
    std::string eq_name;
    for (std::size_t k = 0; k < all_roles.size(); ++k)
      if (all_roles[k] == roles_[e]) eq_name = names[k];
    const auto& p = preds_[e];
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      if (!p.blocks[b].penalized) continue;
      penalties_.push_back({static_cast<int>(e), n_coef_ + p.offsets[b], p.blocks[b].D, eq_name + ":" + p.blocks[b].name});
    }
    n_coef_ += p.n_coef();
  }
}

int Likelihood::equation_of(EquationRole role) const {
  for (std::size_t e = 0; e < roles_.size(); ++e)
    if (roles_[e] == role) return static_cast<int>(e);
  return -1;
}

Eigen::MatrixXd Likelihood::penalty_matrix(const Eigen::VectorXd& lambda) const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_coef_, n_coef_);
  for (std::size_t k = 0; k < penalties_.size(); ++k) {
    const auto& t = penalties_[k];
    s.block(t.offset, t.offset, t.D.rows(), t.D.cols()) += lambda[static_cast<Eigen::Index>(k)] * t.D;
  }
  return s;
}

double Likelihood::penalized_log_likelihood(const Eigen::VectorXd& delta, const Eigen::VectorXd& lambda) const {
  return log_likelihood(delta) - 0.5 * delta.dot(penalty_matrix(lambda) * delta);
}

Eigen::VectorXd Likelihood::equation_coef(const Eigen::VectorXd& delta, int e) const {
  return delta.segment(eq_offset_[static_cast<std::size_t>(e)], preds_[static_cast<std::size_t>(e)].n_coef());
}

Eigen::MatrixXd Likelihood::linear_predictors(const Eigen::VectorXd& delta) const {
  if (delta.size() != n_coef_)
    throw InputError("coefficient vector has length " + std::to_string(delta.size()) + ", model needs " +
                     std::to_string(n_coef_));
  Eigen::MatrixXd eta(static_cast<Eigen::Index>(n_obs()), n_equations());
  for (int e = 0; e < n_equations(); ++e) eta.col(e) = preds_[static_cast<std::size_t>(e)].Z * equation_coef(delta, e);
  return eta;
}

void Likelihood::params_from_eta(const double* eta, std::array<MarginParams, 2>& margins, double& theta) const {
  margins[0] = MarginParams{};
  margins[1] = MarginParams{};
  theta = 0.0;
  for (std::size_t e = 0; e < roles_.size(); ++e) {
    const auto& r = roles_[e];
    if (r.is_theta())
      theta = theta_link(spec_.copula, eta[e]);
    else
      margins[r.margin][r.param] = link_apply(param_link(spec_.margin(r.margin), r.param), eta[e]);
  }
}

// Log-likelihood contribution of observation i and its gradient with
// respect to the E linear predictors.
double Likelihood::observation(std::size_t i, const double* eta, double* grad, std::size_t* clamps) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<MarginParams, 2> p;
  std::array<double, 3> dlink[2] = {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  double theta = 0.0, dtheta = 0.0;
  for (std::size_t e = 0; e < roles_.size(); ++e) {
    const auto& r = roles_[e];
    if (r.is_theta()) {
      theta = theta_link(spec_.copula, eta[e]);
      dtheta = theta_link_deriv(spec_.copula, eta[e]);
    } else {
      const LinkKind k = param_link(spec_.margin(r.margin), r.param);
      p[r.margin][r.param] = link_apply(k, eta[e]);
      dlink[r.margin][r.param] = link_deriv(k, eta[e]);
    }
  }
  const bool use[2] = {kind_ != Kind::margin2, kind_ != Kind::margin1};
  MarginDerivs md[2];
  double ll = 0.0;
  for (int m = 0; m < 2; ++m) {
    if (!use[m]) continue;
    const MarginFamily f = spec_.margin(m);
    for (int j = 0; j < n_params(f); ++j)
      if (!std::isfinite(p[m][j])) return nan;
    if ((f != MarginFamily::BE && !(p[m].sigma > 0.0)) ||
        (f == MarginFamily::BE && !(p[m].mu > 0.0 && p[m].mu < 1.0 && p[m].sigma > 0.0 && p[m].sigma < 1.0)))
      return nan;
    md[m] = margin_derivs_unchecked(f, y_[m][static_cast<Eigen::Index>(i)], p[m]);
    ll += md[m].logpdf;
  }
  double dlc[2] = {0.0, 0.0};
  double dlc_theta = 0.0;
  if (kind_ == Kind::joint) {
    if (!std::isfinite(theta)) return nan;
    double uv[2];
    bool clamped[2];
    for (int m = 0; m < 2; ++m) {
      uv[m] = clamp_prob(md[m].cdf);
      clamped[m] = uv[m] != md[m].cdf;
      if (clamped[m] && clamps) ++*clamps;
    }
    const LogDensityGrad g = copula_log_density_grad(spec_.copula, uv[0], uv[1], theta);
    ll += g.value;
    dlc[0] = clamped[0] ? 0.0 : g.du;
    dlc[1] = clamped[1] ? 0.0 : g.dv;
    dlc_theta = g.dtheta;
  }
  if (!std::isfinite(ll)) return nan;
  if (grad) {
    for (std::size_t e = 0; e < roles_.size(); ++e) {
      const auto& r = roles_[e];
      if (r.is_theta()) {
        grad[e] = dlc_theta * dtheta;
      } else {
        const auto& d = md[r.margin];
        grad[e] = (d.dlogpdf[r.param] + dlc[r.margin] * d.dcdf[r.param]) * dlink[r.margin][r.param];
      }
      if (!std::isfinite(grad[e])) return nan;
    }
  }
  return ll;
}

Likelihood::Evaluation Likelihood::evaluate(const Eigen::VectorXd& delta, int order) const {
  Evaluation out;
  const Eigen::MatrixXd eta = linear_predictors(delta);
  const int ne = n_equations();
  const auto n = static_cast<Eigen::Index>(n_obs());
  Eigen::MatrixXd g_eta = order >= 1 ? Eigen::MatrixXd(n, ne) : Eigen::MatrixXd();
  const int n_pairs = ne * (ne + 1) / 2;
  Eigen::MatrixXd h_eta = order >= 2 ? Eigen::MatrixXd(n, n_pairs) : Eigen::MatrixXd();
  std::vector<double> row(static_cast<std::size_t>(ne)), gi(static_cast<std::size_t>(ne)),
      gp(static_cast<std::size_t>(ne)), gm(static_cast<std::size_t>(ne));
  Eigen::MatrixXd hi(ne, ne);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int e = 0; e < ne; ++e) row[static_cast<std::size_t>(e)] = eta(i, e);
    const double li = observation(static_cast<std::size_t>(i), row.data(), order >= 1 ? gi.data() : nullptr,
                                  &out.clamp_events);
    if (!std::isfinite(li)) {
      out.finite = false;
      out.first_bad_obs = static_cast<std::size_t>(i);
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    total += li;
    if (order >= 1)
      for (int e = 0; e < ne; ++e) g_eta(i, e) = gi[static_cast<std::size_t>(e)];
    if (order >= 2) {
      for (int e = 0; e < ne; ++e) {
        const double x0 = row[static_cast<std::size_t>(e)];
        const double h = 1e-5 * (1.0 + std::fabs(x0));
        row[static_cast<std::size_t>(e)] = x0 + h;
        const double lp = observation(static_cast<std::size_t>(i), row.data(), gp.data(), nullptr);
        row[static_cast<std::size_t>(e)] = x0 - h;
        const double lm = observation(static_cast<std::size_t>(i), row.data(), gm.data(), nullptr);
        row[static_cast<std::size_t>(e)] = x0;
        if (!std::isfinite(lp) || !std::isfinite(lm)) {
          out.finite = false;
          out.first_bad_obs = static_cast<std::size_t>(i);
          out.value = -std::numeric_limits<double>::infinity();
          return out;
        }
        for (int f = 0; f < ne; ++f)
          hi(f, e) = (gp[static_cast<std::size_t>(f)] - gm[static_cast<std::size_t>(f)]) / (2.0 * h);
      }
      int k = 0;
      for (int e = 0; e < ne; ++e)
        for (int f = e; f < ne; ++f) h_eta(i, k++) = 0.5 * (hi(e, f) + hi(f, e));
    }
  }
  out.value = total;
  if (order >= 1) {
    out.gradient.resize(n_coef_);
    for (int e = 0; e < ne; ++e)
      out.gradient.segment(eq_offset_[static_cast<std::size_t>(e)], preds_[static_cast<std::size_t>(e)].n_coef()) =
          preds_[static_cast<std::size_t>(e)].Z.transpose() * g_eta.col(e);
  }
  if (order >= 2) {
    out.hessian.resize(n_coef_, n_coef_);
    int k = 0;
    for (int e = 0; e < ne; ++e)
      for (int f = e; f < ne; ++f, ++k) {
        const auto& ze = preds_[static_cast<std::size_t>(e)].Z;
        const auto& zf = preds_[static_cast<std::size_t>(f)].Z;
        const Eigen::MatrixXd blk = ze.transpose() * (zf.array().colwise() * h_eta.col(k).array()).matrix();
        out.hessian.block(eq_offset_[static_cast<std::size_t>(e)], eq_offset_[static_cast<std::size_t>(f)], ze.cols(),
                          zf.cols()) = blk;
        if (e != f)
          out.hessian.block(eq_offset_[static_cast<std::size_t>(f)], eq_offset_[static_cast<std::size_t>(e)],
                            zf.cols(), ze.cols()) = blk.transpose();
      }
  }
  return out;
}

}  // namespace bcam
