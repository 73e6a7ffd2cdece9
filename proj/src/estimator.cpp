#include "bcam/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "bcam/errors.hpp"
#include "bcam/special.hpp"
#include "bcam/stats.hpp"

namespace bcam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Objective penalized_objective(const Likelihood& lik, const Eigen::MatrixXd& S) {
  return {[&lik, S](const Eigen::VectorXd& d, Eigen::VectorXd* g, Eigen::MatrixXd* H) {
    const int order = H ? 2 : (g ? 1 : 0);
    const auto ev = lik.evaluate(d, order);
    if (!ev.finite) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd sd = S * d;
    if (g) *g = ev.gradient - sd;
    if (H) *H = ev.hessian - S;
    return ev.value - 0.5 * d.dot(sd);
  }};
}

// Eigen-decomposition of I = -H with ridge shift and eigenvalue floor.
struct Metric {
  Eigen::MatrixXd info;       // stabilized I
  Eigen::MatrixXd sqrt_info;  // I^{1/2}
  Eigen::MatrixXd isqrt_info; // I^{-1/2}
  bool ridge = false;
  bool floored = false;
};

Metric make_metric(const Eigen::MatrixXd& H) {
  Metric m;
  const Eigen::MatrixXd info = -0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::MatrixXd& q = es.eigenvectors();
  if (lam.size() == 0) return m;
  if (lam.minCoeff() < 0.0) {
    lam.array() += std::fabs(lam.minCoeff()) + 1e-7;
    m.ridge = true;
  }
  const double floor = 1e-10 * std::max(lam.maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] < floor) {
      lam[i] = floor;
      m.floored = true;
    }
  m.info = q * lam.asDiagonal() * q.transpose();
  m.sqrt_info = q * lam.cwiseSqrt().asDiagonal() * q.transpose();
  m.isqrt_info = q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  return m;
}

struct SmoothingProblem {
  Metric metric;
  Eigen::VectorXd z;
  const std::vector<PenaltyTerm>* penalties;
  double n_tilde;

  double value(const Eigen::VectorXd& rho, Eigen::VectorXd* grad) const {
    Eigen::MatrixXd a = metric.info;
    for (std::size_t k = 0; k < penalties->size(); ++k) {
      const auto& t = (*penalties)[k];
      a.block(t.offset, t.offset, t.D.rows(), t.D.cols()) += std::exp(rho[static_cast<Eigen::Index>(k)]) * t.D;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd sz = metric.sqrt_info * z;
    const Eigen::VectorXd w = llt.solve(sz);               // B sqrt(I) z
    const Eigen::VectorXd r = z - metric.sqrt_info * w;    // z - A z
    const Eigen::MatrixXd b_info = llt.solve(metric.info); // B I
    const double tr = b_info.trace();
    const double v = r.squaredNorm() - n_tilde + 2.0 * tr;
    if (grad) {
      grad->resize(static_cast<Eigen::Index>(penalties->size()));
      const Eigen::VectorXd s = llt.solve(metric.sqrt_info * r);
      const Eigen::MatrixXd m = llt.solve(b_info.transpose());  // B I B
      for (std::size_t k = 0; k < penalties->size(); ++k) {
        const auto& t = (*penalties)[k];
        const double lam = std::exp(rho[static_cast<Eigen::Index>(k)]);
        const Eigen::Index o = t.offset, w_k = t.D.rows();
        const double d_rss = 2.0 * lam * s.segment(o, w_k).dot(t.D * w.segment(o, w_k));
        const double d_tr = -lam * (t.D.cwiseProduct(m.block(o, o, w_k, w_k))).sum();
        (*grad)[static_cast<Eigen::Index>(k)] = d_rss + 2.0 * d_tr;
      }
    }
    return v;
  }
};

SmoothingProblem make_smoothing_problem(const Eigen::VectorXd& delta, const Eigen::VectorXd& g,
                                        const Eigen::MatrixXd& H, const std::vector<PenaltyTerm>& penalties,
                                        double n_tilde) {
  SmoothingProblem sp;
  sp.metric = make_metric(H);
  sp.z = sp.metric.sqrt_info * delta + sp.metric.isqrt_info * g;
  sp.penalties = &penalties;
  sp.n_tilde = n_tilde;
  return sp;
}

Eigen::VectorXd clamp_rho(Eigen::VectorXd rho, const FitOptions& opt) {
  for (auto& r : rho) r = std::clamp(r, opt.log_lambda_min, opt.log_lambda_max);
  return rho;
}

// Coordinate-wise golden-section search, used when the quasi-Newton pass
// cannot make progress.
Eigen::VectorXd golden_section(const SmoothingProblem& sp, Eigen::VectorXd rho, const FitOptions& opt) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 3; ++sweep)
    for (Eigen::Index k = 0; k < rho.size(); ++k) {
      double a = std::max(opt.log_lambda_min, rho[k] - 6.0);
      double b = std::min(opt.log_lambda_max, rho[k] + 6.0);
      auto f = [&](double x) {
        Eigen::VectorXd r = rho;
        r[k] = x;
        return sp.value(r, nullptr);
      };
      double c = b - gr * (b - a), d = a + gr * (b - a);
      double fc = f(c), fd = f(d);
      for (int it = 0; it < 40 && b - a > 1e-4; ++it) {
        if (fc < fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - gr * (b - a);
          fc = f(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + gr * (b - a);
          fd = f(d);
        }
      }
      const double best = 0.5 * (a + b);
      if (f(best) < f(rho[k])) rho[k] = best;
    }
  return rho;
}

}  // namespace

// --- trust region ---------------------------------------------------------------

Eigen::VectorXd solve_trust_subproblem(const Eigen::VectorXd& g, const Eigen::MatrixXd& H, double radius) {
  const Eigen::Index p = g.size();
  if (p == 0 || g.norm() == 0.0) return Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd B = -0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::MatrixXd& q = es.eigenvectors();
  const Eigen::VectorXd a = q.transpose() * g;
  const double l1 = lam[0];
  auto step = [&](double mu) {
    Eigen::VectorXd c(p);
    for (Eigen::Index i = 0; i < p; ++i) c[i] = a[i] / (lam[i] + mu);
    return Eigen::VectorXd(q * c);
  };
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (l1 > 1e-14 * scale) {
    const Eigen::VectorXd newton = step(0.0);
    if (newton.norm() <= radius) return newton;
  }
  const double lo = std::max(0.0, -l1);
  // Hard case: g orthogonal to the lowest eigenspace.
  const double tol_eig = 1e-10 * scale;
  bool hard = true;
  for (Eigen::Index i = 0; i < p && lam[i] - l1 <= tol_eig; ++i)
    if (std::fabs(a[i]) > 1e-12 * a.norm()) hard = false;
  if (hard && l1 <= 1e-14 * scale) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i)
      if (lam[i] - l1 > tol_eig) c[i] = a[i] / (lam[i] + lo);
    const Eigen::VectorXd ph = q * c;
    if (ph.norm() <= radius) {
      const double tau = std::sqrt(std::max(0.0, radius * radius - ph.squaredNorm()));
      return ph + tau * q.col(0);
    }
  }
  auto norm_at = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      const double den = lam[i] + mu;
      if (den <= 0.0) {
        if (a[i] != 0.0) return std::numeric_limits<double>::infinity();
        continue;
      }
      s += (a[i] / den) * (a[i] / den);
    }
    return std::sqrt(s);
  };
  auto psi = [&](double mu) { return 1.0 / radius - 1.0 / norm_at(mu); };
  double hi = std::max(lo, a.norm() / radius - l1) + 1e-12 * scale;
  while (psi(hi) > 0.0) hi = 2.0 * hi + 1e-12;
  double left = lo;
  if (psi(left) <= 0.0) return step(left);
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(psi, left, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  Eigen::VectorXd out = step(r.second);
  const double nrm = out.norm();
  if (nrm > radius) out *= radius / nrm;
  return out;
}

TrustRegionStep trust_region_step(const Objective& obj, const Eigen::VectorXd& delta, double f0,
                                  const Eigen::VectorXd& g, const Eigen::MatrixXd& H, double radius,
                                  const FitOptions& opt) {
  TrustRegionStep out;
  out.delta = delta;
  out.value = f0;
  const Eigen::VectorXd p = solve_trust_subproblem(g, H, radius);
  const double predicted = g.dot(p) + 0.5 * p.dot(H * p);
  const Eigen::VectorXd cand = delta + p;
  const double f1 = obj.eval(cand, nullptr, nullptr);
  const double pnorm = p.norm();
  double ratio = -std::numeric_limits<double>::infinity();
  if (std::isfinite(f1)) ratio = predicted > 0.0 ? (f1 - f0) / predicted : (f1 > f0 ? 1.0 : -1.0);
  out.ratio = ratio;
  out.radius = radius;
  if (ratio < 0.25)
    out.radius = opt.shrink * radius;
  else if (ratio > 0.75 && pnorm >= 0.99 * radius)
    out.radius = std::min(opt.grow * radius, opt.max_radius);
  if (ratio > 0.0 && f1 >= f0) {
    out.accepted = true;
    out.delta = cand;
    out.value = f1;
  }
  out.failed = !out.accepted && out.radius < opt.min_radius;
  return out;
}

InnerResult maximize(const Objective& obj, Eigen::VectorXd delta, double radius, const FitOptions& opt) {
  InnerResult res;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  double f = obj.eval(delta, &g, &H);
  res.delta = delta;
  res.value = f;
  res.radius = radius;
  if (!std::isfinite(f)) {
    res.failed = true;
    return res;
  }
  for (int it = 0; it < opt.max_inner_iters; ++it) {
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm < opt.inner_grad_tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const auto st = trust_region_step(obj, delta, f, g, H, radius, opt);
    radius = st.radius;
    if (st.failed) {
      res.failed = true;
      break;
    }
    if (!st.accepted) continue;
    const double step_norm = (st.delta - delta).norm();
    const double gain = st.value - f;
    delta = st.delta;
    f = obj.eval(delta, &g, &H);
    // Stationary to working precision even if the gradient test is not met.
    if (gain <= 1e-13 * (1.0 + std::fabs(f)) && step_norm <= 1e-9 * (1.0 + delta.norm())) {
      res.grad_norm = g.lpNorm<Eigen::Infinity>();
      res.converged = res.grad_norm < 1e3 * opt.inner_grad_tol;
      break;
    }
  }
  res.delta = delta;
  res.value = f;
  res.radius = radius;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  return res;
}

// --- smoothing parameters ---------------------------------------------------------

double smoothing_criterion(const Eigen::VectorXd& delta, const Eigen::VectorXd& g, const Eigen::MatrixXd& H,
                           const std::vector<PenaltyTerm>& penalties, const Eigen::VectorXd& log_lambda,
                           double n_tilde, Eigen::VectorXd* grad) {
  const auto sp = make_smoothing_problem(delta, g, H, penalties, n_tilde);
  return sp.value(log_lambda, grad);
}

SmoothingResult select_smoothing(const Eigen::VectorXd& delta, const Eigen::VectorXd& g, const Eigen::MatrixXd& H,
                                 const std::vector<PenaltyTerm>& penalties, const Eigen::VectorXd& lambda0,
                                 double n_tilde, const FitOptions& opt) {
  SmoothingResult res;
  res.lambda = lambda0;
  if (penalties.empty()) return res;
  const auto sp = make_smoothing_problem(delta, g, H, penalties, n_tilde);
  res.ridge_applied = sp.metric.ridge;
  res.floor_applied = sp.metric.floored;
  const Eigen::Index k = static_cast<Eigen::Index>(penalties.size());
  Eigen::VectorXd rho = clamp_rho(lambda0.array().max(1e-300).log().matrix(), opt);
  Eigen::VectorXd gr;
  double v = sp.value(rho, &gr);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(k, k);
  bool stalled = false;
  for (int it = 0; it < opt.max_smoothing_iters; ++it) {
    res.iterations = it + 1;
    // Projected gradient: drop components pushing against an active bound.
    Eigen::VectorXd pg = gr;
    std::vector<bool> fixed(static_cast<std::size_t>(k), false);
    for (Eigen::Index j = 0; j < k; ++j)
      if ((rho[j] <= opt.log_lambda_min && gr[j] > 0.0) || (rho[j] >= opt.log_lambda_max && gr[j] < 0.0)) {
        fixed[static_cast<std::size_t>(j)] = true;
        pg[j] = 0.0;
      }
    if (pg.lpNorm<Eigen::Infinity>() < 1e-7 * (1.0 + std::fabs(v))) break;
    Eigen::VectorXd d = -hinv * pg;
    for (Eigen::Index j = 0; j < k; ++j)
      if (fixed[static_cast<std::size_t>(j)]) d[j] = 0.0;
    if (d.dot(pg) >= 0.0) {
      hinv.setIdentity();
      d = -pg;
    }
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax > 5.0) d *= 5.0 / dmax;
    double t = 1.0;
    Eigen::VectorXd rho_new, gr_new;
    double v_new = v;
    bool ok = false;
    for (int ls = 0; ls < 30; ++ls) {
      rho_new = clamp_rho(rho + t * d, opt);
      v_new = sp.value(rho_new, &gr_new);
      if (std::isfinite(v_new) && v_new <= v + 1e-4 * gr.dot(rho_new - rho)) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) {
      stalled = true;
      break;
    }
    const Eigen::VectorXd s = rho_new - rho;
    const Eigen::VectorXd y = gr_new - gr;
    const double sy = s.dot(y);
    const double dv = v - v_new;
    rho = rho_new;
    gr = gr_new;
    v = v_new;
    if (sy > 1e-12) {
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
      const double r = 1.0 / sy;
      hinv = (id - r * s * y.transpose()) * hinv * (id - r * y * s.transpose()) + r * s * s.transpose();
    }
    if (dv < 1e-10 * (1.0 + std::fabs(v))) break;
  }
  if (stalled) {
    const Eigen::VectorXd alt = golden_section(sp, rho, opt);
    const double va = sp.value(alt, nullptr);
    if (va < v) {
      rho = alt;
      v = va;
    }
  }
  res.lambda = rho.array().exp();
  res.criterion = v;
  return res;
}

// --- edf ---------------------------------------------------------------------------

EdfResult effective_df(const Eigen::MatrixXd& H, const Eigen::MatrixXd& S, const Likelihood& lik) {
  EdfResult out;
  const Metric m = make_metric(H);
  const Eigen::MatrixXd info = m.info.size() ? m.info : Eigen::MatrixXd(-H);
  const Eigen::MatrixXd f = (info + S).ldlt().solve(info);
  out.total = f.trace();
  for (const auto& t : lik.penalties()) out.per_term.push_back(f.diagonal().segment(t.offset, t.D.rows()).sum());
  for (int e = 0; e < lik.n_equations(); ++e)
    out.per_equation.push_back(f.diagonal()
                                   .segment(lik.equation_offsets()[static_cast<std::size_t>(e)],
                                            lik.predictors()[static_cast<std::size_t>(e)].n_coef())
                                   .sum());
  return out;
}

// --- starting values -----------------------------------------------------------------

MarginParams moment_start(MarginFamily f, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const double m = y.mean();
  const double sd = std::sqrt(std::max((y.array() - m).square().sum() / std::max(n - 1.0, 1.0), 1e-12));
  const Eigen::ArrayXd ly = (f == MarginFamily::BE || in_support(MarginFamily::GA, y.minCoeff()))
                                ? Eigen::ArrayXd(y.array().log())
                                : Eigen::ArrayXd(y.array());
  const double lm = ly.mean();
  const double lsd = std::sqrt(std::max((ly - lm).square().sum() / std::max(n - 1.0, 1.0), 1e-12));
  MarginParams p;
  switch (f) {
    case MarginFamily::N: p = {m, sd}; break;
    case MarginFamily::LO: p = {m, sd * std::sqrt(3.0) / kPi}; break;
    case MarginFamily::GU: {
      const double s = sd * std::sqrt(6.0) / kPi;
      p = {m + kEulerGamma * s, s};
      break;
    }
    case MarginFamily::rGU: {
      const double s = sd * std::sqrt(6.0) / kPi;
      p = {m - kEulerGamma * s, s};
      break;
    }
    case MarginFamily::LN: p = {lm, lsd}; break;
    case MarginFamily::GA: p = {m, sd / m}; break;
    case MarginFamily::iG: p = {m, std::sqrt(sd * sd / (m * m * m))}; break;
    case MarginFamily::WEI: {
      const double s = kPi / (std::sqrt(6.0) * lsd);
      p = {std::exp(lm + kEulerGamma / s), s};
      break;
    }
    case MarginFamily::BE: {
      const double mu = std::clamp(m, 0.01, 0.99);
      p = {mu, std::clamp(std::sqrt(sd * sd / (mu * (1.0 - mu))), 0.01, 0.99)};
      break;
    }
    case MarginFamily::DAGUM:
    case MarginFamily::SM: p = {std::exp(lm), kPi / (std::sqrt(3.0) * lsd), 1.0}; break;
  }
  return p;
}

StartValues starting_values(const Likelihood& lik, const FitOptions& opt) {
  StartValues sv;
  sv.delta = Eigen::VectorXd::Zero(lik.n_coef());
  sv.lambda = Eigen::VectorXd::Constant(lik.n_lambda(), opt.initial_lambda);
  const bool joint = lik.kind() == Likelihood::Kind::joint;
  // Method-of-moments intercepts.
  for (int e = 0; e < lik.n_equations(); ++e) {
    const auto r = lik.roles()[static_cast<std::size_t>(e)];
    if (r.is_theta()) continue;
    const MarginFamily f = lik.spec().margin(r.margin);
    const MarginParams p = moment_start(f, lik.response(r.margin));
    sv.delta[lik.equation_offsets()[static_cast<std::size_t>(e)]] = link_inverse(param_link(f, r.param), p[r.param]);
  }
  if (joint && opt.fit_margins_first) {
    FitOptions sub_opt = opt;
    sub_opt.fit_margins_first = false;
    for (int m = 0; m < 2; ++m) {
      const Likelihood sub = lik.restricted(m == 0 ? Likelihood::Kind::margin1 : Likelihood::Kind::margin2);
      try {
        const FitResult r = fit(sub, sub_opt);
        if (!r.converged || !std::isfinite(r.loglik)) throw NumericalError("margin fit did not converge");
        // Copy equation blocks and smoothing parameters back into the joint layout.
        std::size_t slot_sub = 0;
        for (int es = 0; es < sub.n_equations(); ++es) {
          const int ej = lik.equation_of(sub.roles()[static_cast<std::size_t>(es)]);
          sv.delta.segment(lik.equation_offsets()[static_cast<std::size_t>(ej)],
                           lik.predictors()[static_cast<std::size_t>(ej)].n_coef()) = sub.equation_coef(r.delta, es);
          for (std::size_t k = 0; k < lik.penalties().size(); ++k)
            if (lik.penalties()[k].equation == ej) sv.lambda[static_cast<Eigen::Index>(k)] = r.lambda[static_cast<Eigen::Index>(slot_sub++)];
        }
      } catch (const std::exception& ex) {
        sv.fallback = true;
        sv.notes.push_back(std::string("margin ") + std::to_string(m + 1) +
                           " start fit failed, using moment intercepts: " + ex.what());
      }
    }
  }
  const int et = lik.equation_of({-1, 0});
  if (et >= 0) {
    const auto& y1 = lik.response(0);
    const auto& y2 = lik.response(1);
    const double tau = kendall_tau(std::span<const double>(y1.data(), static_cast<std::size_t>(y1.size())),
                                   std::span<const double>(y2.data(), static_cast<std::size_t>(y2.size())));
    const double th = tau_to_theta(lik.spec().copula, tau);
    sv.delta[lik.equation_offsets()[static_cast<std::size_t>(et)]] = theta_link_inv(lik.spec().copula, th);
  }
  return sv;
}

// --- fit -----------------------------------------------------------------------------------

Eigen::MatrixXd fitted_parameters(const Likelihood& lik, const Eigen::VectorXd& delta) {
  const Eigen::MatrixXd eta = lik.linear_predictors(delta);
  const auto n = eta.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, 8, kNaN);
  const bool has_theta = lik.equation_of({-1, 0}) >= 0;
  std::array<MarginParams, 2> p;
  double th = 0.0;
  Eigen::VectorXd row(eta.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    row = eta.row(i).transpose();
    lik.params_from_eta(row.data(), p, th);
    for (const auto& r : lik.roles()) {
      if (r.is_theta()) continue;
      const int col = r.param == 0 ? r.margin : r.param == 1 ? 2 + r.margin : 4 + r.margin;
      out(i, col) = p[r.margin][r.param];
    }
    if (has_theta) {
      out(i, 6) = th;
      out(i, 7) = theta_to_tau(lik.spec().copula, th);
    }
  }
  return out;
}

FitResult fit(const Likelihood& lik, const FitOptions& opt, const std::optional<Eigen::VectorXd>& start,
              const std::optional<Eigen::VectorXd>& lambda_start) {
  FitResult res;
  Eigen::VectorXd delta;
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(lik.n_lambda(), opt.initial_lambda);
  if (start) {
    delta = *start;
  } else {
    const StartValues sv = starting_values(lik, opt);
    delta = sv.delta;
    lambda = sv.lambda;
    res.start_fallback = sv.fallback;
    res.warnings.insert(res.warnings.end(), sv.notes.begin(), sv.notes.end());
  }
  if (lambda_start) lambda = *lambda_start;
  if (delta.size() != lik.n_coef()) throw InputError("starting vector has the wrong length");
  for (const auto& p : lik.predictors())
    res.warnings.insert(res.warnings.end(), p.warnings.begin(), p.warnings.end());

  const double n_tilde = static_cast<double>(lik.n_equations()) * static_cast<double>(lik.n_obs());
  double radius = opt.initial_radius;
  double ll_prev = kNaN;
  bool inner_ok = false;
  for (int a = 0; a < opt.max_outer_iters; ++a) {
    res.outer_iterations = a + 1;
    const Eigen::MatrixXd S = lik.penalty_matrix(lambda);
    const InnerResult inner = maximize(penalized_objective(lik, S), delta, radius, opt);
    res.inner_iterations += inner.iterations;
    if (!std::isfinite(inner.value)) {
      res.step_failure = true;
      res.message = "log-likelihood not finite at the starting point";
      break;
    }
    delta = inner.delta;
    radius = std::max(inner.radius, 1e-3 * opt.initial_radius);
    inner_ok = inner.converged;
    if (inner.failed) {
      res.step_failure = true;
      res.message = "trust region radius underflow";
      break;
    }
    const double ll = lik.log_likelihood(delta);
    if (lik.n_lambda() == 0) {
      res.converged = inner_ok;
      res.last_relative_change = 0.0;
      break;
    }
    if (a > 0) {
      res.last_relative_change = std::fabs(ll - ll_prev) / (0.1 + std::fabs(ll));
      if (res.last_relative_change < opt.tol) {
        res.converged = inner_ok;
        break;
      }
    }
    ll_prev = ll;
    const auto ev = lik.evaluate(delta, 2);
    const auto sm = select_smoothing(delta, ev.gradient, ev.hessian, lik.penalties(), lambda, n_tilde, opt);
    if (sm.ridge_applied) res.warnings.push_back("outer step " + std::to_string(a + 1) + ": information matrix ridge-stabilized");
    res.lambda_history_criterion.push_back(sm.criterion);
    lambda = sm.lambda;
  }
  if (!res.converged && res.message.empty())
    res.message = inner_ok ? "outer iteration limit reached" : "inner trust-region solve did not converge";
  if (res.converged) res.message = "full convergence";

  res.delta = delta;
  res.lambda = lambda;
  const auto ev = lik.evaluate(delta, 2);
  const Eigen::MatrixXd S = lik.penalty_matrix(lambda);
  res.loglik = ev.value;
  res.clamp_events = ev.clamp_events;
  if (ev.finite) {
    res.hessian = ev.hessian;
    res.penalized_hessian = ev.hessian - S;
    res.gradient = ev.gradient - S * delta;
    res.grad_norm = res.gradient.lpNorm<Eigen::Infinity>();
    res.penalized_loglik = ev.value - 0.5 * delta.dot(S * delta);
    Eigen::LLT<Eigen::MatrixXd> llt(-res.penalized_hessian);
    res.hessian_negative_definite = llt.info() == Eigen::Success;
    res.edf = effective_df(ev.hessian, S, lik);
    res.fitted = fitted_parameters(lik, delta);
  } else {
    res.converged = false;
    res.message = "log-likelihood not finite at the final estimate";
  }
  if (res.clamp_events > 0)
    res.warnings.push_back(std::to_string(res.clamp_events) + " margin cdf values clamped away from 0/1");
  return res;
}

std::string diagnostics_json(const FitResult& fit, const Likelihood& lik) {
  nlohmann::json j;
  j["converged"] = fit.converged;
  j["message"] = fit.message;
  j["outer_iterations"] = fit.outer_iterations;
  j["inner_iterations"] = fit.inner_iterations;
  j["gradient_sup_norm"] = fit.grad_norm;
  j["relative_loglik_change"] = fit.last_relative_change;
  j["hessian_negative_definite"] = fit.hessian_negative_definite;
  j["clamp_events"] = fit.clamp_events;
  j["start_fallback"] = fit.start_fallback;
  j["loglik"] = fit.loglik;
  j["penalized_loglik"] = fit.penalized_loglik;
  j["edf_total"] = fit.edf.total;
  j["n"] = lik.n_obs();
  j["n_coef"] = lik.n_coef();
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t k = 0; k < lik.penalties().size(); ++k) {
    nlohmann::json t;
    t["term"] = lik.penalties()[k].name;
    t["lambda"] = fit.lambda.size() > static_cast<Eigen::Index>(k) ? fit.lambda[static_cast<Eigen::Index>(k)] : kNaN;
    t["edf"] = k < fit.edf.per_term.size() ? fit.edf.per_term[k] : kNaN;
    terms.push_back(t);
  }
  j["smooth_terms"] = terms;
  nlohmann::json eqs = nlohmann::json::array();
  const auto names = lik.spec().equation_names();
  const auto roles = lik.spec().roles();
  for (int e = 0; e < lik.n_equations(); ++e) {
    nlohmann::json q;
    for (std::size_t k = 0; k < roles.size(); ++k)
      if (roles[k] == lik.roles()[static_cast<std::size_t>(e)]) {
        q["equation"] = names[k];
        q["formula"] = lik.spec().equations[k].label();
      }
    q["edf"] = static_cast<std::size_t>(e) < fit.edf.per_equation.size() ? fit.edf.per_equation[static_cast<std::size_t>(e)] : kNaN;
    eqs.push_back(q);
  }
  j["equations"] = eqs;
  j["warnings"] = fit.warnings;
  return j.dump(2);
}

}  // namespace bcam
