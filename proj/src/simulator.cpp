#include "bcam/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/tools/roots.hpp>

#include "bcam/errors.hpp"
#include "bcam/expression.hpp"
#include "bcam/inference.hpp"
#include "bcam/special.hpp"
#include "bcam/stats.hpp"

namespace bcam {

namespace {

std::atomic<std::uint64_t> g_resamples{0};

// Conditional inverse for the unrotated family.
double base_h_inverse(CopulaFamily f, double u, double w, double th) {
  switch (f) {
    case CopulaFamily::Clayton:
      return std::pow((std::pow(w, -th / (1.0 + th)) - 1.0) * std::pow(u, -th) + 1.0, -1.0 / th);
    case CopulaFamily::Frank:
      return -std::log1p(w * std::expm1(-th) / (w + (1.0 - w) * std::exp(-th * u))) / th;
    case CopulaFamily::Gaussian:
      return norm_cdf(th * norm_quantile(u) + std::sqrt(1.0 - th * th) * norm_quantile(w));
    case CopulaFamily::FGM: {
      const double a = th * (1.0 - 2.0 * u);
      if (std::fabs(a) < 1e-12) return w;
      const double b = 1.0 + a;
      return 2.0 * w / (b + std::sqrt(b * b - 4.0 * a * w));
    }
    default: break;
  }
  const CopulaSpec base(f);
  auto g = [&](double v) { return copula_h(base, u, v, th) - w; };
  const double lo = 0.0, hi = 1.0;
  const double glo = g(lo), ghi = g(hi);
  if (glo > 0.0 || ghi < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      g, lo, hi, glo, ghi, [](double a, double b) { return std::fabs(b - a) <= 1e-12; }, iters);
  return 0.5 * (r.first + r.second);
}

bool valid_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

double copula_h_inverse(const CopulaSpec& spec, double u, double w, double theta) {
  spec.check_theta(theta);
  // Rotations map onto the base family: 90 -> (1-u, v; -theta), 180 ->
  // (1-u, 1-v; theta), 270 -> (u, 1-v; -theta).
  switch (spec.rotation) {
    case Rotation::deg0: return base_h_inverse(spec.family, u, w, theta);
    case Rotation::deg90: return base_h_inverse(spec.family, 1.0 - u, w, -theta);
    case Rotation::deg180: return 1.0 - base_h_inverse(spec.family, 1.0 - u, 1.0 - w, theta);
    case Rotation::deg270: return 1.0 - base_h_inverse(spec.family, u, 1.0 - w, -theta);
  }
  return w;
}

std::pair<double, double> sample_copula_pair(const CopulaSpec& spec, double theta, Rng& rng) {
  spec.check_theta(theta);
  const bool neg = spec.negative_rotation();
  const double th = neg ? -theta : theta;
  for (;;) {
    const double u = uniform01(rng);
    const double w = uniform01(rng);
    const double v = base_h_inverse(spec.family, u, w, th);
    if (!valid_unit(v)) {
      ++g_resamples;
      continue;
    }
    switch (spec.rotation) {
      case Rotation::deg0: return {u, v};
      case Rotation::deg90: return {1.0 - u, v};
      case Rotation::deg180: return {1.0 - u, 1.0 - v};
      case Rotation::deg270: return {u, 1.0 - v};
    }
  }
}

std::uint64_t sampler_resample_count() { return g_resamples.load(); }

ModelSpec SimDesign::model(const std::string& copula_tag) const {
  ModelSpec s;
  s.margin1 = margin1;
  s.margin2 = margin2;
  s.copula = CopulaSpec::from_tag(copula_tag);
  s.equations = fit_equations;
  s.validate();
  return s;
}

SimDesign reference_design(std::size_t n, std::size_t replicates, std::uint64_t seed) {
  SimDesign d;
  d.margin1 = MarginFamily::iG;
  d.margin2 = MarginFamily::SM;
  d.copula = CopulaSpec::from_tag("J0");
  // Order: mu1, mu2, sigma1, sigma2, nu2, theta.
  d.eta = {"0.5 - 1.25*x2 - 0.8*x3",
           "0.1 - 0.9*x1 + x2*sin(3*x2)",
           "1.8",
           "0.1",
           "0.2 + x3",
           "0.2 + 0.7*x1 + x2 + exp(-3*(x2 - 0.5)^2)"};
  const TermSpec x1{BlockKind::linear, "x1"}, x2{BlockKind::linear, "x2"}, x3{BlockKind::linear, "x3"};
  const TermSpec s2{BlockKind::spline, "x2", 10};
  d.fit_equations = {PredictorSpec{{x2, x3}}, PredictorSpec{{x1, s2}}, PredictorSpec{}, PredictorSpec{},
                     PredictorSpec{{x3}},     PredictorSpec{{x1, s2}}};
  d.n = n;
  d.replicates = replicates;
  d.candidates = {"J0", "J180", "C0", "C180", "G0", "G180", "F", "N"};
  d.seed = seed;
  return d;
}

TruthValues truth_values(const SimDesign& design, const Dataset& cov) {
  ModelSpec shape;
  shape.margin1 = design.margin1;
  shape.margin2 = design.margin2;
  shape.copula = design.copula;
  const auto roles = shape.roles();
  const auto names = shape.equation_names();
  if (design.eta.size() != roles.size())
    throw InputError("simulation design: expected " + std::to_string(roles.size()) + " eta expressions, got " +
                     std::to_string(design.eta.size()));
  std::vector<Expression> ex;
  for (const auto& t : design.eta) ex.push_back(Expression::parse(t));
  for (std::size_t k = 0; k < ex.size(); ++k)
    for (const auto& v : ex[k].variables())
      if (!cov.has(v)) throw InputError("eta expression for " + names[k] + " uses unknown covariate '" + v + "'");
  const std::size_t n = cov.n_rows();
  TruthValues tv;
  tv.margins.resize(n);
  tv.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto lookup = [&](const std::string& name) { return cov.numeric(name)[i]; };
    auto& mp = tv.margins[i];
    for (std::size_t k = 0; k < roles.size(); ++k) {
      const double eta = ex[k].eval(lookup);
      const auto r = roles[k];
      try {
        if (!std::isfinite(eta)) throw DomainError("non-finite value");
        if (r.is_theta()) {
          tv.theta[i] = theta_link(design.copula, eta);
          design.copula.check_theta(tv.theta[i]);
        } else {
          const auto f = r.margin == 0 ? design.margin1 : design.margin2;
          mp[static_cast<std::size_t>(r.margin)][r.param] = link_apply(param_link(f, r.param), eta);
        }
      } catch (const DomainError& e) {
        throw DomainError("eta expression for " + names[k] + " ('" + design.eta[k] + "') is out of range at row " +
                          std::to_string(i + 1) + ": " + e.what());
      }
    }
    for (int m = 0; m < 2; ++m) {
      try {
        check_params(m == 0 ? design.margin1 : design.margin2, mp[static_cast<std::size_t>(m)]);
      } catch (const DomainError& e) {
        throw DomainError("margin " + std::to_string(m + 1) + " parameters out of range at row " +
                          std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return tv;
}

Dataset simulate_covariates(const SimDesign& design, Rng& rng) {
  const double r = design.covariate_correlation;
  if (!(r >= 0.0 && r < 1.0)) throw InputError("covariate correlation must lie in [0, 1)");
  // Equicorrelated normals: z_j = sqrt(r) c + sqrt(1 - r) e_j.
  std::normal_distribution<double> nd;
  std::vector<double> x1(design.n), x2(design.n), x3(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    const double c = nd(rng);
    const double a = std::sqrt(r) * c + std::sqrt(1.0 - r) * nd(rng);
    const double b = std::sqrt(r) * c + std::sqrt(1.0 - r) * nd(rng);
    const double d = std::sqrt(r) * c + std::sqrt(1.0 - r) * nd(rng);
    x1[i] = norm_cdf(a);
    x2[i] = norm_cdf(b);
    x3[i] = norm_cdf(d) >= 0.5 ? 1.0 : 0.0;
  }
  Dataset out;
  out.add_numeric("x1", x1);
  out.add_numeric("x2", x2);
  out.add_numeric("x3", x3);
  return out;
}

Dataset simulate_dataset(const SimDesign& design, Rng& rng) {
  if (design.n == 0) throw InputError("simulation design: n must be positive");
  Dataset d = simulate_covariates(design, rng);
  const TruthValues tv = truth_values(design, d);
  std::vector<double> y1(design.n), y2(design.n);
  for (std::size_t i = 0; i < design.n; ++i) {
    const auto [u, v] = sample_copula_pair(design.copula, tv.theta[i], rng);
    y1[i] = margin_quantile(design.margin1, u, tv.margins[i][0]);
    y2[i] = margin_quantile(design.margin2, v, tv.margins[i][1]);
  }
  d.add_numeric("y1", y1);
  d.add_numeric("y2", y2);
  return d;
}

Dataset simulate_dataset(const SimDesign& design, std::uint64_t replicate) {
  Rng rng = make_stream(design.seed, replicate);
  return simulate_dataset(design, rng);
}

SimReport run_sim_study(const SimDesign& design, const std::function<void(std::size_t)>& on_replicate_done) {
  if (design.candidates.empty()) throw InputError("simulation study: candidate list is empty");
  for (const auto& c : design.candidates) CopulaSpec::from_tag(c);
  SimReport rep;
  rep.candidates = design.candidates;
  rep.reference = design.candidates.front();
  for (const auto& c : design.candidates)
    if (c == design.copula.tag()) rep.reference = c;
  const int gp = std::max(design.grid_points, 2);
  rep.grid = Eigen::VectorXd::LinSpaced(gp, 0.0, 1.0);
  rep.replicates.resize(design.replicates);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t r = next++;
      if (r >= design.replicates) return;
      ReplicateRecord rec;
      rec.index = r;
      const Dataset data = simulate_dataset(design, static_cast<std::uint64_t>(r));
      // Margin starts are shared by every candidate; only the theta intercept differs.
      std::optional<StartValues> sv;
      double tau_hat = 0.0;
      for (const auto& tag : design.candidates) {
        CandidateFit cf;
        cf.tag = tag;
        try {
          const Likelihood lik(design.model(tag), data);
          if (!sv) {
            sv = starting_values(lik, design.fit_options);
            const auto& a = lik.response(0);
            const auto& b = lik.response(1);
            tau_hat = kendall_tau(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                                  std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
          }
          Eigen::VectorXd start = sv->delta;
          const int et = lik.equation_of({-1, 0});
          start[lik.equation_offsets()[static_cast<std::size_t>(et)]] =
              theta_link_inv(lik.spec().copula, tau_to_theta(lik.spec().copula, tau_hat));
          const FitResult fr = fit(lik, design.fit_options, start, sv->lambda);
          if (!std::isfinite(fr.loglik)) throw NumericalError(fr.message);
          const auto ic = information_criteria(fr, lik);
          cf.ok = true;
          cf.converged = fr.converged;
          cf.loglik = fr.loglik;
          cf.edf = fr.edf.total;
          cf.aic = ic.aic;
          cf.bic = ic.bic;
          if (tag == rep.reference) {
            rec.reference_ok = true;
            rec.coef = fr.delta;
            rec.mean_tau_fitted = fr.fitted.col(7).mean();
            std::vector<Eigen::VectorXd> curves;
            std::vector<std::string> names;
            const auto eq_names = lik.spec().equation_names();
            Dataset grid;
            std::vector<double> g(rep.grid.data(), rep.grid.data() + rep.grid.size());
            for (int e = 0; e < lik.n_equations(); ++e) {
              const auto& pred = lik.predictors()[static_cast<std::size_t>(e)];
              for (std::size_t b = 0; b < pred.blocks.size(); ++b) {
                const auto& blk = pred.blocks[b];
                if (blk.kind != BlockKind::spline) continue;
                Dataset gd;
                gd.add_numeric(blk.column, g);
                const auto off = lik.equation_offsets()[static_cast<std::size_t>(e)] + pred.offsets[b];
                curves.push_back(blk.basis(gd) * fr.delta.segment(off, blk.width()));
                names.push_back(eq_names[static_cast<std::size_t>(e)] + ":" + blk.name);
              }
            }
            rec.smooths.resize(gp, static_cast<Eigen::Index>(curves.size()));
            for (std::size_t k = 0; k < curves.size(); ++k) rec.smooths.col(static_cast<Eigen::Index>(k)) = curves[k];
            std::lock_guard<std::mutex> lock(mu);
            if (rep.coef_names.empty()) {
              for (int e = 0; e < lik.n_equations(); ++e)
                for (const auto& cn : lik.predictors()[static_cast<std::size_t>(e)].coef_names())
                  rep.coef_names.push_back(eq_names[static_cast<std::size_t>(e)] + ":" + cn);
              rep.smooth_names = names;
            }
          }
        } catch (const std::exception& ex) {
          cf.ok = false;
          cf.error = ex.what();
        }
        rec.fits.push_back(cf);
      }
      double best_aic = std::numeric_limits<double>::infinity(), best_bic = best_aic;
      for (const auto& cf : rec.fits) {
        if (!cf.ok) continue;
        if (cf.aic < best_aic) {
          best_aic = cf.aic;
          rec.aic_choice = cf.tag;
        }
        if (cf.bic < best_bic) {
          best_bic = cf.bic;
          rec.bic_choice = cf.tag;
        }
      }
      rep.replicates[r] = std::move(rec);
      if (on_replicate_done) {
        std::lock_guard<std::mutex> lock(mu);
        on_replicate_done(r);
      }
    }
  };
  const int nt = std::max(1, std::min<int>(design.threads, static_cast<int>(design.replicates)));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Tallies merged in replicate order.
  std::size_t counted_aic = 0, counted_bic = 0;
  for (const auto& c : design.candidates) rep.aic_share[c] = rep.bic_share[c] = 0.0;
  for (const auto& rec : rep.replicates) {
    for (const auto& cf : rec.fits)
      if (!cf.ok) ++rep.failed_fits;
    if (!rec.aic_choice.empty()) {
      rep.aic_share[rec.aic_choice] += 1.0;
      ++counted_aic;
    }
    if (!rec.bic_choice.empty()) {
      rep.bic_share[rec.bic_choice] += 1.0;
      ++counted_bic;
    }
  }
  for (auto& [k, v] : rep.aic_share) v = counted_aic ? v / static_cast<double>(counted_aic) : 0.0;
  for (auto& [k, v] : rep.bic_share) v = counted_bic ? v / static_cast<double>(counted_bic) : 0.0;
  return rep;
}

std::string sim_summary_text(const SimReport& rep) {
  std::ostringstream os;
  os << "replicates: " << rep.replicates.size() << "   failed candidate fits: " << rep.failed_fits << "\n\n";
  os << std::left << std::setw(10) << "copula" << std::right << std::setw(10) << "AIC" << std::setw(10) << "BIC" << "\n";
  for (const auto& c : rep.candidates)
    os << std::left << std::setw(10) << c << std::right << std::fixed << std::setprecision(3) << std::setw(10)
       << rep.aic_share.at(c) << std::setw(10) << rep.bic_share.at(c) << "\n";
  os.unsetf(std::ios::fixed);
  std::size_t ok = 0;
  Eigen::VectorXd mean;
  for (const auto& r : rep.replicates)
    if (r.reference_ok) {
      mean = ok ? Eigen::VectorXd(mean + r.coef) : r.coef;
      ++ok;
    }
  if (ok) {
    mean /= static_cast<double>(ok);
    os << "\nmean " << rep.reference << " coefficients over " << ok << " replicates\n";
    for (std::size_t j = 0; j < rep.coef_names.size(); ++j)
      if (rep.coef_names[j].find("s(") == std::string::npos)
        os << "  " << std::left << std::setw(28) << rep.coef_names[j] << std::right << std::setprecision(6)
           << std::setw(12) << mean[static_cast<Eigen::Index>(j)] << "\n";
  }
  return os.str();
}

void write_sim_report(const SimReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw InputError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("selection.csv");
    f << "copula,aic_share,bic_share\n";
    for (const auto& c : rep.candidates) f << c << "," << fmt(rep.aic_share.at(c)) << "," << fmt(rep.bic_share.at(c)) << "\n";
  }
  {
    auto f = open("fits.csv");
    f << "replicate,copula,ok,converged,loglik,edf,aic,bic\n";
    for (const auto& r : rep.replicates)
      for (const auto& cf : r.fits)
        f << r.index << "," << cf.tag << "," << cf.ok << "," << cf.converged << "," << fmt(cf.loglik) << ","
          << fmt(cf.edf) << "," << fmt(cf.aic) << "," << fmt(cf.bic) << "\n";
  }
  {
    auto f = open("coefficients.csv");
    f << "replicate";
    for (const auto& n : rep.coef_names) f << ",\"" << n << "\"";
    f << "\n";
    for (const auto& r : rep.replicates) {
      if (!r.reference_ok) continue;
      f << r.index;
      for (Eigen::Index j = 0; j < r.coef.size(); ++j) f << "," << fmt(r.coef[j]);
      f << "\n";
    }
  }
  {
    auto f = open("smooths.csv");
    f << "replicate,term,x,value\n";
    for (const auto& r : rep.replicates) {
      if (!r.reference_ok) continue;
      for (Eigen::Index k = 0; k < r.smooths.cols(); ++k)
        for (Eigen::Index i = 0; i < r.smooths.rows(); ++i)
          f << r.index << ",\"" << rep.smooth_names[static_cast<std::size_t>(k)] << "\"," << fmt(rep.grid[i]) << ","
            << fmt(r.smooths(i, k)) << "\n";
    }
  }
  auto f = open("summary.txt");
  f << sim_summary_text(rep);
}

}  // namespace bcam
