#include "bcam/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "bcam/config.hpp"
#include "bcam/data.hpp"
#include "bcam/errors.hpp"
#include "bcam/inference.hpp"
#include "bcam/persist.hpp"
#include "bcam/simulator.hpp"
#include "bcam/special.hpp"
#include "bcam/stats.hpp"

namespace bcam {

namespace {

namespace fs = std::filesystem;

/// Thrown when a fit finished without meeting the convergence rule.
struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw InputError("cannot write '" + p.string() + "'");
  return f;
}

// Rewrites data/adjacency lines with absolute paths so the persisted config
// stays usable from any directory.
std::string absolutize_paths(const std::string& text, const std::string& config_path) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      std::string key = line.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      if (key == "data" || key == "adjacency") {
        std::string val = line.substr(eq + 1);
        val = val.substr(0, val.find('#'));
        val.erase(0, val.find_first_not_of(" \t"));
        val.erase(val.find_last_not_of(" \t\r") + 1);
        if (!val.empty() && !fs::path(val).is_absolute())
          val = fs::absolute(fs::path(config_path).parent_path() / val).lexically_normal().string();
        line = key + " = " + val;
      }
    }
    out << line << "\n";
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A config's data/adjacency paths are relative to the config file.
std::string resolve(const std::string& config_path, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(config_path).parent_path() / p).string();
}

struct Model {
  ModelConfig cfg;
  Dataset data;
  std::optional<Adjacency> adjacency;
  std::unique_ptr<Likelihood> lik;
};

Model load_model(const std::string& config_path, const std::string& data_override, const std::string* config_text = nullptr) {
  Model m;
  const std::string text = config_text ? *config_text : read_file(config_path);
  // First pass without data to learn the data path; second pass validates columns.
  ModelConfig pre;
  std::string data_path = data_override;
  if (data_path.empty()) {
    pre = parse_config(text);
    if (pre.data_path.empty()) throw InputError("no data: give --data or a 'data =' line in the config");
    data_path = resolve(config_path, pre.data_path);
  }
  m.data = load_csv(data_path);
  m.cfg = parse_config(text, &m.data);
  if (!m.cfg.adjacency_path.empty()) m.adjacency = Adjacency::load(resolve(config_path, m.cfg.adjacency_path));
  m.lik = std::make_unique<Likelihood>(m.cfg.spec, m.data, m.adjacency ? &*m.adjacency : nullptr);
  return m;
}

void write_fitted(const fs::path& p, const Eigen::MatrixXd& fitted) {
  auto f = open_out(p);
  f << "row,mu1,mu2,sigma1,sigma2,nu1,nu2,theta,tau\n";
  for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
    f << i + 1;
    for (Eigen::Index j = 0; j < fitted.cols(); ++j) f << "," << num(fitted(i, j));
    f << "\n";
  }
}

// Reloads a persisted fit and checks it against the model it is applied to.
FitResult restore_fit(const SavedFit& s, const Likelihood& lik) {
  FitResult f = s.fit;
  if (f.delta.size() != lik.n_coef())
    throw InputError("saved fit has " + std::to_string(f.delta.size()) + " coefficients but the model has " +
                     std::to_string(lik.n_coef()) + "; config or data differ from the fit");
  f.fitted = fitted_parameters(lik, f.delta);
  return f;
}

int cmd_fit(const std::string& config, const std::string& data, const std::string& out_dir, std::uint64_t seed,
            bool seed_set, std::ostream& out) {
  Model m = load_model(config, data);
  FitOptions opt = m.cfg.options;
  if (seed_set) opt.seed = seed;
  const FitResult r = fit(*m.lik, opt);
  fs::create_directories(out_dir);
  save_fit((fs::path(out_dir) / "fit.bcam").string(), absolutize_paths(m.cfg.text, config), r);
  open_out(fs::path(out_dir) / "diagnostics.json") << diagnostics_json(r, *m.lik) << "\n";
  const std::string summary = summary_text(r, *m.lik);
  open_out(fs::path(out_dir) / "summary.txt") << summary;
  write_fitted(fs::path(out_dir) / "fitted.csv", r.fitted);
  out << summary;
  out << "wrote " << (fs::path(out_dir) / "fit.bcam").string() << "\n";
  if (r.step_failure) throw NumericalError("fit stopped: " + r.message + " (results persisted)");
  if (!r.converged) throw NotConverged("fit did not converge: " + r.message + " (results persisted, flagged)");
  return kExitOk;
}

int cmd_predict(const std::string& config, const std::string& fit_path, const std::string& data,
                const std::string& out_dir, double y1, double y2, const std::string& mode, const std::string& type,
                int nsim, double level, std::uint64_t seed, std::ostream& out) {
  const SavedFit saved = load_fit(fit_path);
  const std::string text = config.empty() ? saved.config_text : read_file(config);
  Model m = load_model(config.empty() ? fit_path : config, data, &text);
  const FitResult f = restore_fit(saved, *m.lik);
  std::vector<ProbMode> modes;
  if (mode == "both") modes = {ProbMode::copula, ProbMode::independence};
  else modes = {prob_mode_from_string(mode)};
  std::optional<PosteriorDraws> draws;
  if (nsim > 0) draws = posterior_draws(f, nsim, seed);
  fs::create_directories(out_dir);
  for (ProbMode pm : modes) {
    Target target;
    if (type == "joint") {
      target = [&](const Eigen::VectorXd& d) { return joint_prob_at(*m.lik, d, y1, y2, pm); };
    } else if (type == "y1_given_y2" || type == "y2_given_y1") {
      const auto dir = type == "y1_given_y2" ? CondDirection::y1_given_y2 : CondDirection::y2_given_y1;
      target = [&, dir](const Eigen::VectorXd& d) { return conditional_prob_at(*m.lik, d, y1, y2, dir, pm); };
    } else {
      throw InputError("unknown --type '" + type + "' (joint, y1_given_y2, y2_given_y1)");
    }
    IntervalSet iv;
    if (draws) {
      iv = interval(f, *draws, target, level);
    } else {
      iv.estimate = target(f.delta);
    }
    const std::string name = std::string("predict_") + (pm == ProbMode::copula ? "copula" : "independence") + ".csv";
    auto file = open_out(fs::path(out_dir) / name);
    file << "row,value,lo,hi\n";
    for (Eigen::Index i = 0; i < iv.estimate.size(); ++i)
      file << i + 1 << "," << num(iv.estimate[i]) << "," << (draws ? num(iv.lo[i]) : "") << ","
           << (draws ? num(iv.hi[i]) : "") << "\n";
    out << name << ": mean probability " << std::setprecision(6) << iv.estimate.mean() << " over "
        << iv.estimate.size() << " rows\n";
  }
  if (draws && draws->stabilized) out << "note: -H_p was stabilized before drawing coefficients\n";
  return kExitOk;
}

int cmd_diagnose(const std::string& config, const std::string& fit_path, const std::string& data,
                 const std::string& out_dir, int bins, std::ostream& out) {
  const SavedFit saved = load_fit(fit_path);
  const std::string text = config.empty() ? saved.config_text : read_file(config);
  Model m = load_model(config.empty() ? fit_path : config, data, &text);
  const FitResult f = restore_fit(saved, *m.lik);
  const ResidualSet rs = quantile_residuals(f, *m.lik);
  fs::create_directories(out_dir);
  {
    auto file = open_out(fs::path(out_dir) / "residuals.csv");
    file << "row,r1,r2\n";
    for (Eigen::Index i = 0; i < rs.r.rows(); ++i) file << i + 1 << "," << num(rs.r(i, 0)) << "," << num(rs.r(i, 1)) << "\n";
  }
  auto qq = open_out(fs::path(out_dir) / "qq.csv");
  qq << "margin,theoretical,sample\n";
  auto hist = open_out(fs::path(out_dir) / "hist.csv");
  hist << "margin,lo,hi,count,density\n";
  std::ostringstream report;
  report << "quantile residual diagnostics (n = " << rs.r.rows() << ", clamped cdf values: " << rs.clamp_events << ")\n";
  for (Eigen::Index k = 0; k < rs.r.cols(); ++k) {
    std::vector<double> r(rs.r.col(k).data(), rs.r.col(k).data() + rs.r.rows());
    std::sort(r.begin(), r.end());
    const double n = static_cast<double>(r.size());
    double dev = 0.0, dev_central = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double p = (static_cast<double>(i) + 0.5) / n;
      const double t = norm_quantile(p);
      qq << k + 1 << "," << num(t) << "," << num(r[i]) << "\n";
      dev = std::max(dev, std::fabs(r[i] - t));
      if (p >= 0.05 && p <= 0.95) dev_central = std::max(dev_central, std::fabs(r[i] - t));
    }
    const double lo = std::min(r.front(), -4.0), hi = std::max(r.back(), 4.0);
    const double w = (hi - lo) / bins;
    std::vector<int> cnt(static_cast<std::size_t>(bins), 0);
    for (double x : r) ++cnt[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>((x - lo) / w)))];
    for (int b = 0; b < bins; ++b)
      hist << k + 1 << "," << num(lo + b * w) << "," << num(lo + (b + 1) * w) << "," << cnt[static_cast<std::size_t>(b)]
           << "," << num(cnt[static_cast<std::size_t>(b)] / (n * w)) << "\n";
    const auto ks = ks_test_std_normal(r);
    report << "margin " << k + 1 << " (" << margin_tag(m.cfg.spec.margin(static_cast<int>(k))) << "): KS = "
           << std::setprecision(4) << ks.statistic << ", p = " << ks.p_value
           << "; max |Q-Q deviation| = " << dev << " (central 90%: " << dev_central << ")\n";
  }
  open_out(fs::path(out_dir) / "diagnose.txt") << report.str();
  out << report.str();
  return kExitOk;
}

SimDesign load_sim_design(const std::string& config) {
  return config.empty() ? reference_design() : parse_sim_config(read_file(config));
}

int cmd_simulate(const std::string& config, long n, std::uint64_t seed, bool seed_set, const std::string& out_dir,
                 std::ostream& out) {
  SimDesign d = load_sim_design(config);
  if (n > 0) d.n = static_cast<std::size_t>(n);
  if (seed_set) d.seed = seed;
  const Dataset data = simulate_dataset(d, std::uint64_t{0});
  fs::create_directories(out_dir);
  write_csv(data, (fs::path(out_dir) / "data.csv").string());
  const TruthValues tv = truth_values(d, data);
  auto f = open_out(fs::path(out_dir) / "truth.csv");
  f << "row,mu1,mu2,sigma1,sigma2,nu1,nu2,theta,tau\n";
  double tau_sum = 0.0;
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    const auto& p = tv.margins[i];
    const double tau = theta_to_tau(d.copula, tv.theta[i]);
    tau_sum += tau;
    auto nu = [&](int m) { return n_params(m == 0 ? d.margin1 : d.margin2) == 3 ? num(p[static_cast<std::size_t>(m)].nu) : ""; };
    f << i + 1 << "," << num(p[0].mu) << "," << num(p[1].mu) << "," << num(p[0].sigma) << "," << num(p[1].sigma)
      << "," << nu(0) << "," << nu(1) << "," << num(tv.theta[i]) << "," << num(tau) << "\n";
  }
  out << "simulated " << data.n_rows() << " rows (" << margin_tag(d.margin1) << ", " << margin_tag(d.margin2)
      << ", " << d.copula.tag() << "); mean true tau = " << std::setprecision(4)
      << tau_sum / static_cast<double>(data.n_rows()) << "\n";
  return kExitOk;
}

int cmd_simstudy(const std::string& config, long n, long replicates, bool full, std::uint64_t seed, bool seed_set,
                 int threads, const std::string& out_dir, std::ostream& out) {
  SimDesign d = load_sim_design(config);
  if (n > 0) d.n = static_cast<std::size_t>(n);
  if (replicates > 0) d.replicates = static_cast<std::size_t>(replicates);
  if (full) d.replicates = 250;
  if (seed_set) d.seed = seed;
  if (threads > 0) d.threads = threads;
  const SimReport rep = run_sim_study(d, [&](std::size_t r) { out << "replicate " << r + 1 << " done\n" << std::flush; });
  write_sim_report(rep, out_dir);
  out << sim_summary_text(rep);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Copula regression with additive predictors for all distribution parameters", "bcam"};
  app.require_subcommand(1);
  std::string config, data, out_dir = ".", fit_path, mode = "both", type = "joint";
  std::uint64_t seed = 1;
  long n = 0, replicates = 0;
  int nsim = 0, threads = 0, bins = 20;
  double y1 = 0.0, y2 = 0.0, level = 0.95;
  bool full = false;

  auto* fit_cmd = app.add_subcommand("fit", "fit a model and persist it with diagnostics");
  fit_cmd->add_option("--config", config, "model configuration file")->required();
  fit_cmd->add_option("--data", data, "CSV data (overrides the config)");
  fit_cmd->add_option("--out", out_dir, "output directory");
  auto* fit_seed = fit_cmd->add_option("--seed", seed, "random seed");

  auto* pred = app.add_subcommand("predict", "joint or conditional probabilities per row");
  pred->add_option("--config", config, "model configuration (default: the one stored in the fit)");
  pred->add_option("--fit", fit_path, "persisted fit")->required();
  pred->add_option("--data", data, "CSV data (overrides the config)");
  pred->add_option("--out", out_dir, "output directory");
  pred->add_option("--y1", y1, "threshold for y1")->required();
  pred->add_option("--y2", y2, "threshold for y2")->required();
  pred->add_option("--mode", mode, "copula, independence or both")->check(CLI::IsMember({"copula", "independence", "both"}));
  pred->add_option("--type", type, "joint, y1_given_y2 or y2_given_y1")
      ->check(CLI::IsMember({"joint", "y1_given_y2", "y2_given_y1"}));
  pred->add_option("--nsim", nsim, "posterior draws for intervals (0 = none)")->check(CLI::NonNegativeNumber);
  pred->add_option("--level", level, "interval level")->check(CLI::Range(0.0, 1.0));
  pred->add_option("--seed", seed, "random seed");

  auto* diag = app.add_subcommand("diagnose", "quantile residuals, Q-Q pairs and histograms");
  diag->add_option("--config", config, "model configuration (default: the one stored in the fit)");
  diag->add_option("--fit", fit_path, "persisted fit")->required();
  diag->add_option("--data", data, "CSV data (overrides the config)");
  diag->add_option("--out", out_dir, "output directory");
  diag->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "simulate a dataset from a design");
  sim->add_option("--config", config, "simulation design (default: reference design)");
  sim->add_option("--n", n, "number of rows");
  auto* sim_seed = sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out_dir, "output directory");

  auto* study = app.add_subcommand("simstudy", "simulation study with AIC/BIC copula selection");
  study->add_option("--config", config, "simulation design (default: reference design)");
  study->add_option("--n", n, "rows per replicate");
  study->add_option("--replicates", replicates, "number of replicates (default 25)");
  study->add_flag("--full", full, "run 250 replicates");
  auto* study_seed = study->add_option("--seed", seed, "random seed");
  study->add_option("--threads", threads, "worker threads");
  study->add_option("--out", out_dir, "output directory");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  try {
    if (*fit_cmd) return cmd_fit(config, data, out_dir, seed, fit_seed->count() > 0, out);
    if (*pred) return cmd_predict(config, fit_path, data, out_dir, y1, y2, mode, type, nsim, level, seed, out);
    if (*diag) return cmd_diagnose(config, fit_path, data, out_dir, bins, out);
    if (*sim) return cmd_simulate(config, n, seed, sim_seed->count() > 0, out_dir, out);
    if (*study)
      return cmd_simstudy(config, n, replicates, full, seed, study_seed->count() > 0, threads, out_dir, out);
  } catch (const NotConverged& e) {
    err << "warning: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {  // InputError, ConfigError
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::domain_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace bcam
