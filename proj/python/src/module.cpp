#include <memory>
#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bcam/cli.hpp"
#include "bcam/config.hpp"
#include "bcam/copula.hpp"
#include "bcam/data.hpp"
#include "bcam/errors.hpp"
#include "bcam/estimator.hpp"
#include "bcam/inference.hpp"
#include "bcam/margins.hpp"
#include "bcam/persist.hpp"
#include "bcam/simulator.hpp"

namespace py = pybind11;
using namespace bcam;

namespace {

// Columns of a dict: float arrays become numeric columns, str lists factors.
Dataset dataset_from_dict(const py::dict& cols) {
  Dataset d;
  for (auto item : cols) {
    const auto name = py::cast<std::string>(item.first);
    const py::object v = py::reinterpret_borrow<py::object>(item.second);
    if (py::isinstance<py::list>(v) && py::len(v) > 0 && py::isinstance<py::str>(v.cast<py::list>()[0])) {
      d.add_factor(name, v.cast<std::vector<std::string>>());
    } else {
      auto arr = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(v);
      if (!arr || arr.ndim() != 1) throw InputError("column '" + name + "' must be a 1-d numeric array or a list of str");
      d.add_numeric(name, std::vector<double>(arr.data(), arr.data() + arr.size()));
    }
  }
  return d;
}

py::dict dataset_to_dict(const Dataset& d) {
  py::dict out;
  for (const auto& name : d.names()) {
    const auto& c = d.column(name);
    if (c.is_factor) out[py::str(name)] = py::cast(c.labels);
    else out[py::str(name)] = py::array_t<double>(static_cast<py::ssize_t>(c.numeric.size()), c.numeric.data());
  }
  return out;
}

/// A configured model bound to its data, plus the most recent fit.
class Model {
 public:
  Model(const std::string& config, const py::dict& data, const std::optional<std::string>& adjacency)
      : data_(dataset_from_dict(data)), cfg_(parse_config(config, &data_)) {
    if (adjacency) adj_ = Adjacency::parse(*adjacency);
    else if (!cfg_.adjacency_path.empty()) adj_ = Adjacency::load(cfg_.adjacency_path);
    lik_ = std::make_unique<Likelihood>(cfg_.spec, data_, adj_ ? &*adj_ : nullptr);
  }

  const FitResult& fit_model(std::optional<std::uint64_t> seed) {
    FitOptions opt = cfg_.options;
    if (seed) opt.seed = *seed;
    py::gil_scoped_release release;
    fit_ = fit(*lik_, opt);
    return *fit_;
  }

  const FitResult& result() const {
    if (!fit_) throw InputError("model has not been fitted; call fit() first");
    return *fit_;
  }

  void load(const std::string& path) {
    SavedFit s = load_fit(path);
    if (s.fit.delta.size() != lik_->n_coef()) throw InputError("saved fit does not match this model");
    s.fit.fitted = fitted_parameters(*lik_, s.fit.delta);
    fit_ = std::move(s.fit);
  }

  Eigen::MatrixXd interval_of(const Target& t, int nsim, double level, std::uint64_t seed) const {
    const auto draws = posterior_draws(result(), nsim, seed);
    const auto iv = interval(result(), draws, t, level);
    Eigen::MatrixXd out(iv.estimate.size(), 3);
    out << iv.estimate, iv.lo, iv.hi;
    return out;
  }

  Dataset data_;
  ModelConfig cfg_;
  std::optional<Adjacency> adj_;
  std::unique_ptr<Likelihood> lik_;
  std::optional<FitResult> fit_;
};

ProbMode to_mode(const std::string& s) { return prob_mode_from_string(s); }

CondDirection to_direction(const std::string& s) {
  if (s == "y1_given_y2") return CondDirection::y1_given_y2;
  if (s == "y2_given_y1") return CondDirection::y2_given_y1;
  throw InputError("direction must be 'y1_given_y2' or 'y2_given_y1'");
}

}  // namespace

PYBIND11_MODULE(_bcam, m) {
  m.doc() = "Copula regression with additive predictors for all distribution parameters";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  // Copulas.
  m.def("copula_tags", &CopulaSpec::all_tags);
  m.def("copula_cdf", py::vectorize([](std::string tag, double u, double v, double theta) {
          return copula_cdf(CopulaSpec::from_tag(tag), u, v, theta);
        }), py::arg("tag"), py::arg("u"), py::arg("v"), py::arg("theta"));
  m.def("copula_density", py::vectorize([](std::string tag, double u, double v, double theta) {
          return copula_density(CopulaSpec::from_tag(tag), u, v, theta);
        }), py::arg("tag"), py::arg("u"), py::arg("v"), py::arg("theta"));
  m.def("copula_h", py::vectorize([](std::string tag, double u, double v, double theta) {
          return copula_h(CopulaSpec::from_tag(tag), u, v, theta);
        }), py::arg("tag"), py::arg("u"), py::arg("v"), py::arg("theta"));
  m.def("theta_to_tau", [](const std::string& tag, double theta) { return theta_to_tau(CopulaSpec::from_tag(tag), theta); },
        py::arg("tag"), py::arg("theta"));
  m.def("tau_to_theta", [](const std::string& tag, double tau) { return tau_to_theta(CopulaSpec::from_tag(tag), tau); },
        py::arg("tag"), py::arg("tau"));
  m.def("sample_copula", [](const std::string& tag, double theta, std::size_t n, std::uint64_t seed) {
        const auto spec = CopulaSpec::from_tag(tag);
        spec.check_theta(theta);
        Rng rng = make_stream(seed, 0);
        Eigen::MatrixXd out(static_cast<Eigen::Index>(n), 2);
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
          const auto [u, v] = sample_copula_pair(spec, theta, rng);
          out(i, 0) = u;
          out(i, 1) = v;
        }
        return out;
      }, py::arg("tag"), py::arg("theta"), py::arg("n"), py::arg("seed") = 1);

  // Margins.
  m.def("margin_cdf", py::vectorize([](std::string tag, double y, double mu, double sigma, double nu) {
          return margin_cdf(margin_from_tag(tag), y, {mu, sigma, nu});
        }), py::arg("tag"), py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("nu") = 1.0);
  m.def("margin_pdf", py::vectorize([](std::string tag, double y, double mu, double sigma, double nu) {
          return margin_pdf(margin_from_tag(tag), y, {mu, sigma, nu});
        }), py::arg("tag"), py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("nu") = 1.0);
  m.def("margin_quantile", py::vectorize([](std::string tag, double p, double mu, double sigma, double nu) {
          return margin_quantile(margin_from_tag(tag), p, {mu, sigma, nu});
        }), py::arg("tag"), py::arg("p"), py::arg("mu"), py::arg("sigma"), py::arg("nu") = 1.0);

  // Data.
  m.def("load_csv", [](const std::string& path) { return dataset_to_dict(load_csv(path)); }, py::arg("path"));
  m.def("simulate", [](std::size_t n, std::uint64_t seed, const std::optional<std::string>& config) {
        SimDesign d = config ? parse_sim_config(*config) : reference_design();
        d.n = n;
        d.seed = seed;
        return dataset_to_dict(simulate_dataset(d, std::uint64_t{0}));
      }, py::arg("n") = 1000, py::arg("seed") = 1, py::arg("config") = py::none());

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("coefficients", &FitResult::delta)
      .def_readonly("smoothing", &FitResult::lambda)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("penalized_loglik", &FitResult::penalized_loglik)
      .def_property_readonly("edf", [](const FitResult& f) { return f.edf.total; })
      .def_property_readonly("edf_per_term", [](const FitResult& f) { return f.edf.per_term; })
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("outer_iterations", &FitResult::outer_iterations)
      .def_readonly("inner_iterations", &FitResult::inner_iterations)
      .def_readonly("grad_norm", &FitResult::grad_norm)
      .def_readonly("message", &FitResult::message)
      .def_readonly("warnings", &FitResult::warnings)
      .def_readonly("hessian", &FitResult::hessian)
      .def_readonly("fitted", &FitResult::fitted);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const py::dict&, const std::optional<std::string>&>(), py::arg("config"),
           py::arg("data"), py::arg("adjacency") = py::none())
      .def("fit", &Model::fit_model, py::arg("seed") = py::none(), py::return_value_policy::reference_internal)
      .def_property_readonly("result", &Model::result, py::return_value_policy::reference_internal)
      .def_property_readonly("n_coef", [](const Model& s) { return s.lik_->n_coef(); })
      .def_property_readonly("coef_names", [](const Model& s) {
        std::vector<std::string> out;
        const auto names = s.cfg_.spec.equation_names();
        for (std::size_t e = 0; e < s.lik_->predictors().size(); ++e)
          for (const auto& c : s.lik_->predictors()[e].coef_names()) out.push_back(names[e] + ":" + c);
        return out;
      })
      .def("loglik", [](const Model& s, const Eigen::VectorXd& delta) { return s.lik_->log_likelihood(delta); })
      .def("score", [](const Model& s, const Eigen::VectorXd& delta) { return s.lik_->score(delta); })
      .def("aic", [](const Model& s) { return information_criteria(s.result(), *s.lik_).aic; })
      .def("bic", [](const Model& s) { return information_criteria(s.result(), *s.lik_).bic; })
      .def("summary", [](const Model& s) { return summary_text(s.result(), *s.lik_); })
      .def("residuals", [](const Model& s) { return quantile_residuals(s.result(), *s.lik_).r; })
      .def("mean_tau", [](const Model& s) { return dependence_summary(s.result(), *s.lik_).mean_tau; })
      .def("joint_prob", [](const Model& s, double y1, double y2, const std::string& mode) {
            return joint_prob(s.result(), *s.lik_, y1, y2, to_mode(mode));
          }, py::arg("y1"), py::arg("y2"), py::arg("mode") = "copula")
      .def("conditional_prob", [](const Model& s, double y1, double y2, const std::string& direction,
                                  const std::string& mode) {
            return conditional_prob(s.result(), *s.lik_, y1, y2, to_direction(direction), to_mode(mode));
          }, py::arg("y1"), py::arg("y2"), py::arg("direction") = "y1_given_y2", py::arg("mode") = "copula")
      .def("joint_prob_interval", [](const Model& s, double y1, double y2, const std::string& mode, int nsim,
                                     double level, std::uint64_t seed) {
            const ProbMode pm = to_mode(mode);
            return s.interval_of([&](const Eigen::VectorXd& d) { return joint_prob_at(*s.lik_, d, y1, y2, pm); },
                                 nsim, level, seed);
          }, py::arg("y1"), py::arg("y2"), py::arg("mode") = "copula", py::arg("nsim") = 1000,
          py::arg("level") = 0.95, py::arg("seed") = 1)
      .def("save", [](const Model& s, const std::string& path) { save_fit(path, s.cfg_.text, s.result()); })
      .def("load", &Model::load, py::arg("path"));

  m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "bcam");
        py::scoped_ostream_redirect out;
        py::scoped_estream_redirect err;
        return run_cli(args, std::cout, std::cerr);
      }, py::arg("args"));
}
