#include "bcam/persist.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "bcam/errors.hpp"

namespace bcam {

namespace {

std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw InputError("fit file: malformed number '" + s + "'");
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

void put_text(std::ostringstream& os, const std::string& name, const std::string& text) {
  const auto ls = lines_of(text);
  os << "text " << name << " " << ls.size() << "\n";
  for (const auto& l : ls) os << l << "\n";
}

void put_vector(std::ostringstream& os, const std::string& name, const Eigen::VectorXd& v) {
  os << "vector " << name << " " << v.size() << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << hex(v[i]);
  os << "\n";
}

void put_matrix(std::ostringstream& os, const std::string& name, const Eigen::MatrixXd& m) {
  os << "matrix " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << hex(m(i, j));
    os << "\n";
  }
}

std::vector<std::string> words(const std::string& l) {
  std::istringstream in(l);
  std::vector<std::string> w;
  std::string s;
  while (in >> s) w.push_back(s);
  return w;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string serialize_fit(const std::string& config_text, const FitResult& f) {
  std::ostringstream os;
  os << "bcam-fit " << kFitFormatVersion << "\n";
  put_text(os, "config", config_text);
  os << "scalar loglik " << hex(f.loglik) << "\n";
  os << "scalar penalized_loglik " << hex(f.penalized_loglik) << "\n";
  os << "scalar edf_total " << hex(f.edf.total) << "\n";
  os << "scalar grad_norm " << hex(f.grad_norm) << "\n";
  os << "scalar last_relative_change " << hex(f.last_relative_change) << "\n";
  os << "count converged " << f.converged << "\n";
  os << "count hessian_negative_definite " << f.hessian_negative_definite << "\n";
  os << "count start_fallback " << f.start_fallback << "\n";
  os << "count step_failure " << f.step_failure << "\n";
  os << "count outer_iterations " << f.outer_iterations << "\n";
  os << "count inner_iterations " << f.inner_iterations << "\n";
  os << "count clamp_events " << f.clamp_events << "\n";
  put_vector(os, "delta", f.delta);
  put_vector(os, "lambda", f.lambda);
  put_vector(os, "edf_per_term", to_vector(f.edf.per_term));
  put_vector(os, "edf_per_equation", to_vector(f.edf.per_equation));
  put_vector(os, "gradient", f.gradient);
  put_vector(os, "criterion_history", to_vector(f.lambda_history_criterion));
  put_matrix(os, "hessian", f.hessian);
  put_matrix(os, "penalized_hessian", f.penalized_hessian);
  put_text(os, "message", f.message);
  std::string w;
  for (const auto& s : f.warnings) w += s + "\n";
  put_text(os, "warnings", w);
  os << "end\n";
  return os.str();
}

SavedFit deserialize_fit(const std::string& text) {
  const auto ls = lines_of(text);
  if (ls.empty()) throw InputError("fit file is empty");
  const auto head = words(ls[0]);
  if (head.size() != 2 || head[0] != "bcam-fit") throw InputError("not a fit file (missing 'bcam-fit' header)");
  SavedFit s;
  s.version = std::atoi(head[1].c_str());
  if (s.version != kFitFormatVersion)
    throw InputError("fit file version " + head[1] + " is not supported (expected " +
                     std::to_string(kFitFormatVersion) + ")");
  std::map<std::string, double> scalars;
  std::map<std::string, long> counts;
  std::map<std::string, Eigen::VectorXd> vectors;
  std::map<std::string, Eigen::MatrixXd> matrices;
  std::map<std::string, std::string> texts;
  std::size_t i = 1;
  bool ended = false;
  auto need = [&](std::size_t k) {
    if (i + k > ls.size()) throw InputError("fit file truncated at line " + std::to_string(i + 1));
  };
  while (i < ls.size()) {
    const auto w = words(ls[i]);
    const std::string where = "fit file line " + std::to_string(i + 1) + ": ";
    if (w.empty()) {
      ++i;
      continue;
    }
    if (w[0] == "end") {
      ended = true;
      break;
    }
    if (w.size() < 3) throw InputError(where + "malformed record");
    if (w[0] == "scalar") {
      scalars[w[1]] = unhex(w[2]);
      ++i;
    } else if (w[0] == "count") {
      counts[w[1]] = std::atol(w[2].c_str());
      ++i;
    } else if (w[0] == "text") {
      const auto n = static_cast<std::size_t>(std::atol(w[2].c_str()));
      need(n + 1);
      std::string t;
      for (std::size_t k = 0; k < n; ++k) t += ls[i + 1 + k] + "\n";
      texts[w[1]] = t;
      i += n + 1;
    } else if (w[0] == "vector") {
      const auto n = std::atol(w[2].c_str());
      need(2);
      const auto vals = words(ls[i + 1]);
      if (static_cast<long>(vals.size()) != n) throw InputError(where + "vector '" + w[1] + "' has the wrong length");
      Eigen::VectorXd v(n);
      for (long k = 0; k < n; ++k) v[k] = unhex(vals[static_cast<std::size_t>(k)]);
      vectors[w[1]] = v;
      i += 2;
    } else if (w[0] == "matrix") {
      if (w.size() < 4) throw InputError(where + "malformed matrix header");
      const long r = std::atol(w[2].c_str()), c = std::atol(w[3].c_str());
      need(static_cast<std::size_t>(r) + 1);
      Eigen::MatrixXd m(r, c);
      for (long a = 0; a < r; ++a) {
        const auto vals = words(ls[i + 1 + static_cast<std::size_t>(a)]);
        if (static_cast<long>(vals.size()) != c) throw InputError(where + "matrix '" + w[1] + "' has a short row");
        for (long b = 0; b < c; ++b) m(a, b) = unhex(vals[static_cast<std::size_t>(b)]);
      }
      matrices[w[1]] = m;
      i += static_cast<std::size_t>(r) + 1;
    } else {
      throw InputError(where + "unknown record type '" + w[0] + "'");
    }
  }
  if (!ended) throw InputError("fit file truncated (missing 'end')");
  auto vec = [&](const std::string& k) {
    if (!vectors.count(k)) throw InputError("fit file lacks '" + k + "'");
    return vectors[k];
  };
  auto stdvec = [&](const std::string& k) {
    const Eigen::VectorXd v = vec(k);
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  s.config_text = texts["config"];
  FitResult& f = s.fit;
  f.loglik = scalars["loglik"];
  f.penalized_loglik = scalars["penalized_loglik"];
  f.edf.total = scalars["edf_total"];
  f.grad_norm = scalars["grad_norm"];
  f.last_relative_change = scalars["last_relative_change"];
  f.converged = counts["converged"] != 0;
  f.hessian_negative_definite = counts["hessian_negative_definite"] != 0;
  f.start_fallback = counts["start_fallback"] != 0;
  f.step_failure = counts["step_failure"] != 0;
  f.outer_iterations = static_cast<int>(counts["outer_iterations"]);
  f.inner_iterations = static_cast<int>(counts["inner_iterations"]);
  f.clamp_events = static_cast<std::size_t>(counts["clamp_events"]);
  f.delta = vec("delta");
  f.lambda = vec("lambda");
  f.edf.per_term = stdvec("edf_per_term");
  f.edf.per_equation = stdvec("edf_per_equation");
  f.gradient = vec("gradient");
  f.lambda_history_criterion = stdvec("criterion_history");
  if (!matrices.count("hessian") || !matrices.count("penalized_hessian")) throw InputError("fit file lacks Hessians");
  f.hessian = matrices["hessian"];
  f.penalized_hessian = matrices["penalized_hessian"];
  f.message = texts["message"];
  if (!f.message.empty() && f.message.back() == '\n') f.message.pop_back();
  for (const auto& l : lines_of(texts["warnings"])) f.warnings.push_back(l);
  return s;
}

void save_fit(const std::string& path, const std::string& config_text, const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write fit file '" + path + "'");
  out << serialize_fit(config_text, fit);
  if (!out) throw InputError("error writing fit file '" + path + "'");
}

SavedFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fit file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_fit(ss.str());
}

}  // namespace bcam
