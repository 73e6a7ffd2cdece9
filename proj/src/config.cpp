#include "bcam/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bcam/expression.hpp"

namespace bcam {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

struct Entry {
  std::string value;
  int line = 0;
};

// key -> entry; duplicate keys are reported.
std::map<std::string, Entry> read_entries(const std::string& text, std::vector<std::string>& errors) {
  std::map<std::string, Entry> out;
  std::istringstream in(text);
  std::string raw;
  int ln = 0;
  while (std::getline(in, raw)) {
    ++ln;
    const std::string line = trim(raw.substr(0, raw.find('#')));  // '#' starts a comment
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(ln) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(ln) + ": empty key");
      continue;
    }
    if (out.count(key)) {
      errors.push_back("line " + std::to_string(ln) + ": duplicate key '" + key + "' (first on line " +
                       std::to_string(out[key].line) + ")");
      continue;
    }
    out[key] = {value, ln};
  }
  return out;
}

std::string at_line(const Entry& e, const std::string& key) {
  return "line " + std::to_string(e.line) + " (" + key + "): ";
}

double parse_number(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw InputError("'" + s + "' is not a number");
  }
  if (trim(s.substr(pos)).size()) throw InputError("'" + s + "' is not a number");
  return v;
}

long parse_integer(const std::string& s) {
  const double v = parse_number(s);
  if (v != std::floor(v)) throw InputError("'" + s + "' is not an integer");
  return static_cast<long>(v);
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError("'" + s + "' is not a boolean (true/false)");
}

void apply_option(FitOptions& o, const std::string& name, const std::string& value) {
  if (name == "max_outer_iters") o.max_outer_iters = static_cast<int>(parse_integer(value));
  else if (name == "tol") o.tol = parse_number(value);
  else if (name == "max_inner_iters") o.max_inner_iters = static_cast<int>(parse_integer(value));
  else if (name == "inner_grad_tol") o.inner_grad_tol = parse_number(value);
  else if (name == "initial_radius") o.initial_radius = parse_number(value);
  else if (name == "max_radius") o.max_radius = parse_number(value);
  else if (name == "grow") o.grow = parse_number(value);
  else if (name == "shrink") o.shrink = parse_number(value);
  else if (name == "min_radius") o.min_radius = parse_number(value);
  else if (name == "initial_lambda") o.initial_lambda = parse_number(value);
  else if (name == "lambda_min") o.log_lambda_min = std::log(parse_number(value));
  else if (name == "lambda_max") o.log_lambda_max = std::log(parse_number(value));
  else if (name == "max_smoothing_iters") o.max_smoothing_iters = static_cast<int>(parse_integer(value));
  else if (name == "fit_margins_first") o.fit_margins_first = parse_bool(value);
  else if (name == "seed") o.seed = static_cast<std::uint64_t>(parse_integer(value));
  else
    throw InputError("unknown option '" + name +
                     "' (valid: max_outer_iters, tol, max_inner_iters, inner_grad_tol, initial_radius, max_radius, "
                     "grow, shrink, min_radius, initial_lambda, lambda_min, lambda_max, max_smoothing_iters, "
                     "fit_margins_first, seed)");
  if (!(o.shrink > 0.0 && o.shrink < 1.0)) throw InputError("option shrink must lie in (0, 1)");
  if (!(o.grow > 1.0)) throw InputError("option grow must exceed 1");
  if (!(o.initial_radius > 0.0)) throw InputError("option initial_radius must be positive");
  if (!(o.tol > 0.0)) throw InputError("option tol must be positive");
  if (!(o.log_lambda_min < o.log_lambda_max)) throw InputError("lambda_min must be below lambda_max");
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

// Margins and copula shared by both config kinds; returns false when unusable.
bool read_families(const std::map<std::string, Entry>& kv, MarginFamily& m1, MarginFamily& m2, CopulaSpec& cop,
                   std::vector<std::string>& errors, bool required) {
  bool ok = true;
  if (auto it = kv.find("margins"); it != kv.end()) {
    const auto parts = split(it->second.value, ',');
    if (parts.size() != 2) {
      errors.push_back(at_line(it->second, "margins") + "expected two margin tags, e.g. 'N, GU'");
      ok = false;
    } else {
      try {
        m1 = margin_from_tag(parts[0]);
      } catch (const InputError& e) {
        errors.push_back(at_line(it->second, "margins") + e.what());
        ok = false;
      }
      try {
        m2 = margin_from_tag(parts[1]);
      } catch (const InputError& e) {
        errors.push_back(at_line(it->second, "margins") + e.what());
        ok = false;
      }
    }
  } else if (required) {
    errors.push_back("missing key 'margins'");
    ok = false;
  }
  if (auto it = kv.find("copula"); it != kv.end()) {
    try {
      cop = CopulaSpec::from_tag(it->second.value);
    } catch (const InputError& e) {
      errors.push_back(at_line(it->second, "copula") + e.what());
    }
  } else if (required) {
    errors.push_back("missing key 'copula'");
  }
  return ok;
}

// Reads prefix.<equation> entries for the given margins.
std::vector<std::string> read_equations(const std::map<std::string, Entry>& kv, const std::string& prefix,
                                        const ModelSpec& shape, std::vector<std::string>& errors,
                                        bool& present) {
  const auto names = shape.equation_names();
  std::vector<std::string> out(names.size());
  std::vector<std::string> found;
  for (const auto& [k, e] : kv)
    if (k.rfind(prefix, 0) == 0) found.push_back(k.substr(prefix.size()));
  present = !found.empty();
  if (!present) return out;
  bool bad_name = false;
  for (const auto& f : found)
    if (std::find(names.begin(), names.end(), f) == names.end()) {
      errors.push_back(at_line(kv.at(prefix + f), prefix + f) + "unknown equation '" + f + "' for margins " +
                       margin_tag(shape.margin1) + ", " + margin_tag(shape.margin2) + " (expected " +
                       join(names) + ")");
      bad_name = true;
    }
  if (found.size() != names.size() || bad_name) {
    errors.push_back("margins " + margin_tag(shape.margin1) + ", " + margin_tag(shape.margin2) + " expect " +
                     std::to_string(names.size()) + " equations (" + join(names) + "), found " +
                     std::to_string(found.size()));
  }
  for (std::size_t k = 0; k < names.size(); ++k)
    if (auto it = kv.find(prefix + names[k]); it != kv.end()) out[k] = it->second.value;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : InputError([&] {
        std::string s = "invalid configuration:";
        for (const auto& e : errors) s += "\n  " + e;
        return s;
      }()),
      errors_(std::move(errors)) {}

TermSpec parse_term(const std::string& raw) {
  const std::string t = trim(raw);
  const auto open = t.find('(');
  if (open == std::string::npos) {
    if (!is_identifier(t)) throw InputError("malformed term '" + t + "'");
    return {BlockKind::linear, t, 10};
  }
  if (t.back() != ')') throw InputError("malformed term '" + t + "': missing ')'");
  const std::string fn = trim(t.substr(0, open));
  const auto args = split(t.substr(open + 1, t.size() - open - 2), ',');
  if (args.empty() || !is_identifier(args[0])) throw InputError("term '" + t + "': expected a column name");
  TermSpec ts;
  ts.column = args[0];
  if (fn == "s") {
    ts.kind = BlockKind::spline;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const auto eq = args[i].find('=');
      if (eq == std::string::npos || trim(args[i].substr(0, eq)) != "k")
        throw InputError("term '" + t + "': unknown argument '" + args[i] + "' (only k=<int>)");
      const long k = parse_integer(trim(args[i].substr(eq + 1)));
      if (k < 4) throw InputError("term '" + t + "': spline needs k >= 4");
      ts.k = static_cast<int>(k);
    }
  } else if (fn == "re" || fn == "mrf") {
    if (args.size() != 1) throw InputError("term '" + t + "' takes a single column");
    ts.kind = fn == "re" ? BlockKind::random_effect : BlockKind::mrf;
  } else {
    throw InputError("term '" + t + "': unknown smoother '" + fn + "' (expected s, re or mrf)");
  }
  return ts;
}

PredictorSpec parse_predictor(const std::string& raw) {
  const std::string t = trim(raw);
  if (t.empty()) throw InputError("empty predictor (use 1 for intercept only)");
  PredictorSpec p;
  for (const auto& part : split(t, '+')) {
    if (part == "1") continue;
    p.terms.push_back(parse_term(part));
  }
  return p;
}

ModelConfig parse_config(const std::string& text, const Dataset* data) {
  std::vector<std::string> errors;
  const auto kv = read_entries(text, errors);
  ModelConfig cfg;
  cfg.text = text;
  const bool fam_ok = read_families(kv, cfg.spec.margin1, cfg.spec.margin2, cfg.spec.copula, errors, true);
  static const std::vector<std::string> known{"margins", "copula", "data", "adjacency", "response1", "response2"};
  for (const auto& [k, e] : kv) {
    if (k.rfind("eq.", 0) == 0) continue;
    if (k.rfind("option.", 0) == 0) {
      try {
        apply_option(cfg.options, k.substr(7), e.value);
      } catch (const InputError& ex) {
        errors.push_back(at_line(e, k) + ex.what());
      }
      continue;
    }
    if (std::find(known.begin(), known.end(), k) == known.end())
      errors.push_back(at_line(e, k) + "unknown key (valid: margins, copula, data, adjacency, response1, response2, "
                                       "eq.<equation>, option.<name>)");
  }
  if (auto it = kv.find("data"); it != kv.end()) cfg.data_path = it->second.value;
  if (auto it = kv.find("adjacency"); it != kv.end()) cfg.adjacency_path = it->second.value;
  if (auto it = kv.find("response1"); it != kv.end()) cfg.spec.response1 = it->second.value;
  if (auto it = kv.find("response2"); it != kv.end()) cfg.spec.response2 = it->second.value;

  if (fam_ok) {
    bool present = false;
    const auto eqs = read_equations(kv, "eq.", cfg.spec, errors, present);
    if (!present) errors.push_back("no equations given (keys eq." + join(cfg.spec.equation_names()) + ")");
    const auto names = cfg.spec.equation_names();
    for (std::size_t k = 0; k < eqs.size(); ++k) {
      PredictorSpec p;
      if (!eqs[k].empty()) {
        const auto& e = kv.at("eq." + names[k]);
        try {
          p = parse_predictor(eqs[k]);
        } catch (const InputError& ex) {
          errors.push_back(at_line(e, "eq." + names[k]) + ex.what());
        }
        for (const auto& t : p.terms) {
          if (t.kind == BlockKind::mrf && cfg.adjacency_path.empty())
            errors.push_back(at_line(e, "eq." + names[k]) + "term '" + t.label() + "' needs an adjacency file");
          if (data) {
            if (!data->has(t.column)) {
              errors.push_back(at_line(e, "eq." + names[k]) + "column '" + t.column + "' not found in the data");
            } else if (t.kind == BlockKind::spline && data->column(t.column).is_factor) {
              errors.push_back(at_line(e, "eq." + names[k]) + "spline term on factor column '" + t.column + "'");
            } else if ((t.kind == BlockKind::random_effect || t.kind == BlockKind::mrf) &&
                       !data->column(t.column).is_factor) {
              errors.push_back(at_line(e, "eq." + names[k]) + "term '" + t.label() +
                               "' needs a factor column (quote the values in the CSV)");
            }
          }
        }
      }
      cfg.spec.equations.push_back(p);
    }
    if (data) {
      for (const auto& r : {cfg.spec.response1, cfg.spec.response2}) {
        if (!data->has(r))
          errors.push_back("response column '" + r + "' not found in the data");
        else if (data->column(r).is_factor)
          errors.push_back("response column '" + r + "' is not numeric");
      }
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ModelConfig load_config(const std::string& path, const Dataset* data) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), data);
}

SimDesign parse_sim_config(const std::string& text) {
  std::vector<std::string> errors;
  const auto kv = read_entries(text, errors);
  SimDesign d = reference_design();
  const MarginFamily m1_0 = d.margin1, m2_0 = d.margin2;
  const bool fam_ok = read_families(kv, d.margin1, d.margin2, d.copula, errors, false);
  static const std::vector<std::string> known{"margins",     "copula",   "n",          "replicates", "seed",
                                              "threads",     "candidates", "correlation", "grid_points"};
  for (const auto& [k, e] : kv) {
    if (k.rfind("eta.", 0) == 0 || k.rfind("eq.", 0) == 0) continue;
    try {
      if (k.rfind("option.", 0) == 0) {
        apply_option(d.fit_options, k.substr(7), e.value);
      } else if (k == "n") {
        const long n = parse_integer(e.value);
        if (n < 10) throw InputError("n must be at least 10");
        d.n = static_cast<std::size_t>(n);
      } else if (k == "replicates") {
        const long r = parse_integer(e.value);
        if (r < 1) throw InputError("replicates must be positive");
        d.replicates = static_cast<std::size_t>(r);
      } else if (k == "seed") {
        d.seed = static_cast<std::uint64_t>(parse_integer(e.value));
      } else if (k == "threads") {
        d.threads = static_cast<int>(std::max(1L, parse_integer(e.value)));
      } else if (k == "correlation") {
        d.covariate_correlation = parse_number(e.value);
        if (!(d.covariate_correlation >= 0.0 && d.covariate_correlation < 1.0))
          throw InputError("correlation must lie in [0, 1)");
      } else if (k == "grid_points") {
        d.grid_points = static_cast<int>(parse_integer(e.value));
      } else if (k == "candidates") {
        d.candidates = split(e.value, ',');
        for (const auto& c : d.candidates) CopulaSpec::from_tag(c);
      } else if (std::find(known.begin(), known.end(), k) == known.end()) {
        throw InputError("unknown key");
      }
    } catch (const InputError& ex) {
      errors.push_back(at_line(e, k) + ex.what());
    }
  }
  if (fam_ok) {
    ModelSpec shape;
    shape.margin1 = d.margin1;
    shape.margin2 = d.margin2;
    shape.copula = d.copula;
    const bool margins_changed = d.margin1 != m1_0 || d.margin2 != m2_0;
    bool present = false;
    auto eta = read_equations(kv, "eta.", shape, errors, present);
    if (present) {
      for (std::size_t k = 0; k < eta.size(); ++k)
        if (!eta[k].empty()) {
          try {
            Expression::parse(eta[k]);
          } catch (const InputError& ex) {
            errors.push_back(std::string("eta.") + shape.equation_names()[k] + ": " + ex.what());
          }
        }
      d.eta = eta;
    } else if (margins_changed) {
      errors.push_back("margins differ from the reference design: give every eta.<equation>");
    }
    auto eqs = read_equations(kv, "eq.", shape, errors, present);
    if (present) {
      d.fit_equations.clear();
      for (std::size_t k = 0; k < eqs.size(); ++k) {
        try {
          d.fit_equations.push_back(eqs[k].empty() ? PredictorSpec{} : parse_predictor(eqs[k]));
        } catch (const InputError& ex) {
          errors.push_back(std::string("eq.") + shape.equation_names()[k] + ": " + ex.what());
        }
      }
    } else if (margins_changed) {
      d.fit_equations.assign(eta.size(), PredictorSpec{});
    }
  }
  if (!errors.empty()) throw ConfigError(errors);
  return d;
}

}  // namespace bcam
