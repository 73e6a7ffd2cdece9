#include "bcam/data.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bcam/errors.hpp"

namespace bcam {

void Dataset::check_length(const std::string& name, std::size_t n) {
  if (has(name)) throw InputError("duplicate column '" + name + "'");
  if (!columns_.empty() && n != n_rows_)
    throw InputError("column '" + name + "' has " + std::to_string(n) + " rows, expected " +
                     std::to_string(n_rows_));
  n_rows_ = n;
}

void Dataset::add_numeric(const std::string& name, std::vector<double> values) {
  check_length(name, values.size());
  Column c;
  c.name = name;
  c.numeric = std::move(values);
  columns_.push_back(std::move(c));
}

void Dataset::add_factor(const std::string& name, std::vector<std::string> labels) {
  check_length(name, labels.size());
  Column c;
  c.name = name;
  c.is_factor = true;
  c.labels = std::move(labels);
  columns_.push_back(std::move(c));
}

bool Dataset::has(const std::string& name) const {
  for (const auto& c : columns_)
    if (c.name == name) return true;
  return false;
}

const Column& Dataset::column(const std::string& name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw InputError("no column named '" + name + "'");
}

const std::vector<double>& Dataset::numeric(const std::string& name) const {
  const Column& c = column(name);
  if (c.is_factor) throw InputError("column '" + name + "' is a factor, expected numeric");
  return c.numeric;
}

const std::vector<std::string>& Dataset::factor(const std::string& name) const {
  const Column& c = column(name);
  if (!c.is_factor) throw InputError("column '" + name + "' is numeric, expected a factor");
  return c.labels;
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  for (const auto& c : columns_) {
    if (c.is_factor) {
      std::vector<std::string> l;
      l.reserve(rows.size());
      for (auto r : rows) l.push_back(c.labels.at(r));
      out.add_factor(c.name, std::move(l));
    } else {
      std::vector<double> v;
      v.reserve(rows.size());
      for (auto r : rows) v.push_back(c.numeric.at(r));
      out.add_numeric(c.name, std::move(v));
    }
  }
  return out;
}

namespace {

struct Cell {
  std::string text;
  bool quoted = false;
};

std::vector<Cell> split_line(const std::string& line, const std::string& where) {
  std::vector<Cell> cells;
  Cell cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.text += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
      cur.quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cur));
      cur = Cell{};
    } else if (ch != '\r') {
      cur.text += ch;
    }
  }
  if (in_quotes) throw InputError(where + ": unterminated quote");
  cells.push_back(std::move(cur));
  for (auto& c : cells) {
    if (c.quoted) continue;
    const auto b = c.text.find_first_not_of(" \t");
    const auto e = c.text.find_last_not_of(" \t");
    c.text = b == std::string::npos ? std::string() : c.text.substr(b, e - b + 1);
  }
  return cells;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto r = std::from_chars(first, last, out);
  return r.ec == std::errc() && r.ptr == last;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::size_t> line_no;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_line(line, source + ":" + std::to_string(ln)));
    line_no.push_back(ln);
  }
  if (rows.empty()) throw InputError(source + ": empty file");
  std::vector<std::string> header;
  for (const auto& c : rows[0]) {
    if (c.text.empty()) throw InputError(source + ":" + std::to_string(line_no[0]) + ": empty column name");
    header.push_back(c.text);
  }
  if (rows.size() == 1) throw InputError(source + ": header but no data rows");
  const std::size_t nc = header.size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != nc)
      throw InputError(source + ":" + std::to_string(line_no[r]) + ": row has " + std::to_string(rows[r].size()) +
                       " fields, header has " + std::to_string(nc));
    for (std::size_t c = 0; c < nc; ++c)
      if (rows[r][c].text.empty() && !rows[r][c].quoted)
        throw InputError(source + ":" + std::to_string(line_no[r]) + ": missing value in column '" + header[c] +
                         "' (data row " + std::to_string(r) + ")");
  }
  Dataset out;
  for (std::size_t c = 0; c < nc; ++c) {
    double tmp;
    const Cell& first = rows[1][c];
    const bool numeric = !first.quoted && parse_number(first.text, tmp);
    if (numeric) {
      std::vector<double> v;
      v.reserve(rows.size() - 1);
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const Cell& cell = rows[r][c];
        double x;
        if (cell.quoted || !parse_number(cell.text, x))
          throw InputError(source + ":" + std::to_string(line_no[r]) + ": non-numeric value '" + cell.text +
                           "' in numeric column '" + header[c] + "'");
        v.push_back(x);
      }
      out.add_numeric(header[c], std::move(v));
    } else {
      std::vector<std::string> l;
      l.reserve(rows.size() - 1);
      for (std::size_t r = 1; r < rows.size(); ++r) l.push_back(rows[r][c].text);
      out.add_factor(header[c], std::move(l));
    }
  }
  return out;
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open data file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), path);
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  const auto& cols = data.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << cols[c].name;
  f << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) f << ',';
      if (cols[c].is_factor)
        f << '"' << cols[c].labels[r] << '"';
      else
        f << cols[c].numeric[r];
    }
    f << '\n';
  }
}

}  // namespace bcam
