#pragma once

// Column-oriented dataset with numeric and factor columns, plus CSV ingestion.

#include <cstddef>
#include <string>
#include <vector>

namespace bcam {

struct Column {
  std::string name;
  bool is_factor = false;
  std::vector<double> numeric;
  std::vector<std::string> labels;

  std::size_t size() const { return is_factor ? labels.size() : numeric.size(); }
};

class Dataset {
 public:
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }

  void add_numeric(const std::string& name, std::vector<double> values);
  void add_factor(const std::string& name, std::vector<std::string> labels);

  bool has(const std::string& name) const;
  const Column& column(const std::string& name) const;  // throws InputError
  const std::vector<double>& numeric(const std::string& name) const;
  const std::vector<std::string>& factor(const std::string& name) const;
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<std::string> names() const;

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;

 private:
  void check_length(const std::string& name, std::size_t n);

  std::size_t n_rows_ = 0;
  std::vector<Column> columns_;
};

/// Parses CSV text with a header row. Quoted cells and non-numeric columns
/// become factors; empty cells and ragged rows are rejected with row/column
/// context.
Dataset parse_csv(const std::string& text, const std::string& source = "<csv>");
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& data, const std::string& path);

}  // namespace bcam
