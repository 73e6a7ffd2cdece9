#pragma once

// Arithmetic expressions over named covariates, used for the true linear
// predictors of simulation designs, e.g. "0.1 - 0.9*x1 + x2*sin(3*x2)".

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace bcam {

class Expression {
 public:
  /// Grammar: + - * / ^, unary minus, parentheses, numbers, identifiers,
  /// pi, and the functions sin cos tan exp log sqrt abs tanh. Throws
  /// InputError with the offending position.
  static Expression parse(const std::string& text);

  /// Evaluates with variables looked up by name; unknown names throw.
  double eval(const std::function<double(const std::string&)>& lookup) const;

  const std::string& text() const { return text_; }
  /// Identifiers referenced (sorted, unique).
  const std::vector<std::string>& variables() const { return vars_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
  std::vector<std::string> vars_;
};

}  // namespace bcam
