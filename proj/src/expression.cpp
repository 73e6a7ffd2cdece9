#include "bcam/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "bcam/errors.hpp"
#include "bcam/special.hpp"

namespace bcam {

struct Expression::Node {
  enum class Op { num, var, neg, add, sub, mul, div, pow, call } op = Op::num;
  double value = 0.0;
  std::string name;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

const std::vector<std::string>& function_names() {
  static const std::vector<std::string> f{"sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh"};
  return f;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }

  std::vector<std::string> vars;

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InputError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static NodePtr make(Node::Op op, NodePtr a, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }
  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+'))
        n = make(Node::Op::add, n, term());
      else if (accept('-'))
        n = make(Node::Op::sub, n, term());
      else
        return n;
    }
  }
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*'))
        n = make(Node::Op::mul, n, unary());
      else if (accept('/'))
        n = make(Node::Op::div, n, unary());
      else
        return n;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Node::Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Node::Op::pow, base, unary());  // right associative
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '.'))
        ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (accept('(')) {
        const auto& fns = function_names();
        if (std::find(fns.begin(), fns.end(), id) == fns.end()) fail("unknown function '" + id + "'");
        NodePtr arg = expr();
        if (!accept(')')) fail("expected ')'");
        auto n = std::make_shared<Node>();
        n->op = Node::Op::call;
        n->name = id;
        n->a = arg;
        return n;
      }
      auto n = std::make_shared<Node>();
      if (id == "pi") {
        n->value = kPi;
        return n;
      }
      n->op = Node::Op::var;
      n->name = id;
      vars.push_back(id);
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const std::function<double(const std::string&)>& lookup) {
  switch (n.op) {
    case Node::Op::num: return n.value;
    case Node::Op::var: return lookup(n.name);
    case Node::Op::neg: return -eval_node(*n.a, lookup);
    case Node::Op::add: return eval_node(*n.a, lookup) + eval_node(*n.b, lookup);
    case Node::Op::sub: return eval_node(*n.a, lookup) - eval_node(*n.b, lookup);
    case Node::Op::mul: return eval_node(*n.a, lookup) * eval_node(*n.b, lookup);
    case Node::Op::div: return eval_node(*n.a, lookup) / eval_node(*n.b, lookup);
    case Node::Op::pow: return std::pow(eval_node(*n.a, lookup), eval_node(*n.b, lookup));
    case Node::Op::call: {
      const double x = eval_node(*n.a, lookup);
      if (n.name == "sin") return std::sin(x);
      if (n.name == "cos") return std::cos(x);
      if (n.name == "tan") return std::tan(x);
      if (n.name == "exp") return std::exp(x);
      if (n.name == "log") return std::log(x);
      if (n.name == "sqrt") return std::sqrt(x);
      if (n.name == "abs") return std::fabs(x);
      return std::tanh(x);
    }
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Parser p(text);
  Expression e;
  e.text_ = text;
  e.root_ = p.parse();
  e.vars_ = p.vars;
  std::sort(e.vars_.begin(), e.vars_.end());
  e.vars_.erase(std::unique(e.vars_.begin(), e.vars_.end()), e.vars_.end());
  return e;
}

double Expression::eval(const std::function<double(const std::string&)>& lookup) const {
  if (!root_) throw InputError("empty expression");
  return eval_node(*root_, lookup);
}

}  // namespace bcam
