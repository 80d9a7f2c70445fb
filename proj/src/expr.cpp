#include "balcons/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace balcons {

namespace {

ExprPtr make_const(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Constant;
  n->value = v;
  return n;
}

ExprPtr make_var(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Variable;
  n->name = std::move(name);
  return n;
}

ExprPtr make_unary(UnaryOp op, ExprPtr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Unary;
  n->uop = op;
  n->a = std::move(a);
  return n;
}

ExprPtr make_binary(BinaryOp op, ExprPtr a, ExprPtr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Binary;
  n->bop = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

bool node_is_const(const ExprPtr& n) {
  return n && n->kind == ExprNode::Kind::Constant;
}

bool node_is_const(const ExprPtr& n, double v) {
  return node_is_const(n) && n->value == v;
}

double apply_unary_raw(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Sin: return std::sin(x);
    case UnaryOp::Cos: return std::cos(x);
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Ln: return std::log(x);
    case UnaryOp::Sqrt: return std::sqrt(x);
  }
  return 0.0;
}

double apply_binary_raw(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
    case BinaryOp::Pow: return std::pow(a, b);
  }
  return 0.0;
}

ExprPtr unary_node(UnaryOp op, ExprPtr a) {
  if (node_is_const(a)) {
    const double v = apply_unary_raw(op, a->value);
    if (std::isfinite(v)) return make_const(v);
  }
  if (op == UnaryOp::Neg && a->kind == ExprNode::Kind::Unary &&
      a->uop == UnaryOp::Neg)
    return a->a;
  return make_unary(op, std::move(a));
}

ExprPtr binary_node(BinaryOp op, ExprPtr a, ExprPtr b) {
  if (node_is_const(a) && node_is_const(b)) {
    const double v = apply_binary_raw(op, a->value, b->value);
    if (std::isfinite(v)) return make_const(v);
  }
  switch (op) {
    case BinaryOp::Add:
      if (node_is_const(a, 0.0)) return b;
      if (node_is_const(b, 0.0)) return a;
      break;
    case BinaryOp::Sub:
      if (node_is_const(b, 0.0)) return a;
      if (node_is_const(a, 0.0)) return unary_node(UnaryOp::Neg, b);
      break;
    case BinaryOp::Mul:
      if (node_is_const(a, 0.0) || node_is_const(b, 0.0)) return make_const(0.0);
      if (node_is_const(a, 1.0)) return b;
      if (node_is_const(b, 1.0)) return a;
      break;
    case BinaryOp::Div:
      if (node_is_const(b, 1.0)) return a;
      if (node_is_const(a, 0.0) && !node_is_const(b, 0.0)) return make_const(0.0);
      break;
    case BinaryOp::Pow:
      if (node_is_const(b, 1.0)) return a;
      if (node_is_const(b, 0.0)) return make_const(1.0);
      break;
  }
  return make_binary(op, std::move(a), std::move(b));
}

}  // namespace

ScalarExpr ScalarExpr::constant(double v) { return from_node(make_const(v)); }
ScalarExpr ScalarExpr::variable(std::string name) {
  return from_node(make_var(std::move(name)));
}

bool ScalarExpr::is_constant() const {
  return root_ && root_->kind == ExprNode::Kind::Constant;
}

bool ScalarExpr::is_constant(double v) const {
  return is_constant() && root_->value == v;
}

double ScalarExpr::constant_value() const {
  if (!is_constant()) fail(ErrorKind::Invalid, "expression is not a constant");
  return root_->value;
}

ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) {
  return ScalarExpr::from_node(binary_node(BinaryOp::Add, a.share(), b.share()));
}
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) {
  return ScalarExpr::from_node(binary_node(BinaryOp::Sub, a.share(), b.share()));
}
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) {
  return ScalarExpr::from_node(binary_node(BinaryOp::Mul, a.share(), b.share()));
}
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b) {
  return ScalarExpr::from_node(binary_node(BinaryOp::Div, a.share(), b.share()));
}
ScalarExpr operator-(const ScalarExpr& a) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Neg, a.share()));
}
ScalarExpr pow(const ScalarExpr& base, const ScalarExpr& exponent) {
  return ScalarExpr::from_node(
      binary_node(BinaryOp::Pow, base.share(), exponent.share()));
}
ScalarExpr sin(const ScalarExpr& e) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Sin, e.share()));
}
ScalarExpr cos(const ScalarExpr& e) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Cos, e.share()));
}
ScalarExpr exp(const ScalarExpr& e) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Exp, e.share()));
}
ScalarExpr ln(const ScalarExpr& e) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Ln, e.share()));
}
ScalarExpr sqrt(const ScalarExpr& e) {
  return ScalarExpr::from_node(unary_node(UnaryOp::Sqrt, e.share()));
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
  Parser(std::string_view text, const std::set<std::string>& vars)
      : text_(text), vars_(vars) {}

  ScalarExpr run() {
    if (text_.find_first_not_of(" \t\r\n") == std::string_view::npos)
      throw ParseError(0, "empty expression");
    ExprPtr e = parse_expr_level();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError(pos_, std::string("unexpected character '") +
                                 text_[pos_] + "'");
    return ScalarExpr::from_node(std::move(e));
  }

private:
  std::string_view text_;
  const std::set<std::string>& vars_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  ExprPtr parse_expr_level() {
    ExprPtr e = parse_term();
    for (;;) {
      if (accept('+'))
        e = make_binary(BinaryOp::Add, std::move(e), parse_term());
      else if (accept('-'))
        e = make_binary(BinaryOp::Sub, std::move(e), parse_term());
      else
        return e;
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_unary();
    for (;;) {
      if (accept('*'))
        e = make_binary(BinaryOp::Mul, std::move(e), parse_unary());
      else if (accept('/'))
        e = make_binary(BinaryOp::Div, std::move(e), parse_unary());
      else
        return e;
    }
  }

  ExprPtr parse_unary() {
    if (accept('-')) return make_unary(UnaryOp::Neg, parse_unary());
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (accept('^'))
      return make_binary(BinaryOp::Pow, std::move(base), parse_unary());
    return base;
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size())
      throw ParseError(pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_name();
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_expr_level();
      if (!accept(')')) throw ParseError(pos_, "expected ')'");
      return e;
    }
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  ExprPtr parse_number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    // The slice passed to strtod is NUL-terminated via a local copy so a
    // non-terminated string_view cannot over-read.
    std::string tail(text_.substr(pos_));
    const double v = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str())
      throw ParseError(pos_, "malformed number");
    pos_ += static_cast<std::size_t>(end - tail.c_str());
    (void)begin;
    return make_const(v);
  }

  ExprPtr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    if (peek() == '(') {
      ++pos_;  // consume '('
      UnaryOp op;
      if (name == "sin") op = UnaryOp::Sin;
      else if (name == "cos") op = UnaryOp::Cos;
      else if (name == "exp") op = UnaryOp::Exp;
      else if (name == "ln") op = UnaryOp::Ln;
      else if (name == "sqrt") op = UnaryOp::Sqrt;
      else throw ParseError(start, "unknown function '" + name + "'");
      ExprPtr arg = parse_expr_level();
      if (!accept(')')) throw ParseError(pos_, "expected ')'");
      return make_unary(op, std::move(arg));
    }
    if (!vars_.count(name))
      throw ParseError(start, "unknown variable '" + name + "'");
    return make_var(std::move(name));
  }
};

}  // namespace

ScalarExpr parse_expr(std::string_view text,
                      const std::set<std::string>& allowed_vars) {
  return Parser(text, allowed_vars).run();
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// Precedence levels mirror the grammar: 1 add/sub, 2 mul/div, 3 unary minus,
// 4 pow, 5 primary.  Parenthesization preserves structure on re-parse.
int node_prec(const ExprNode* n) {
  switch (n->kind) {
    case ExprNode::Kind::Constant:
      return n->value < 0.0 ? 3 : 5;
    case ExprNode::Kind::Variable:
      return 5;
    case ExprNode::Kind::Unary:
      return n->uop == UnaryOp::Neg ? 3 : 5;
    case ExprNode::Kind::Binary:
      switch (n->bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
      }
  }
  return 5;
}

void print_node(const ExprNode* n, std::string& out);

void print_child(const ExprNode* child, int min_prec, std::string& out) {
  if (node_prec(child) < min_prec) {
    out += '(';
    print_node(child, out);
    out += ')';
  } else {
    print_node(child, out);
  }
}

void print_node(const ExprNode* n, std::string& out) {
  switch (n->kind) {
    case ExprNode::Kind::Constant: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n->value);
      out += buf;
      return;
    }
    case ExprNode::Kind::Variable:
      out += n->name;
      return;
    case ExprNode::Kind::Unary: {
      if (n->uop == UnaryOp::Neg) {
        out += '-';
        // Operand must bind at least as tight as unary minus itself.
        print_child(n->a.get(), 4, out);
        return;
      }
      switch (n->uop) {
        case UnaryOp::Sin: out += "sin("; break;
        case UnaryOp::Cos: out += "cos("; break;
        case UnaryOp::Exp: out += "exp("; break;
        case UnaryOp::Ln: out += "ln("; break;
        case UnaryOp::Sqrt: out += "sqrt("; break;
        case UnaryOp::Neg: break;
      }
      print_node(n->a.get(), out);
      out += ')';
      return;
    }
    case ExprNode::Kind::Binary: {
      switch (n->bop) {
        case BinaryOp::Add:
          print_child(n->a.get(), 1, out);
          out += '+';
          print_child(n->b.get(), 2, out);
          return;
        case BinaryOp::Sub:
          print_child(n->a.get(), 1, out);
          out += '-';
          print_child(n->b.get(), 2, out);
          return;
        case BinaryOp::Mul:
          print_child(n->a.get(), 2, out);
          out += '*';
          print_child(n->b.get(), 3, out);
          return;
        case BinaryOp::Div:
          print_child(n->a.get(), 2, out);
          out += '/';
          print_child(n->b.get(), 3, out);
          return;
        case BinaryOp::Pow:
          // Left of '^' must be a primary; right may be any unary.
          print_child(n->a.get(), 5, out);
          out += '^';
          print_child(n->b.get(), 3, out);
          return;
      }
    }
  }
}

}  // namespace

std::string ScalarExpr::str() const {
  if (!root_) return "";
  std::string out;
  print_node(root_.get(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

std::string context_message(const ExprNode* n, const Bindings& bindings) {
  std::string expr_text;
  print_node(n, expr_text);
  std::ostringstream oss;
  oss << "while evaluating '" << expr_text << "' with";
  bool first = true;
  for (const auto& [k, v] : bindings) {
    oss << (first ? " " : ", ") << k << "=" << v;
    first = false;
  }
  return oss.str();
}

double eval_node(const ExprNode* n, const Bindings& bindings) {
  switch (n->kind) {
    case ExprNode::Kind::Constant:
      return n->value;
    case ExprNode::Kind::Variable: {
      auto it = bindings.find(n->name);
      if (it == bindings.end())
        fail(ErrorKind::Domain, "missing binding for variable '" + n->name + "'");
      return it->second;
    }
    case ExprNode::Kind::Unary: {
      const double x = eval_node(n->a.get(), bindings);
      switch (n->uop) {
        case UnaryOp::Ln:
          if (!(x > 0.0))
            fail(ErrorKind::Domain,
                 "ln of non-positive value " + context_message(n, bindings));
          break;
        case UnaryOp::Sqrt:
          if (x < 0.0)
            fail(ErrorKind::Domain,
                 "sqrt of negative value " + context_message(n, bindings));
          break;
        default:
          break;
      }
      return apply_unary_raw(n->uop, x);
    }
    case ExprNode::Kind::Binary: {
      const double a = eval_node(n->a.get(), bindings);
      const double b = eval_node(n->b.get(), bindings);
      if (n->bop == BinaryOp::Div && b == 0.0)
        fail(ErrorKind::Domain,
             "division by zero " + context_message(n, bindings));
      if (n->bop == BinaryOp::Pow) {
        if (a == 0.0 && b < 0.0)
          fail(ErrorKind::Domain,
               "zero base with negative exponent " + context_message(n, bindings));
        if (a < 0.0 && b != std::nearbyint(b))
          fail(ErrorKind::Domain,
               "negative base with non-integer exponent " +
                   context_message(n, bindings));
      }
      return apply_binary_raw(n->bop, a, b);
    }
  }
  return 0.0;
}

}  // namespace

double ScalarExpr::eval(const Bindings& bindings) const {
  if (!root_) fail(ErrorKind::Invalid, "evaluating empty expression");
  return eval_node(root_.get(), bindings);
}

double eval_expr(const ScalarExpr& e, const Bindings& bindings) {
  return e.eval(bindings);
}

std::set<std::string> ScalarExpr::variables() const {
  std::set<std::string> out;
  if (!root_) return out;
  std::vector<const ExprNode*> stack{root_.get()};
  while (!stack.empty()) {
    const ExprNode* n = stack.back();
    stack.pop_back();
    switch (n->kind) {
      case ExprNode::Kind::Variable: out.insert(n->name); break;
      case ExprNode::Kind::Unary: stack.push_back(n->a.get()); break;
      case ExprNode::Kind::Binary:
        stack.push_back(n->a.get());
        stack.push_back(n->b.get());
        break;
      default: break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

namespace {

ExprPtr diff_node(const ExprPtr& n, const std::string& var) {
  switch (n->kind) {
    case ExprNode::Kind::Constant:
      return make_const(0.0);
    case ExprNode::Kind::Variable:
      return make_const(n->name == var ? 1.0 : 0.0);
    case ExprNode::Kind::Unary: {
      ExprPtr da = diff_node(n->a, var);
      switch (n->uop) {
        case UnaryOp::Neg:
          return unary_node(UnaryOp::Neg, std::move(da));
        case UnaryOp::Sin:
          return binary_node(BinaryOp::Mul, unary_node(UnaryOp::Cos, n->a),
                             std::move(da));
        case UnaryOp::Cos:
          return unary_node(
              UnaryOp::Neg,
              binary_node(BinaryOp::Mul, unary_node(UnaryOp::Sin, n->a),
                          std::move(da)));
        case UnaryOp::Exp:
          return binary_node(BinaryOp::Mul, unary_node(UnaryOp::Exp, n->a),
                             std::move(da));
        case UnaryOp::Ln:
          return binary_node(BinaryOp::Div, std::move(da), n->a);
        case UnaryOp::Sqrt:
          return binary_node(
              BinaryOp::Div, std::move(da),
              binary_node(BinaryOp::Mul, make_const(2.0),
                          unary_node(UnaryOp::Sqrt, n->a)));
      }
      return make_const(0.0);
    }
    case ExprNode::Kind::Binary: {
      ExprPtr da = diff_node(n->a, var);
      ExprPtr db = diff_node(n->b, var);
      switch (n->bop) {
        case BinaryOp::Add:
          return binary_node(BinaryOp::Add, std::move(da), std::move(db));
        case BinaryOp::Sub:
          return binary_node(BinaryOp::Sub, std::move(da), std::move(db));
        case BinaryOp::Mul:
          return binary_node(
              BinaryOp::Add, binary_node(BinaryOp::Mul, std::move(da), n->b),
              binary_node(BinaryOp::Mul, n->a, std::move(db)));
        case BinaryOp::Div:
          // (a'b - ab') / b^2
          return binary_node(
              BinaryOp::Div,
              binary_node(BinaryOp::Sub,
                          binary_node(BinaryOp::Mul, std::move(da), n->b),
                          binary_node(BinaryOp::Mul, n->a, std::move(db))),
              binary_node(BinaryOp::Pow, n->b, make_const(2.0)));
        case BinaryOp::Pow: {
          if (node_is_const(n->b)) {
            // c * a^(c-1) * a'
            const double c = n->b->value;
            return binary_node(
                BinaryOp::Mul,
                binary_node(BinaryOp::Mul, make_const(c),
                            binary_node(BinaryOp::Pow, n->a, make_const(c - 1.0))),
                std::move(da));
          }
          if (node_is_const(n->a)) {
            // a^b * ln(a) * b'
            return binary_node(
                BinaryOp::Mul,
                binary_node(BinaryOp::Mul,
                            binary_node(BinaryOp::Pow, n->a, n->b),
                            unary_node(UnaryOp::Ln, n->a)),
                std::move(db));
          }
          // a^b * (b' ln a + b a'/a)
          return binary_node(
              BinaryOp::Mul, binary_node(BinaryOp::Pow, n->a, n->b),
              binary_node(
                  BinaryOp::Add,
                  binary_node(BinaryOp::Mul, std::move(db),
                              unary_node(UnaryOp::Ln, n->a)),
                  binary_node(BinaryOp::Div,
                              binary_node(BinaryOp::Mul, n->b, std::move(da)),
                              n->a)));
        }
      }
    }
  }
  return make_const(0.0);
}

}  // namespace

ScalarExpr ScalarExpr::diff(const std::string& var) const {
  if (!root_) fail(ErrorKind::Invalid, "differentiating empty expression");
  return from_node(diff_node(root_, var));
}

ScalarExpr diff_expr(const ScalarExpr& e, const std::string& var) {
  return e.diff(var);
}

namespace {

ExprPtr substitute_node(const ExprPtr& n,
                        const std::map<std::string, ScalarExpr>& repl) {
  switch (n->kind) {
    case ExprNode::Kind::Constant:
      return n;
    case ExprNode::Kind::Variable: {
      auto it = repl.find(n->name);
      return it == repl.end() ? n : it->second.share();
    }
    case ExprNode::Kind::Unary:
      return unary_node(n->uop, substitute_node(n->a, repl));
    case ExprNode::Kind::Binary:
      return binary_node(n->bop, substitute_node(n->a, repl),
                         substitute_node(n->b, repl));
  }
  return n;
}

}  // namespace

ScalarExpr substitute(const ScalarExpr& e,
                      const std::map<std::string, ScalarExpr>& repl) {
  if (e.empty()) return e;
  return ScalarExpr::from_node(substitute_node(e.share(), repl));
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const ScalarExpr& e,
                           std::span<const std::string> var_order) {
  if (e.empty()) fail(ErrorKind::Invalid, "compiling empty expression");
  int depth = 0;
  std::vector<const ExprNode*> stack;
  // Emit postfix by explicit traversal (children before parents).
  struct Frame {
    const ExprNode* node;
    bool expanded;
  };
  std::vector<Frame> work{{e.root(), false}};
  while (!work.empty()) {
    Frame f = work.back();
    work.pop_back();
    const ExprNode* n = f.node;
    if (!f.expanded) {
      switch (n->kind) {
        case ExprNode::Kind::Constant:
          code_.push_back({Op::PushConst, 0, n->value});
          ++depth;
          stack_need_ = std::max(stack_need_, depth);
          break;
        case ExprNode::Kind::Variable: {
          std::uint16_t idx = 0;
          bool found = false;
          for (std::size_t i = 0; i < var_order.size(); ++i) {
            if (var_order[i] == n->name) {
              idx = static_cast<std::uint16_t>(i);
              found = true;
              break;
            }
          }
          if (!found)
            fail(ErrorKind::Invalid,
                 "variable '" + n->name + "' not in compile-time order");
          code_.push_back({Op::PushVar, idx, 0.0});
          ++depth;
          stack_need_ = std::max(stack_need_, depth);
          break;
        }
        case ExprNode::Kind::Unary:
          work.push_back({n, true});
          work.push_back({n->a.get(), false});
          break;
        case ExprNode::Kind::Binary:
          work.push_back({n, true});
          work.push_back({n->b.get(), false});
          work.push_back({n->a.get(), false});
          break;
      }
    } else {
      if (n->kind == ExprNode::Kind::Unary) {
        Op op = Op::Neg;
        switch (n->uop) {
          case UnaryOp::Neg: op = Op::Neg; break;
          case UnaryOp::Sin: op = Op::Sin; break;
          case UnaryOp::Cos: op = Op::Cos; break;
          case UnaryOp::Exp: op = Op::Exp; break;
          case UnaryOp::Ln: op = Op::Ln; break;
          case UnaryOp::Sqrt: op = Op::Sqrt; break;
        }
        code_.push_back({op, 0, 0.0});
      } else {
        Op op = Op::Add;
        switch (n->bop) {
          case BinaryOp::Add: op = Op::Add; break;
          case BinaryOp::Sub: op = Op::Sub; break;
          case BinaryOp::Mul: op = Op::Mul; break;
          case BinaryOp::Div: op = Op::Div; break;
          case BinaryOp::Pow: op = Op::Pow; break;
        }
        code_.push_back({op, 0, 0.0});
        --depth;
      }
    }
  }
  (void)stack;
  if (stack_need_ > 64)
    fail(ErrorKind::Invalid, "expression too deep to compile");
}

double CompiledExpr::eval(std::span<const double> values) const {
  double stack[64];
  int top = -1;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::PushConst: stack[++top] = ins.value; break;
      case Op::PushVar: stack[++top] = values[ins.var]; break;
      case Op::Neg: stack[top] = -stack[top]; break;
      case Op::Sin: stack[top] = std::sin(stack[top]); break;
      case Op::Cos: stack[top] = std::cos(stack[top]); break;
      case Op::Exp: stack[top] = std::exp(stack[top]); break;
      case Op::Ln: stack[top] = std::log(stack[top]); break;
      case Op::Sqrt: stack[top] = std::sqrt(stack[top]); break;
      case Op::Add: --top; stack[top] += stack[top + 1]; break;
      case Op::Sub: --top; stack[top] -= stack[top + 1]; break;
      case Op::Mul: --top; stack[top] *= stack[top + 1]; break;
      case Op::Div: --top; stack[top] /= stack[top + 1]; break;
      case Op::Pow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
    }
  }
  return stack[0];
}

namespace {

const std::string kCapitalVars[] = {"U1", "U2", "U3", "U4", "U5"};
const std::string kSpaceStateVars[] = {"x1", "x2", "x3", "x4",
                                       "u1", "u2", "u3", "u4", "u5"};
const std::string kSpaceVars[] = {"x1", "x2", "x3", "x4"};

}  // namespace

std::span<const std::string> capital_state_vars() { return kCapitalVars; }
std::span<const std::string> space_state_vars() { return kSpaceStateVars; }
std::span<const std::string> space_vars() { return kSpaceVars; }

}  // namespace balcons
