// Scalar expression layer: parse, print, evaluate, and exactly differentiate
// the små expression language used for fluxes, payload functions, pressure
// laws and initial conditions.
//
// Grammar (infix, '^' right-associative, no implicit multiplication):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name '(' expr ')' | name | '(' expr ')'
//
// Functions: sin, cos, exp, ln, sqrt.  Variable names are validated against
// the caller-supplied set at parse time.  ASTs are immutable after
// construction and safe to share between threads.

#ifndef BALCONS_EXPR_HPP
#define BALCONS_EXPR_HPP

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "balcons/core.hpp"

namespace balcons {

enum class UnaryOp { Neg, Sin, Cos, Exp, Ln, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { Constant, Variable, Unary, Binary };
  Kind kind;
  double value = 0.0;    // Constant
  std::string name;      // Variable
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  ExprPtr a, b;
};

using Bindings = std::map<std::string, double, std::less<>>;

class ScalarExpr {
public:
  ScalarExpr() = default;  // empty; evaluating an empty expression throws

  static ScalarExpr constant(double v);
  static ScalarExpr variable(std::string name);

  bool empty() const { return root_ == nullptr; }
  const ExprNode* root() const { return root_.get(); }
  ExprPtr share() const { return root_; }

  double eval(const Bindings& bindings) const;
  ScalarExpr diff(const std::string& var) const;
  std::string str() const;
  std::set<std::string> variables() const;

  // True when the expression folds to the given constant.
  bool is_constant(double v) const;
  bool is_constant() const;
  double constant_value() const;  // requires is_constant()

  static ScalarExpr from_node(ExprPtr node) {
    ScalarExpr e;
    e.root_ = std::move(node);
    return e;
  }

private:
  ExprPtr root_;
};

// Value-preserving smart constructors (fold constants, drop exact neutral
// elements).  Folding never changes evaluation results on valid inputs.
ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a);
ScalarExpr pow(const ScalarExpr& base, const ScalarExpr& exponent);
ScalarExpr sin(const ScalarExpr& e);
ScalarExpr cos(const ScalarExpr& e);
ScalarExpr exp(const ScalarExpr& e);
ScalarExpr ln(const ScalarExpr& e);
ScalarExpr sqrt(const ScalarExpr& e);

class ParseError : public Error {
public:
  ParseError(std::size_t position, const std::string& message)
      : Error(ErrorKind::Parse, message), position_(position) {}
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

ScalarExpr parse_expr(std::string_view text,
                      const std::set<std::string>& allowed_vars);

double eval_expr(const ScalarExpr& e, const Bindings& bindings);
ScalarExpr diff_expr(const ScalarExpr& e, const std::string& var);

// Replaces variables by expressions (simultaneous substitution).
ScalarExpr substitute(const ScalarExpr& e,
                      const std::map<std::string, ScalarExpr>& repl);

// Flattened postfix program for hot loops.  Values are supplied positionally
// following the variable order given at compile time.  No domain checking:
// invalid inputs propagate NaN/inf, which solver-level guards detect.
class CompiledExpr {
public:
  CompiledExpr() = default;
  CompiledExpr(const ScalarExpr& e, std::span<const std::string> var_order);

  double eval(std::span<const double> values) const;
  bool empty() const { return code_.empty(); }

private:
  enum class Op : std::uint8_t {
    PushConst, PushVar, Neg, Sin, Cos, Exp, Ln, Sqrt,
    Add, Sub, Mul, Div, Pow,
  };
  struct Instr {
    Op op;
    std::uint16_t var = 0;
    double value = 0.0;
  };
  std::vector<Instr> code_;
  int stack_need_ = 0;
};

// Conventional variable orders used throughout the library.
std::span<const std::string> capital_state_vars();  // U1..U5
std::span<const std::string> space_state_vars();    // x1..x4, u1..u5
std::span<const std::string> space_vars();          // x1..x4

}  // namespace balcons

#endif
