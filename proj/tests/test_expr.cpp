#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "balcons/expr.hpp"

using namespace balcons;

namespace {

const std::set<std::string> kAllVars = {"x1", "x2", "x3", "x4", "u1", "u2",
                                        "u3", "u4", "u5", "a"};

// Independent derivative oracle: second-order central differences.
double central_fd(const ScalarExpr& e, const std::string& var,
                  const Bindings& at, double step = 1e-6) {
  Bindings plus = at, minus = at;
  plus[var] += step;
  minus[var] -= step;
  return (eval_expr(e, plus) - eval_expr(e, minus)) / (2.0 * step);
}

// Derivative-check corpus: expression, differentiation variable, and a
// binding box that keeps every sub-expression inside its domain.
struct CorpusEntry {
  const char* text;
  const char* var;
  double lo, hi;  // range for every variable appearing in the expression
};

const std::vector<CorpusEntry>& corpus() {
  static const std::vector<CorpusEntry> entries = {
      {"sin(x1)*u2", "x1", -2.0, 2.0},
      {"sin(x1)*u2", "u2", -2.0, 2.0},
      {"cos(x2)^2 + sin(x2)^2", "x2", -3.0, 3.0},
      {"u2^2/u1", "u1", 0.5, 2.0},
      {"u2^2/u1", "u2", 0.5, 2.0},
      {"exp(x1*x2)", "x1", -1.0, 1.0},
      {"ln(u1)", "u1", 0.5, 3.0},
      {"sqrt(u1*u5)", "u1", 0.5, 3.0},
      {"x1^3 - 2*x1^2 + x1 - 7", "x1", -2.0, 2.0},
      {"u5*exp(u1)", "u5", -1.0, 1.0},
      {"u5*exp(u1)", "u1", -1.0, 1.0},
      {"(x1+x2)/(x3+4)", "x3", -1.0, 1.0},
      {"x1^x2", "x1", 0.5, 2.0},
      {"x1^x2", "x2", 0.5, 2.0},
      {"sin(cos(x1))", "x1", -2.0, 2.0},
      {"exp(-(x2^2+x3^2)/2)", "x2", -1.5, 1.5},
      {"u1*u2*u3*u4", "u3", -1.5, 1.5},
      {"1/(1+x1^2)", "x1", -2.0, 2.0},
      {"ln(1+exp(x4))", "x4", -2.0, 2.0},
      {"sqrt(1+u2^2)", "u2", -2.0, 2.0},
  };
  return entries;
}

Bindings random_bindings(const ScalarExpr& e, SplitMix64& rng, double lo,
                         double hi) {
  Bindings b;
  for (const auto& v : e.variables()) b[v] = rng.uniform(lo, hi);
  return b;
}

}  // namespace

TEST_CASE("parse: structure and grammar") {
  const ScalarExpr e = parse_expr("sin(x1)*u2", {"x1", "u2"});
  CHECK(e.str() == "sin(x1)*u2");
  // '^' binds right-associatively; no variables required.
  const ScalarExpr p = parse_expr("2^10", {});
  CHECK(p.eval({}) == 1024.0);
  const ScalarExpr q = parse_expr("2^3^2", {});
  CHECK(q.eval({}) == 512.0);
  const ScalarExpr m = parse_expr("-2^2", {});
  CHECK(m.eval({}) == -4.0);
}

TEST_CASE("parse: errors carry positions") {
  CHECK_THROWS_AS(parse_expr("x1 +", {"x1"}), ParseError);
  try {
    parse_expr("x1 +", {"x1"});
  } catch (const ParseError& err) {
    CHECK(err.position() == 4);
  }
  CHECK_THROWS_AS(parse_expr("x9", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("tan(x1)", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("", {"x1"}), ParseError);
  CHECK_THROWS_AS(parse_expr("(x1", {"x1"}), ParseError);
}

TEST_CASE("eval: basic values and domain faults") {
  CHECK(eval_expr(parse_expr("u2/u1", kAllVars), {{"u1", 2.0}, {"u2", 6.0}}) ==
        3.0);
  CHECK(eval_expr(parse_expr("exp(0)", {}), {}) == 1.0);
  const double v = eval_expr(parse_expr("cos(x1)^2 + sin(x1)^2", kAllVars),
                             {{"x1", 0.7314}});
  CHECK(std::abs(v - 1.0) < 1e-15);

  CHECK_THROWS_AS(eval_expr(parse_expr("ln(x1)", kAllVars), {{"x1", -1.0}}),
                  Error);
  CHECK_THROWS_AS(eval_expr(parse_expr("u1/x1", kAllVars),
                            {{"x1", 0.0}, {"u1", 1.0}}),
                  Error);
  CHECK_THROWS_AS(eval_expr(parse_expr("x1+x2", kAllVars), {{"x1", 1.0}}),
                  Error);
  // Fault messages carry the variable context.
  try {
    eval_expr(parse_expr("ln(x1)", kAllVars), {{"x1", -1.0}});
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("x1") != std::string::npos);
  }
}

TEST_CASE("diff: exact rules") {
  const ScalarExpr s = parse_expr("sin(x1)", {"x1"});
  const ScalarExpr ds = diff_expr(s, "x1");
  for (double x : {-1.0, 0.0, 0.5, 2.0})
    CHECK(ds.eval({{"x1", x}}) == doctest::Approx(std::cos(x)).epsilon(1e-15));

  // Power rule: d/du1 (u2^2/u1) = -u2^2/u1^2.
  const ScalarExpr r = parse_expr("u2^2/u1", kAllVars);
  const ScalarExpr dr = diff_expr(r, "u1");
  CHECK(dr.eval({{"u1", 2.0}, {"u2", 3.0}}) == doctest::Approx(-2.25).epsilon(1e-14));

  // d/du5 (u5*exp(u1)) at (u1=1, u5=3) = e, against the FD oracle.
  const ScalarExpr p = parse_expr("u5*exp(u1)", kAllVars);
  const Bindings at{{"u1", 1.0}, {"u5", 3.0}};
  const double exact = diff_expr(p, "u5").eval(at);
  CHECK(exact == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(std::abs(exact - central_fd(p, "u5", at)) / exact < 1e-6);
}

TEST_CASE("diff vs central differences over the corpus") {
  for (const auto& entry : corpus()) {
    const ScalarExpr e = parse_expr(entry.text, kAllVars);
    const ScalarExpr de = diff_expr(e, entry.var);
    SplitMix64 rng(0xc0ffee ^ std::hash<std::string>{}(entry.text));
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Bindings b = random_bindings(e, rng, entry.lo, entry.hi);
      const double exact = de.eval(b);
      const double approx = central_fd(e, entry.var, b);
      const double scale = std::max({1.0, std::abs(exact), std::abs(approx)});
      CHECK(std::abs(exact - approx) / scale < 1e-6);
      ++checked;
    }
    CHECK(checked == 100);
  }
}

TEST_CASE("round-trip: parse(print(e)) evaluates identically") {
  SplitMix64 rng(0x5eed);
  for (const auto& entry : corpus()) {
    const ScalarExpr e = parse_expr(entry.text, kAllVars);
    const ScalarExpr r = parse_expr(e.str(), kAllVars);
    CHECK(r.str() == e.str());
    for (int trial = 0; trial < 100; ++trial) {
      Bindings b = random_bindings(e, rng, entry.lo, entry.hi);
      CHECK(e.eval(b) == r.eval(b));  // exact equality
    }
  }
}

TEST_CASE("round-trip: derivative expressions survive printing") {
  SplitMix64 rng(0xfeed);
  for (const auto& entry : corpus()) {
    const ScalarExpr de =
        diff_expr(parse_expr(entry.text, kAllVars), entry.var);
    const ScalarExpr rt = parse_expr(de.str(), kAllVars);
    for (int trial = 0; trial < 20; ++trial) {
      Bindings b = random_bindings(parse_expr(entry.text, kAllVars), rng,
                                   entry.lo, entry.hi);
      b[entry.var] = rng.uniform(entry.lo, entry.hi);
      CHECK(de.eval(b) == rt.eval(b));
    }
  }
}

TEST_CASE("diff linearity") {
  const ScalarExpr e1 = parse_expr("sin(x1)*u2", kAllVars);
  const ScalarExpr e2 = parse_expr("x1^2*u2 + u1", kAllVars);
  const double c = 3.25;
  const ScalarExpr combo = ScalarExpr::constant(c) * e1 + e2;
  const ScalarExpr d_combo = diff_expr(combo, "x1");
  const ScalarExpr d_split =
      ScalarExpr::constant(c) * diff_expr(e1, "x1") + diff_expr(e2, "x1");
  SplitMix64 rng(0xabcd);
  for (int trial = 0; trial < 100; ++trial) {
    Bindings b;
    for (const char* v : {"x1", "u1", "u2"}) b[v] = rng.uniform(-2.0, 2.0);
    CHECK(std::abs(d_combo.eval(b) - d_split.eval(b)) < 1e-12);
  }
}

TEST_CASE("substitution") {
  const ScalarExpr e = parse_expr("u5*exp(u1) + x1", kAllVars);
  const ScalarExpr sub = substitute(
      e, {{"u5", parse_expr("2*x2", kAllVars)}, {"u1", ScalarExpr::constant(0.0)}});
  CHECK(sub.eval({{"x1", 1.0}, {"x2", 3.0}}) == doctest::Approx(7.0));
}

TEST_CASE("compiled evaluation matches the interpreter") {
  SplitMix64 rng(0x777);
  const std::vector<std::string> order = {"x1", "x2", "x3", "x4", "u1",
                                          "u2", "u3", "u4", "u5"};
  for (const auto& entry : corpus()) {
    const ScalarExpr e = parse_expr(entry.text, kAllVars);
    const CompiledExpr ce(e, order);
    for (int trial = 0; trial < 25; ++trial) {
      double vals[9];
      Bindings b;
      for (int k = 0; k < 9; ++k) {
        vals[k] = rng.uniform(entry.lo, entry.hi);
        b[order[k]] = vals[k];
      }
      CHECK(ce.eval(vals) == e.eval(b));
    }
  }
}

TEST_CASE("constant folding preserves values") {
  // Folded combinations evaluate like their long forms.
  const ScalarExpr a = parse_expr("2*3 + x1*1 + 0*u2", kAllVars);
  const ScalarExpr b = parse_expr("6 + x1", kAllVars);
  SplitMix64 rng(0x999);
  for (int trial = 0; trial < 50; ++trial) {
    Bindings bind{{"x1", rng.uniform(-5, 5)}, {"u2", rng.uniform(-5, 5)}};
    CHECK(std::abs(a.eval(bind) - b.eval(bind)) < 1e-15);
  }
}
