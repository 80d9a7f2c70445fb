#include "balcons/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace balcons {

namespace {

ScalarExpr var(const char* n) { return ScalarExpr::variable(n); }
ScalarExpr cst(double v) { return ScalarExpr::constant(v); }

const std::set<std::string> kSpaceSet = {"x1", "x2", "x3", "x4"};

void require_vars(const ScalarExpr& e, const std::set<std::string>& allowed,
                  const char* what) {
  if (e.empty()) fail(ErrorKind::Invalid, std::string(what) + " is empty");
  for (const auto& v : e.variables())
    if (!allowed.count(v))
      fail(ErrorKind::Invalid, std::string(what) +
                                   " references disallowed variable '" + v +
                                   "'");
}

std::string xvar(int k) { return "x" + std::to_string(k); }
std::string uvar(int k) { return "u" + std::to_string(k); }
std::string Uvar(int k) { return "U" + std::to_string(k); }

}  // namespace

const char* family_name(GeneratorFamily f) {
  switch (f) {
    case GeneratorFamily::Xi1: return "XI1";
    case GeneratorFamily::Xi2: return "XI2";
    case GeneratorFamily::Xi3: return "XI3";
    case GeneratorFamily::Xi4: return "XI4";
    case GeneratorFamily::Xi5: return "XI5";
    case GeneratorFamily::Xi6: return "XI6";
    case GeneratorFamily::Xi7: return "XI7";
    case GeneratorFamily::Xi8: return "XI8";
    case GeneratorFamily::Xi9: return "XI9";
    case GeneratorFamily::Xi10: return "XI10";
    case GeneratorFamily::Xi11: return "XI11";
    case GeneratorFamily::Xi12: return "XI12";
    case GeneratorFamily::EulerComposed: return "EULER_COMPOSED";
  }
  return "?";
}

GeneratorFamily family_from_name(const std::string& name) {
  static const std::pair<const char*, GeneratorFamily> table[] = {
      {"XI1", GeneratorFamily::Xi1},   {"XI2", GeneratorFamily::Xi2},
      {"XI3", GeneratorFamily::Xi3},   {"XI4", GeneratorFamily::Xi4},
      {"XI5", GeneratorFamily::Xi5},   {"XI6", GeneratorFamily::Xi6},
      {"XI7", GeneratorFamily::Xi7},   {"XI8", GeneratorFamily::Xi8},
      {"XI9", GeneratorFamily::Xi9},   {"XI10", GeneratorFamily::Xi10},
      {"XI11", GeneratorFamily::Xi11}, {"XI12", GeneratorFamily::Xi12},
      {"EULER_COMPOSED", GeneratorFamily::EulerComposed},
  };
  for (const auto& [n, f] : table)
    if (name == n) return f;
  fail(ErrorKind::Invalid, "unknown transform family '" + name + "'");
}

// ---------------------------------------------------------------------------
// PointMap basics
// ---------------------------------------------------------------------------

std::pair<Vec4, Vec5> PointMap::apply(const Vec4& X, const Vec5& U) const {
  return {coord(X), field_forward(X, U)};
}

std::pair<Vec4, Vec5> PointMap::apply_inverse(const Vec4& x,
                                              const Vec5& u) const {
  const Vec4 X = coord_inverse(x);
  return {X, field_backward(X, u)};
}

PointMap identity_map() {
  PointMap m;
  m.coord = [](const Vec4& X) { return X; };
  m.coord_inverse = m.coord;
  m.field_forward = [](const Vec4&, const Vec5& U) { return U; };
  m.field_backward = m.field_forward;
  m.jacobian = [](const Vec4&) { return mat4_identity(); };
  return m;
}

PointMap invert(const PointMap& t) {
  PointMap inv;
  inv.coord = t.coord_inverse;
  inv.coord_inverse = t.coord;
  inv.field_forward = [t](const Vec4& Xp, const Vec5& Up) {
    return t.field_backward(t.coord_inverse(Xp), Up);
  };
  inv.field_backward = [t](const Vec4& Xp, const Vec5& up) {
    return t.field_forward(t.coord_inverse(Xp), up);
  };
  if (t.jacobian) {
    inv.jacobian = [t](const Vec4& Xp) {
      return mat4_inverse(t.jacobian(t.coord_inverse(Xp)));
    };
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Infinitesimals and the Lie-flow oracle
// ---------------------------------------------------------------------------

namespace {

struct Infinitesimals {
  std::array<ScalarExpr, 4> xi;
  std::array<ScalarExpr, 5> eta;
};

// Contribution of the spatial-axis generator on axis i (2..4) with payload f.
void add_axis_flow(Infinitesimals& inf, int axis, const ScalarExpr& f) {
  inf.xi[axis - 1] = inf.xi[axis - 1] + f;
  ScalarExpr gain = cst(0.0);
  for (int k = 1; k <= 4; ++k)
    gain = gain + var(uvar(k).c_str()) * diff_expr(f, xvar(k));
  inf.eta[axis - 1] = inf.eta[axis - 1] + gain;
  const ScalarExpr fi = diff_expr(f, xvar(axis));
  for (int k = 1; k <= 4; ++k)
    inf.eta[k - 1] = inf.eta[k - 1] - var(uvar(k).c_str()) * fi;
}

void add_time_flow(Infinitesimals& inf, const ScalarExpr& f1) {
  inf.xi[0] = inf.xi[0] + f1;
  const ScalarExpr fp = diff_expr(f1, "x1");
  for (int k = 2; k <= 4; ++k)
    inf.eta[k - 1] = inf.eta[k - 1] - fp * var(uvar(k).c_str());
}

Infinitesimals build_infinitesimals(const GeneratorSpec& gen) {
  Infinitesimals inf;
  for (auto& e : inf.xi) e = cst(0.0);
  for (auto& e : inf.eta) e = cst(0.0);

  switch (gen.family) {
    case GeneratorFamily::Xi1:
      require_vars(gen.f, {"x1"}, "XI1 payload f");
      add_time_flow(inf, gen.f);
      break;
    case GeneratorFamily::Xi2:
    case GeneratorFamily::Xi3:
    case GeneratorFamily::Xi4: {
      require_vars(gen.f, kSpaceSet, "axis-flow payload f");
      const int axis =
          2 + static_cast<int>(gen.family) - static_cast<int>(GeneratorFamily::Xi2);
      add_axis_flow(inf, axis, gen.f);
      break;
    }
    case GeneratorFamily::Xi5:
    case GeneratorFamily::Xi6:
    case GeneratorFamily::Xi7:
    case GeneratorFamily::Xi8: {
      require_vars(gen.f, kSpaceSet, "u5-shift payload f");
      const int i =
          1 + static_cast<int>(gen.family) - static_cast<int>(GeneratorFamily::Xi5);
      inf.eta[4] = -(var(uvar(i).c_str()) * gen.f);
      break;
    }
    case GeneratorFamily::Xi9:
      require_vars(gen.f, kSpaceSet, "u5-scaling payload f");
      inf.eta[4] = var("u5") * gen.f;
      break;
    case GeneratorFamily::Xi10:
      require_vars(gen.f, kSpaceSet, "u5-shift payload f");
      inf.eta[4] = gen.f;
      break;
    case GeneratorFamily::Xi11:
      for (int k = 0; k < 4; ++k) {
        require_vars(gen.g[k], kSpaceSet, "XI11 payload g");
        inf.eta[k] = gen.g[k];
      }
      break;
    case GeneratorFamily::Xi12:
      for (int k = 1; k <= 4; ++k) inf.eta[k - 1] = var(uvar(k).c_str());
      break;
    case GeneratorFamily::EulerComposed: {
      const auto& p = gen.euler;
      ScalarExpr f1, w1, w2, w3;
      if (p.mode == EulerComposedPayload::Mode::Profiles) {
        f1 = cst(p.time_shift_rate);
        w1 = p.m1.empty() ? cst(0.0) : p.m1;
        w2 = p.m2.empty() ? cst(0.0) : p.m2;
        w3 = p.m3.empty() ? cst(0.0) : p.m3;
      } else {
        f1 = p.f1;
        w1 = p.n1.empty() ? cst(0.0) : p.n1;
        w2 = p.n2.empty() ? cst(0.0) : p.n2;
        w3 = p.n3.empty() ? cst(0.0) : p.n3;
      }
      require_vars(f1, {"x1"}, "composed time payload");
      require_vars(w1, {"x1"}, "composed rate 1");
      require_vars(w2, {"x1"}, "composed rate 2");
      require_vars(w3, {"x1"}, "composed rate 3");
      add_time_flow(inf, f1);
      add_axis_flow(inf, 2, w1 * var("x2") + w2 * var("x3"));
      add_axis_flow(inf, 3, cst(0.0) - w2 * var("x2") + w1 * var("x3"));
      add_axis_flow(inf, 4, w3);
      break;
    }
  }
  return inf;
}

struct CompiledFlow {
  std::array<CompiledExpr, 4> xi;
  std::array<CompiledExpr, 5> eta;
  std::array<std::array<CompiledExpr, 4>, 4> dxi;  // dxi[j][k] = d xi_j / d x_k
};

CompiledFlow compile_flow(const Infinitesimals& inf) {
  CompiledFlow out;
  for (int j = 0; j < 4; ++j) {
    out.xi[j] = CompiledExpr(inf.xi[j], space_state_vars());
    for (int k = 0; k < 4; ++k)
      out.dxi[j][k] =
          CompiledExpr(diff_expr(inf.xi[j], xvar(k + 1)), space_state_vars());
  }
  for (int A = 0; A < 5; ++A)
    out.eta[A] = CompiledExpr(inf.eta[A], space_state_vars());
  return out;
}

// State layout for the flow integrator: x(4), u(5), J(16 row-major).
constexpr int kFlowDim = 25;

void flow_rhs(const CompiledFlow& cf, const double* y, double* dy) {
  const double vals[9] = {y[0], y[1], y[2], y[3], y[4],
                          y[5], y[6], y[7], y[8]};
  for (int j = 0; j < 4; ++j) dy[j] = cf.xi[j].eval(vals);
  for (int A = 0; A < 5; ++A) dy[4 + A] = cf.eta[A].eval(vals);
  double D[4][4];
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) D[j][k] = cf.dxi[j][k].eval(vals);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += D[j][c] * y[9 + 4 * c + k];
      dy[9 + 4 * j + k] = s;
    }
}

}  // namespace

FlowResult lie_flow(const GeneratorSpec& gen, const Vec4& X, const Vec5& U,
                    double a, int steps) {
  if (steps < 1) fail(ErrorKind::Invalid, "lie_flow needs steps >= 1");
  const CompiledFlow cf = compile_flow(build_infinitesimals(gen));

  double y[kFlowDim];
  for (int i = 0; i < 4; ++i) y[i] = X[i];
  for (int i = 0; i < 5; ++i) y[4 + i] = U[i];
  for (int i = 0; i < 16; ++i) y[9 + i] = 0.0;
  y[9 + 0] = y[9 + 5] = y[9 + 10] = y[9 + 15] = 1.0;

  const double h = a / steps;
  double k1[kFlowDim], k2[kFlowDim], k3[kFlowDim], k4[kFlowDim], tmp[kFlowDim];
  for (int s = 0; s < steps; ++s) {
    flow_rhs(cf, y, k1);
    for (int i = 0; i < kFlowDim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    flow_rhs(cf, tmp, k2);
    for (int i = 0; i < kFlowDim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    flow_rhs(cf, tmp, k3);
    for (int i = 0; i < kFlowDim; ++i) tmp[i] = y[i] + h * k3[i];
    flow_rhs(cf, tmp, k4);
    for (int i = 0; i < kFlowDim; ++i)
      y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    for (int i = 0; i < kFlowDim; ++i)
      if (!std::isfinite(y[i]) || std::abs(y[i]) > 1e12) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "lie_flow blow-up at group parameter %.6g",
                      (s + 1) * h);
        fail(ErrorKind::SingularMap, buf);
      }
  }

  FlowResult out;
  for (int i = 0; i < 4; ++i) out.x[i] = y[i];
  for (int i = 0; i < 5; ++i) out.u[i] = y[4 + i];
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) out.jacobian[j][k] = y[9 + 4 * j + k];
  return out;
}

PointMap flow_map(const GeneratorSpec& gen, int steps) {
  const double a = gen.a;
  PointMap m;
  m.coord = [gen, a, steps](const Vec4& X) {
    return lie_flow(gen, X, Vec5{}, a, steps).x;
  };
  m.coord_inverse = [gen, a, steps](const Vec4& x) {
    return lie_flow(gen, x, Vec5{}, -a, steps).x;
  };
  m.field_forward = [gen, a, steps](const Vec4& X, const Vec5& U) {
    return lie_flow(gen, X, U, a, steps).u;
  };
  m.field_backward = [gen, a, steps](const Vec4& X, const Vec5& u) {
    // Flow the lower pair backward from (x, u); the coordinate part of the
    // backward flow reproduces X.
    const Vec4 x = lie_flow(gen, X, Vec5{}, a, steps).x;
    return lie_flow(gen, x, u, -a, steps).u;
  };
  m.jacobian = [gen, a, steps](const Vec4& X) {
    return lie_flow(gen, X, Vec5{}, a, steps).jacobian;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Time flow for XI1 / composed transforms
// ---------------------------------------------------------------------------

namespace {

class TimeFlow {
public:
  enum class Kind { Constant, Linear, Quadratic, Numeric };

  TimeFlow(ScalarExpr f, double a, int steps = 256)
      : f_(std::move(f)), a_(a), steps_(steps) {
    require_vars(f_, {"x1"}, "time-flow payload f");
    fp_ = diff_expr(f_, "x1");
    cf_ = CompiledExpr(f_, space_vars());
    cfp_ = CompiledExpr(fp_, space_vars());
    detect_pattern();
  }

  Kind kind() const { return kind_; }
  bool analytic() const { return kind_ != Kind::Numeric; }

  double forward(double X1) const {
    switch (kind_) {
      case Kind::Constant: return X1 + coef_ * a_;
      case Kind::Linear: return X1 * std::exp(coef_ * a_);
      case Kind::Quadratic: {
        const double den = 1.0 - coef_ * a_ * X1;
        if (!(den > 0.0))
          fail(ErrorKind::SingularMap, "time flow escapes to infinity");
        return X1 / den;
      }
      case Kind::Numeric: return integrate(X1, a_);
    }
    return X1;
  }

  double backward(double x1) const {
    switch (kind_) {
      case Kind::Constant: return x1 - coef_ * a_;
      case Kind::Linear: return x1 * std::exp(-coef_ * a_);
      case Kind::Quadratic: {
        const double den = 1.0 + coef_ * a_ * x1;
        if (!(den > 0.0))
          fail(ErrorKind::SingularMap, "time flow escapes to infinity");
        return x1 / den;
      }
      case Kind::Numeric: return integrate(x1, -a_);
    }
    return x1;
  }

  // d x~1 / dX1 = f(x1)/f(X1).
  double deriv(double X1, double x1) const {
    switch (kind_) {
      case Kind::Constant: return 1.0;
      case Kind::Linear: return std::exp(coef_ * a_);
      case Kind::Quadratic: {
        const double den = 1.0 - coef_ * a_ * X1;
        return 1.0 / (den * den);
      }
      case Kind::Numeric: {
        const double fX = eval_f(X1);
        if (fX == 0.0)
          fail(ErrorKind::SingularMap, "time-flow payload vanishes on trajectory");
        return eval_f(x1) / fX;
      }
    }
    return 1.0;
  }

  // Field scale f(X1)/f(x1) (finite limit at fixed points for the analytic
  // patterns).
  double field_scale(double X1, double x1) const { return 1.0 / deriv(X1, x1); }

  // d2 x~1 / dX1^2 = f(x1) (f'(x1) - f'(X1)) / f(X1)^2.
  double second(double X1, double x1) const {
    switch (kind_) {
      case Kind::Constant: return 0.0;
      case Kind::Linear: return 0.0;
      case Kind::Quadratic: {
        const double den = 1.0 - coef_ * a_ * X1;
        return 2.0 * coef_ * a_ / (den * den * den);
      }
      case Kind::Numeric: {
        const double fX = eval_f(X1);
        if (fX == 0.0)
          fail(ErrorKind::SingularMap, "time-flow payload vanishes on trajectory");
        return eval_f(x1) * (eval_fp(x1) - eval_fp(X1)) / (fX * fX);
      }
    }
    return 0.0;
  }

  // Closed-form lower-variable data (X1, dx~1/dX1 and d2 as expressions in
  // the lower x1); available for the analytic patterns only.
  std::optional<ScalarExpr> lower_inverse_expr() const {
    const ScalarExpr x1 = var("x1");
    switch (kind_) {
      case Kind::Constant: return x1 - cst(coef_ * a_);
      case Kind::Linear: return x1 * cst(std::exp(-coef_ * a_));
      case Kind::Quadratic:
        return x1 / (cst(1.0) + cst(coef_ * a_) * x1);
      case Kind::Numeric: return std::nullopt;
    }
    return std::nullopt;
  }

  std::optional<ScalarExpr> lower_deriv_expr() const {
    const ScalarExpr x1 = var("x1");
    switch (kind_) {
      case Kind::Constant: return cst(1.0);
      case Kind::Linear: return cst(std::exp(coef_ * a_));
      case Kind::Quadratic:
        return pow(cst(1.0) + cst(coef_ * a_) * x1, cst(2.0));
      case Kind::Numeric: return std::nullopt;
    }
    return std::nullopt;
  }

  std::optional<ScalarExpr> lower_second_expr() const {
    const ScalarExpr x1 = var("x1");
    switch (kind_) {
      case Kind::Constant: return cst(0.0);
      case Kind::Linear: return cst(0.0);
      case Kind::Quadratic:
        return cst(2.0 * coef_ * a_) *
               pow(cst(1.0) + cst(coef_ * a_) * x1, cst(3.0));
      case Kind::Numeric: return std::nullopt;
    }
    return std::nullopt;
  }

private:
  Kind kind_ = Kind::Numeric;
  double coef_ = 0.0;
  ScalarExpr f_, fp_;
  CompiledExpr cf_, cfp_;
  double a_;
  int steps_;

  double eval_f(double x1) const {
    const double vals[4] = {x1, 0.0, 0.0, 0.0};
    return cf_.eval(vals);
  }
  double eval_fp(double x1) const {
    const double vals[4] = {x1, 0.0, 0.0, 0.0};
    return cfp_.eval(vals);
  }

  void detect_pattern() {
    const ExprNode* n = f_.root();
    auto match_power = [](const ExprNode* p, double* c) {
      // x1 | x1^2 with an optional constant factor handled by caller
      if (p->kind == ExprNode::Kind::Variable && p->name == "x1") {
        *c = 1.0;
        return 1;
      }
      if (p->kind == ExprNode::Kind::Binary && p->bop == BinaryOp::Pow &&
          p->a->kind == ExprNode::Kind::Variable && p->a->name == "x1" &&
          p->b->kind == ExprNode::Kind::Constant && p->b->value == 2.0) {
        *c = 1.0;
        return 2;
      }
      return 0;
    };
    if (n->kind == ExprNode::Kind::Constant) {
      kind_ = Kind::Constant;
      coef_ = n->value;
      return;
    }
    double cdummy;
    int p = match_power(n, &cdummy);
    if (p == 1) { kind_ = Kind::Linear; coef_ = 1.0; return; }
    if (p == 2) { kind_ = Kind::Quadratic; coef_ = 1.0; return; }
    if (n->kind == ExprNode::Kind::Binary && n->bop == BinaryOp::Mul) {
      const ExprNode* lhs = n->a.get();
      const ExprNode* rhs = n->b.get();
      if (lhs->kind == ExprNode::Kind::Constant) {
        p = match_power(rhs, &cdummy);
        if (p == 1) { kind_ = Kind::Linear; coef_ = lhs->value; return; }
        if (p == 2) { kind_ = Kind::Quadratic; coef_ = lhs->value; return; }
      }
      if (rhs->kind == ExprNode::Kind::Constant) {
        p = match_power(lhs, &cdummy);
        if (p == 1) { kind_ = Kind::Linear; coef_ = rhs->value; return; }
        if (p == 2) { kind_ = Kind::Quadratic; coef_ = rhs->value; return; }
      }
    }
    kind_ = Kind::Numeric;
  }

  double integrate(double x0, double a) const {
    if (eval_f(x0) == 0.0)
      fail(ErrorKind::SingularMap, "time-flow payload vanishes at start point");
    double x = x0;
    const double h = a / steps_;
    for (int s = 0; s < steps_; ++s) {
      const double k1 = eval_f(x);
      const double k2 = eval_f(x + 0.5 * h * k1);
      const double k3 = eval_f(x + 0.5 * h * k2);
      const double k4 = eval_f(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!std::isfinite(x) || std::abs(x) > 1e12)
        fail(ErrorKind::SingularMap, "time flow escapes to infinity");
    }
    return x;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// XI1
// ---------------------------------------------------------------------------

namespace {

PointMap xi1_map(const std::shared_ptr<TimeFlow>& tf) {
  PointMap m;
  m.coord = [tf](const Vec4& X) {
    Vec4 x = X;
    x[0] = tf->forward(X[0]);
    return x;
  };
  m.coord_inverse = [tf](const Vec4& x) {
    Vec4 X = x;
    X[0] = tf->backward(x[0]);
    return X;
  };
  m.field_forward = [tf](const Vec4& X, const Vec5& U) {
    const double x1 = tf->forward(X[0]);
    const double s = tf->field_scale(X[0], x1);
    return Vec5{U[0], U[1] * s, U[2] * s, U[3] * s, U[4]};
  };
  m.field_backward = [tf](const Vec4& X, const Vec5& u) {
    const double x1 = tf->forward(X[0]);
    const double w = tf->deriv(X[0], x1);
    return Vec5{u[0], u[1] * w, u[2] * w, u[3] * w, u[4]};
  };
  m.jacobian = [tf](const Vec4& X) {
    Mat4 J = mat4_identity();
    J[0][0] = tf->deriv(X[0], tf->forward(X[0]));
    return J;
  };
  return m;
}

}  // namespace

TransformResult xi1_transform(const ConservationSystem& P, const ScalarExpr& f,
                              double a) {
  validate_conservation(P);
  auto tf = std::make_shared<TimeFlow>(f, a);
  TransformResult out;
  out.map = xi1_map(tf);

  if (tf->analytic()) {
    const ScalarExpr W = *tf->lower_deriv_expr();
    const ScalarExpr W2 = *tf->lower_second_expr();
    std::map<std::string, ScalarExpr> subst_map;
    subst_map.emplace("U1", var("u1"));
    for (int k = 2; k <= 4; ++k)
      subst_map.emplace(Uvar(k), var(uvar(k).c_str()) * W);
    subst_map.emplace("U5", var("u5"));
    for (int k = 0; k < 12; ++k) {
      const ScalarExpr composed = substitute(P.flux[k], subst_map);
      out.system.flux[k] = BalanceElement(
          k < 9 ? composed / (W * W) : composed / W);
    }
    for (int k = 0; k < 3; ++k)
      out.system.source[k] =
          BalanceElement(cst(0.0) - var(uvar(k + 2).c_str()) * W2 / (W * W));
    out.system.source[3] = BalanceElement(cst(0.0));
  } else {
    auto fluxes = std::make_shared<std::array<CompiledExpr, 12>>();
    for (int k = 0; k < 12; ++k)
      (*fluxes)[k] = CompiledExpr(P.flux[k], capital_state_vars());
    for (int k = 0; k < 12; ++k) {
      out.system.flux[k] = BalanceElement(BalanceElement::Fn(
          [tf, fluxes, k](const Vec4& x, const Vec5& u) {
            const double X1 = tf->backward(x[0]);
            const double w = tf->deriv(X1, x[0]);
            const double U[5] = {u[0], u[1] * w, u[2] * w, u[3] * w, u[4]};
            const double v = (*fluxes)[k].eval(U);
            return k < 9 ? v / (w * w) : v / w;
          }));
    }
    for (int k = 0; k < 3; ++k) {
      out.system.source[k] = BalanceElement(BalanceElement::Fn(
          [tf, k](const Vec4& x, const Vec5& u) {
            const double X1 = tf->backward(x[0]);
            const double w = tf->deriv(X1, x[0]);
            return -u[k + 1] * tf->second(X1, x[0]) / (w * w);
          }));
    }
    out.system.source[3] = BalanceElement(cst(0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Numeric induced-element reference (class-shape maps)
// ---------------------------------------------------------------------------

namespace {

struct InducedCtx {
  PointMap map;
  std::array<CompiledExpr, 12> flux;
  double fd_step = 1e-5;

  // Capital-side flux matrix Q (zero-based 5x5; column 0 holds densities).
  Mat5 qmatrix(const Vec5& U) const {
    Mat5 Q{};
    for (int r = 0; r < 5; ++r) Q[r][0] = U[r];
    for (int c = 1; c <= 3; ++c) Q[0][c] = U[c];
    for (int r = 1; r <= 4; ++r)
      for (int c = 1; c <= 3; ++c)
        Q[r][c] = flux[3 * (r - 1) + c - 1].eval(U);
    return Q;
  }

  // Induced flux tensor q (zero-based rows 0..4, columns 0..3) at a capital
  // point with frozen capital state U.
  std::array<std::array<double, 4>, 5> qtensor(const Vec4& X,
                                               const Vec5& U) const {
    const Mat4 J = map.jacobian(X);
    const double det = mat4_det(J);
    const double W = J[0][0];
    if (std::abs(det) < 1e-300 || std::abs(W) < 1e-300)
      fail(ErrorKind::SingularMap, "singular Jacobian in induced elements");
    const Mat5 Q = qmatrix(U);
    std::array<std::array<double, 4>, 5> q{};
    for (int n = 0; n < 4; ++n)
      for (int d = 0; d < 4; ++d) {
        double s = 0.0;
        for (int m = 0; m < 4; ++m)
          for (int c = 0; c < 4; ++c) s += J[n][m] * Q[m][c] * J[d][c];
        q[n][d] = s / (W * det);
      }
    for (int d = 0; d < 4; ++d) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += Q[4][c] * J[d][c];
      q[4][d] = s / W;
    }
    return q;
  }
};

BalanceElement::Fn induced_flux_fn(const std::shared_ptr<InducedCtx>& ctx,
                                   int row, int dir) {
  return [ctx, row, dir](const Vec4& x, const Vec5& u) {
    const Vec4 X = ctx->map.coord_inverse(x);
    const Vec5 U = ctx->map.field_backward(X, u);
    return ctx->qtensor(X, U)[row - 1][dir - 1];
  };
}

// Production terms from the divergence of the pushed-forward frozen state:
// hold the capital state fixed and differentiate the composed flux entries.
Vec5 frozen_state_sources(const InducedCtx& ctx, const Vec4& x,
                          const Vec5& u) {
  const Vec4 X = ctx.map.coord_inverse(x);
  const Vec5 U0 = ctx.map.field_backward(X, u);
  const Mat4 J = ctx.map.jacobian(X);
  const Mat4 Jinv = mat4_inverse(J);
  Vec5 out{};
  for (int c = 0; c < 4; ++c) {
    const double h = ctx.fd_step * std::max(1.0, std::abs(X[c]));
    Vec4 Xp = X, Xm = X;
    Xp[c] += h;
    Xm[c] -= h;
    const auto qp = ctx.qtensor(Xp, U0);
    const auto qm = ctx.qtensor(Xm, U0);
    for (int n = 0; n < 5; ++n) {
      double div_c = 0.0;
      for (int d = 0; d < 4; ++d)
        div_c += Jinv[c][d] * (qp[n][d] - qm[n][d]) / (2.0 * h);
      out[n] += div_c;
    }
  }
  return out;
}

}  // namespace

BalanceSystem induced_numeric(const PointMap& map, const ConservationSystem& P,
                              double fd_step) {
  validate_conservation(P);
  if (!map.jacobian)
    fail(ErrorKind::Invalid, "induced_numeric requires Jacobian data");
  auto ctx = std::make_shared<InducedCtx>();
  ctx->map = map;
  ctx->fd_step = fd_step;
  for (int k = 0; k < 12; ++k)
    ctx->flux[k] = CompiledExpr(P.flux[k], capital_state_vars());

  BalanceSystem out;
  for (int row = 2; row <= 5; ++row)
    for (int dir = 2; dir <= 4; ++dir)
      out.flux[BalanceSystem::flux_index(row, dir) - 1] =
          BalanceElement(induced_flux_fn(ctx, row, dir));
  for (int m = 0; m < 4; ++m) {
    out.source[m] = BalanceElement(BalanceElement::Fn(
        [ctx, m](const Vec4& x, const Vec5& u) {
          return frozen_state_sources(*ctx, x, u)[m + 1];
        }));
  }
  return out;
}

// ---------------------------------------------------------------------------
// XI2..XI4
// ---------------------------------------------------------------------------

namespace {

struct Xi234Ctx {
  GeneratorSpec gen;
  int axis = 2;           // 2..4
  Xi234Options opts;
  std::array<CompiledExpr, 12> flux;
  // dflux[k][A] = d P_{k+1} / d U_{A+1}
  std::array<std::array<CompiledExpr, 5>, 12> dflux;

  Mat4 jac(const Vec4& X) const {
    return lie_flow(gen, X, Vec5{}, gen.a, opts.flow_steps).jacobian;
  }

  // 5x5 matrix with the coordinate block and the pivot in the (5,5) slot.
  Mat5 jhat(const Mat4& J) const {
    Mat5 H{};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) H[r][c] = J[r][c];
    H[4][4] = J[axis - 1][axis - 1];
    return H;
  }

  Mat5 amat(const Mat4& J) const {
    const double pivot = J[axis - 1][axis - 1];
    if (std::abs(pivot) < 1e-300)
      fail(ErrorKind::SingularMap, "singular axis-flow map (pivot vanished)");
    Mat5 A = jhat(J);
    for (auto& row : A)
      for (auto& v : row) v /= pivot;
    return A;
  }

  Mat5 qmatrix(const Vec5& U) const {
    Mat5 Q{};
    for (int r = 0; r < 5; ++r) Q[r][0] = U[r];
    for (int c = 1; c <= 3; ++c) Q[0][c] = U[c];
    for (int r = 1; r <= 4; ++r)
      for (int c = 1; c <= 3; ++c) Q[r][c] = flux[3 * (r - 1) + c - 1].eval(U);
    return Q;
  }

  // dQ[A][j][c] = d Q_{jc} / d U_{A+1}
  void qderivs(const Vec5& U, double dQ[5][5][5]) const {
    for (int A = 0; A < 5; ++A)
      for (int j = 0; j < 5; ++j)
        for (int c = 0; c < 5; ++c) dQ[A][j][c] = 0.0;
    for (int A = 0; A < 5; ++A) {
      for (int r = 0; r < 5; ++r)
        dQ[A][r][0] = (r == A) ? 1.0 : 0.0;
      for (int c = 1; c <= 3; ++c) dQ[A][0][c] = (c == A) ? 1.0 : 0.0;
      for (int r = 1; r <= 4; ++r)
        for (int c = 1; c <= 3; ++c)
          dQ[A][r][c] = dflux[3 * (r - 1) + c - 1][A].eval(U);
    }
  }
};

// Source formula built from mixed second partials of J P^T: a double sum over
// X-derivatives of the Jacobian entries and U-derivatives of the flux matrix.
Vec4 mixed_partial_sources(const Xi234Ctx& ctx, const Vec4& x, const Vec5& u) {
  const Vec4 X = lie_flow(ctx.gen, x, Vec5{}, -ctx.gen.a, ctx.opts.flow_steps).x;
  const Mat4 J = ctx.jac(X);
  const Mat5 A = ctx.amat(J);
  const Mat5 Ainv = mat5_inverse(A);
  const Vec5 U = mat5_apply(Ainv, u);

  // dJhat[k][l][c] = d Jhat_{lc} / d X_{k+1} by central differences.
  double dJhat[4][5][5];
  for (int k = 0; k < 4; ++k) {
    const double h = ctx.opts.fd_step * std::max(1.0, std::abs(X[k]));
    Vec4 Xp = X, Xm = X;
    Xp[k] += h;
    Xm[k] -= h;
    const Mat5 Hp = ctx.jhat(ctx.jac(Xp));
    const Mat5 Hm = ctx.jhat(ctx.jac(Xm));
    for (int l = 0; l < 5; ++l)
      for (int c = 0; c < 5; ++c)
        dJhat[k][l][c] = (Hp[l][c] - Hm[l][c]) / (2.0 * h);
  }

  double dQ[5][5][5];
  ctx.qderivs(U, dQ);

  Vec4 out{};
  for (int m = 1; m <= 4; ++m) {  // rows 2..5 -> p13..p16
    double total = 0.0;
    for (int j = 0; j < 5; ++j) {
      double inner = 0.0;
      for (int l = 0; l < 5; ++l) {
        double t1 = 0.0;
        for (int k = 0; k < 4; ++k) {
          double s = 0.0;
          for (int c = 0; c < 5; ++c) s += dJhat[k][l][c] * dQ[l][j][c];
          t1 += u[k] * s;
        }
        double t2 = 0.0;
        if (l < 4) {
          for (int k = 0; k < 5; ++k) {
            double s = 0.0;
            for (int c = 0; c < 5; ++c) s += dJhat[l][l][c] * dQ[k][j][c];
            t2 += u[k] * s;
          }
        }
        inner += t1 - t2;
      }
      total += A[m][j] * inner;
    }
    out[m - 1] = total;
  }
  return out;
}

}  // namespace

TransformResult xi234_transform(const ConservationSystem& P,
                                const ScalarExpr& f, int axis, double a,
                                const Xi234Options& opts) {
  validate_conservation(P);
  if (axis < 2 || axis > 4)
    fail(ErrorKind::Invalid, "axis-flow transform needs axis in {2,3,4}");
  require_vars(f, kSpaceSet, "axis-flow payload f");

  GeneratorSpec gen;
  gen.family = axis == 2   ? GeneratorFamily::Xi2
               : axis == 3 ? GeneratorFamily::Xi3
                           : GeneratorFamily::Xi4;
  gen.a = a;
  gen.f = f;

  TransformResult out;
  out.map = flow_map(gen, opts.flow_steps);

  // Fluxes from the shared numeric induction (identical to q = A Q Jhat^T for
  // this family).
  BalanceSystem numeric = induced_numeric(out.map, P, opts.fd_step);
  out.system.flux = numeric.flux;

  if (opts.source_mode == Xi234SourceMode::FrozenState) {
    out.system.source = numeric.source;
  } else {
    auto ctx = std::make_shared<Xi234Ctx>();
    ctx->gen = gen;
    ctx->axis = axis;
    ctx->opts = opts;
    for (int k = 0; k < 12; ++k) {
      ctx->flux[k] = CompiledExpr(P.flux[k], capital_state_vars());
      for (int A = 0; A < 5; ++A)
        ctx->dflux[k][A] =
            CompiledExpr(diff_expr(P.flux[k], Uvar(A + 1)), capital_state_vars());
    }
    for (int m = 0; m < 4; ++m) {
      out.system.source[m] = BalanceElement(BalanceElement::Fn(
          [ctx, m](const Vec4& x, const Vec5& u) {
            return mixed_partial_sources(*ctx, x, u)[m];
          }));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// XI5..XI10
// ---------------------------------------------------------------------------

namespace {

PointMap xi5to10_map(Xi5to10Kind kind, int i, const ScalarExpr& f, double a) {
  auto cf = std::make_shared<CompiledExpr>(f, space_vars());
  PointMap m = identity_map();
  switch (kind) {
    case Xi5to10Kind::AddScaledU:
      m.field_forward = [cf, i, a](const Vec4& X, const Vec5& U) {
        Vec5 u = U;
        u[4] = U[4] - a * U[i - 1] * cf->eval(X);
        return u;
      };
      m.field_backward = [cf, i, a](const Vec4& X, const Vec5& u) {
        Vec5 U = u;
        U[4] = u[4] + a * u[i - 1] * cf->eval(X);
        return U;
      };
      break;
    case Xi5to10Kind::ExpScale:
      m.field_forward = [cf, a](const Vec4& X, const Vec5& U) {
        Vec5 u = U;
        u[4] = U[4] * std::exp(a * cf->eval(X));
        return u;
      };
      m.field_backward = [cf, a](const Vec4& X, const Vec5& u) {
        Vec5 U = u;
        U[4] = u[4] * std::exp(-a * cf->eval(X));
        return U;
      };
      break;
    case Xi5to10Kind::AddFunction:
      m.field_forward = [cf, a](const Vec4& X, const Vec5& U) {
        Vec5 u = U;
        u[4] = U[4] + a * cf->eval(X);
        return u;
      };
      m.field_backward = [cf, a](const Vec4& X, const Vec5& u) {
        Vec5 U = u;
        U[4] = u[4] - a * cf->eval(X);
        return U;
      };
      break;
  }
  return m;
}

}  // namespace

TransformResult xi5to10_transform(const ConservationSystem& P,
                                  Xi5to10Kind kind, int i, const ScalarExpr& f,
                                  double a) {
  validate_conservation(P);
  require_vars(f, kSpaceSet, "u5-transform payload f");
  if (kind == Xi5to10Kind::AddScaledU && (i < 1 || i > 4))
    fail(ErrorKind::Invalid, "scaled-state u5 shift needs i in 1..4");

  TransformResult out;
  out.map = xi5to10_map(kind, i, f, a);

  // Inverse field map for the flux arguments.
  ScalarExpr u5_capital;
  const ScalarExpr ea = cst(a);
  switch (kind) {
    case Xi5to10Kind::AddScaledU:
      u5_capital = var("u5") + ea * var(uvar(i).c_str()) * f;
      break;
    case Xi5to10Kind::ExpScale:
      u5_capital = var("u5") * exp(cst(-a) * f);
      break;
    case Xi5to10Kind::AddFunction:
      u5_capital = var("u5") - ea * f;
      break;
  }
  std::map<std::string, ScalarExpr> sub;
  for (int k = 1; k <= 4; ++k) sub.emplace(Uvar(k), var(uvar(k).c_str()));
  sub.emplace("U5", u5_capital);

  auto composed = [&](const ScalarExpr& e) { return substitute(e, sub); };
  std::array<ScalarExpr, 12> dU5;  // d P_k / d U5, composed
  for (int k = 0; k < 12; ++k) dU5[k] = composed(diff_expr(P.flux[k], "U5"));
  std::array<ScalarExpr, 4> fx;  // gradient of f
  for (int k = 0; k < 4; ++k) fx[k] = diff_expr(f, xvar(k + 1));

  BalanceSystem& sys = out.system;
  switch (kind) {
    case Xi5to10Kind::AddScaledU: {
      const ScalarExpr ui = var(uvar(i).c_str());
      for (int k = 0; k < 9; ++k) sys.flux[k] = BalanceElement(composed(P.flux[k]));
      for (int k = 1; k <= 3; ++k) {
        // Flux correction: a * f * (flux of conservation row i in direction
        // k+1); row 1 carries the state components themselves.
        ScalarExpr rowflux = (i == 1) ? var(uvar(k + 1).c_str())
                                      : composed(P.flux[3 * i + k - 6 - 1]);
        sys.flux[9 + k - 1] =
            BalanceElement(composed(P.flux[9 + k - 1]) + ea * rowflux * f);
      }
      for (int k = 1; k <= 3; ++k) {
        ScalarExpr s = cst(0.0);
        for (int j = 2; j <= 4; ++j)
          s = s + fx[j - 1] * dU5[3 * k + j - 4 - 1];
        sys.source[k - 1] = BalanceElement(ea * ui * s);
      }
      ScalarExpr s16 = fx[0];
      for (int j = 2; j <= 4; ++j) {
        ScalarExpr term = dU5[8 + j - 1];
        if (i >= 2) term = term + ea * f * dU5[3 * i + j - 7 - 1];
        s16 = s16 + fx[j - 1] * term;
      }
      sys.source[3] = BalanceElement(ea * ui * s16);
      break;
    }
    case Xi5to10Kind::ExpScale: {
      for (int k = 0; k < 12; ++k)
        sys.flux[k] = BalanceElement(composed(P.flux[k]));
      const ScalarExpr decay = exp(cst(-a) * f);
      for (int k = 1; k <= 3; ++k) {
        ScalarExpr s = cst(0.0);
        for (int j = 2; j <= 4; ++j)
          s = s + fx[j - 1] * dU5[3 * k + j - 4 - 1];
        sys.source[k - 1] = BalanceElement(ea * decay * s * var("u5"));
      }
      ScalarExpr s16 = fx[0];
      for (int j = 2; j <= 4; ++j) s16 = s16 + fx[j - 1] * dU5[8 + j - 1];
      sys.source[3] = BalanceElement(ea * s16 * var("u5"));
      break;
    }
    case Xi5to10Kind::AddFunction: {
      for (int k = 0; k < 12; ++k)
        sys.flux[k] = BalanceElement(composed(P.flux[k]));
      for (int k = 1; k <= 3; ++k) {
        ScalarExpr s = cst(0.0);
        for (int j = 2; j <= 4; ++j)
          s = s + fx[j - 1] * dU5[3 * k + j - 4 - 1];
        sys.source[k - 1] = BalanceElement(ea * s);
      }
      ScalarExpr s16 = fx[0];
      for (int j = 2; j <= 4; ++j) s16 = s16 + fx[j - 1] * dU5[8 + j - 1];
      sys.source[3] = BalanceElement(ea * s16);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// XI11 and the divergence constraint
// ---------------------------------------------------------------------------

DivergenceReport check_divergence_free(const std::array<ScalarExpr, 4>& g,
                                       const DomainBox& box, int npoints,
                                       double tol) {
  ScalarExpr div = cst(0.0);
  for (int k = 0; k < 4; ++k) {
    require_vars(g[k], kSpaceSet, "divergence-check payload g");
    div = div + diff_expr(g[k], xvar(k + 1));
  }
  const CompiledExpr cdiv(div, space_vars());

  // Low-discrepancy points from the generalized golden-ratio recurrence.
  const double phi = 1.1673039782614186843;
  double alpha[4], state[4];
  double p = phi;
  for (int k = 0; k < 4; ++k) {
    alpha[k] = 1.0 / p;
    p *= phi;
    state[k] = 0.5;
  }

  DivergenceReport rep;
  rep.tolerance = tol;
  for (int n = 0; n < npoints; ++n) {
    Vec4 x;
    for (int k = 0; k < 4; ++k) {
      state[k] += alpha[k];
      state[k] -= std::floor(state[k]);
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * state[k];
    }
    const double v = std::abs(cdiv.eval(x));
    if (v > rep.max_abs) {
      rep.max_abs = v;
      rep.argmax = x;
    }
  }
  rep.pass = rep.max_abs <= tol;
  return rep;
}

namespace {

PointMap xi11_map(const std::array<ScalarExpr, 4>& g, double a) {
  auto cg = std::make_shared<std::array<CompiledExpr, 4>>();
  for (int k = 0; k < 4; ++k) (*cg)[k] = CompiledExpr(g[k], space_vars());
  PointMap m = identity_map();
  m.field_forward = [cg, a](const Vec4& X, const Vec5& U) {
    Vec5 u = U;
    for (int k = 0; k < 4; ++k) u[k] = U[k] + a * (*cg)[k].eval(X);
    return u;
  };
  m.field_backward = [cg, a](const Vec4& X, const Vec5& u) {
    Vec5 U = u;
    for (int k = 0; k < 4; ++k) U[k] = u[k] - a * (*cg)[k].eval(X);
    return U;
  };
  return m;
}

}  // namespace

TransformResult xi11_transform(const ConservationSystem& P,
                               const std::array<ScalarExpr, 4>& g, double a) {
  validate_conservation(P);
  const DivergenceReport rep = check_divergence_free(g);
  if (!rep.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "state-shift payload violates the divergence condition "
                  "(max |div g| = %.3e)",
                  rep.max_abs);
    fail(ErrorKind::Invalid, buf);
  }

  TransformResult out;
  out.map = xi11_map(g, a);

  std::map<std::string, ScalarExpr> sub;
  for (int k = 1; k <= 4; ++k)
    sub.emplace(Uvar(k), var(uvar(k).c_str()) - cst(a) * g[k - 1]);
  sub.emplace("U5", var("u5"));
  auto composed = [&](const ScalarExpr& e) { return substitute(e, sub); };

  for (int k = 0; k < 12; ++k)
    out.system.flux[k] = BalanceElement(composed(P.flux[k]));

  // dg[i][j] = d g_{i+1} / d x_{j+1}
  std::array<std::array<ScalarExpr, 4>, 4> dg;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) dg[i][j] = diff_expr(g[i], xvar(j + 1));

  for (int k = 1; k <= 3; ++k) {
    ScalarExpr s = dg[k][0];  // d g_{k+1} / d x1
    for (int i = 1; i <= 4; ++i)
      for (int j = 2; j <= 4; ++j)
        s = s + dg[i - 1][j - 1] *
                    composed(diff_expr(P.flux[3 * k + j - 4 - 1], Uvar(i)));
    out.system.source[k - 1] = BalanceElement(cst(a) * s);
  }
  ScalarExpr s16 = cst(0.0);
  for (int i = 1; i <= 4; ++i)
    for (int j = 2; j <= 4; ++j)
      s16 = s16 + dg[i - 1][j - 1] *
                      composed(diff_expr(P.flux[8 + j - 1], Uvar(i)));
  out.system.source[3] = BalanceElement(cst(a) * s16);
  return out;
}

// ---------------------------------------------------------------------------
// XI12
// ---------------------------------------------------------------------------

namespace {

PointMap xi12_map(double a) {
  const double s = std::exp(a);
  PointMap m = identity_map();
  m.field_forward = [s](const Vec4&, const Vec5& U) {
    return Vec5{s * U[0], s * U[1], s * U[2], s * U[3], U[4]};
  };
  m.field_backward = [s](const Vec4&, const Vec5& u) {
    return Vec5{u[0] / s, u[1] / s, u[2] / s, u[3] / s, u[4]};
  };
  return m;
}

}  // namespace

std::pair<PointMap, ConservationSystem> xi12_transform(
    const ConservationSystem& P, double a) {
  validate_conservation(P);
  std::map<std::string, ScalarExpr> sub;
  for (int k = 1; k <= 4; ++k)
    sub.emplace(Uvar(k), cst(std::exp(-a)) * var(Uvar(k).c_str()));
  sub.emplace("U5", var("U5"));

  ConservationSystem scaled;
  for (int k = 0; k < 12; ++k) {
    const ScalarExpr composed = substitute(P.flux[k], sub);
    scaled.flux[k] = (k < 9) ? cst(std::exp(a)) * composed : composed;
  }
  return {xi12_map(a), scaled};
}

// ---------------------------------------------------------------------------
// Composed transformation and the rotating/gravity system
// ---------------------------------------------------------------------------

namespace {

// Numerically verify the Euler flux structure and recover the pressure law.
// P1 = U2^2/U1 + p(U1, U5), so evaluating P1 with the velocity slots zeroed
// leaves exactly the pressure.
ScalarExpr extract_euler_pressure(const ConservationSystem& P) {
  const ScalarExpr zero = cst(0.0);
  const ScalarExpr pressure = substitute(
      P.flux[0], {{"U2", zero}, {"U3", zero}, {"U4", zero}});
  for (const auto& v : pressure.variables())
    if (v != "U1" && v != "U5")
      fail(ErrorKind::Invalid,
           "composed transform requires the Euler flux structure");
  const ConservationSystem ref = build_euler_system(pressure);
  SplitMix64 rng(0x45756c6572ULL);
  for (int s = 0; s < 25; ++s) {
    double U[5];
    U[0] = rng.uniform(0.5, 2.0);
    for (int k = 1; k < 4; ++k) U[k] = rng.uniform(-1.0, 1.0);
    U[4] = rng.uniform(0.5, 2.0);
    for (int k = 0; k < 12; ++k) {
      const CompiledExpr a(P.flux[k], capital_state_vars());
      const CompiledExpr b(ref.flux[k], capital_state_vars());
      const double va = a.eval(U), vb = b.eval(U);
      if (std::abs(va - vb) > 1e-9 * std::max(1.0, std::abs(vb)))
        fail(ErrorKind::Invalid,
             "composed transform requires the Euler flux structure");
    }
  }
  return pressure;
}

// Scalar profile data as functions of the capital time coordinate.
struct ComposedCtx {
  std::function<double(double)> fwd, bwd;       // x1 <-> X1
  std::function<double(double)> W, W2;          // x~1', x~1''
  std::array<std::function<double(double)>, 3> m, dm, ddm;
};

std::shared_ptr<ComposedCtx> make_profiles_ctx(const EulerComposedPayload& p,
                                               double a) {
  auto ctx = std::make_shared<ComposedCtx>();
  const double c = p.time_shift_rate;
  ctx->fwd = [c, a](double X1) { return X1 + c * a; };
  ctx->bwd = [c, a](double x1) { return x1 - c * a; };
  ctx->W = [](double) { return 1.0; };
  ctx->W2 = [](double) { return 0.0; };
  const ScalarExpr profs[3] = {p.m1.empty() ? cst(0.0) : p.m1,
                               p.m2.empty() ? cst(0.0) : p.m2,
                               p.m3.empty() ? cst(0.0) : p.m3};
  for (int i = 0; i < 3; ++i) {
    require_vars(profs[i], {"x1"}, "composed profile");
    auto c0 = std::make_shared<CompiledExpr>(profs[i], space_vars());
    auto c1 = std::make_shared<CompiledExpr>(diff_expr(profs[i], "x1"),
                                             space_vars());
    auto c2 = std::make_shared<CompiledExpr>(
        diff_expr(diff_expr(profs[i], "x1"), "x1"), space_vars());
    auto at = [](const std::shared_ptr<CompiledExpr>& ce, double X1) {
      const double vals[4] = {X1, 0.0, 0.0, 0.0};
      return ce->eval(vals);
    };
    ctx->m[i] = [c0, a, at](double X1) { return a * at(c0, X1); };
    ctx->dm[i] = [c1, a, at](double X1) { return a * at(c1, X1); };
    ctx->ddm[i] = [c2, a, at](double X1) { return a * at(c2, X1); };
  }
  return ctx;
}

double simpson(const std::function<double(double)>& f, double lo, double hi,
               int panels) {
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i)
    s += f(lo + i * h) * ((i % 2) ? 4.0 : 2.0);
  return s * h / 3.0;
}

std::shared_ptr<ComposedCtx> make_generators_ctx(const EulerComposedPayload& p,
                                                 double a) {
  auto ctx = std::make_shared<ComposedCtx>();
  require_vars(p.f1, {"x1"}, "composed time payload f1");
  auto tf = std::make_shared<TimeFlow>(p.f1, a);
  auto cf1 = std::make_shared<CompiledExpr>(p.f1, space_vars());

  ctx->fwd = [tf](double X1) { return tf->forward(X1); };
  ctx->bwd = [tf](double x1) { return tf->backward(x1); };
  ctx->W = [tf](double X1) { return tf->deriv(X1, tf->forward(X1)); };
  ctx->W2 = [tf](double X1) { return tf->second(X1, tf->forward(X1)); };

  auto cf1p = std::make_shared<CompiledExpr>(diff_expr(p.f1, "x1"),
                                             space_vars());
  const ScalarExpr ns[3] = {p.n1.empty() ? cst(0.0) : p.n1,
                            p.n2.empty() ? cst(0.0) : p.n2,
                            p.n3.empty() ? cst(0.0) : p.n3};
  for (int i = 0; i < 3; ++i) {
    require_vars(ns[i], {"x1"}, "composed integrand n");
    auto cn = std::make_shared<CompiledExpr>(ns[i], space_vars());
    auto cnp = std::make_shared<CompiledExpr>(diff_expr(ns[i], "x1"),
                                              space_vars());
    auto at = [](const std::shared_ptr<CompiledExpr>& ce, double x) {
      const double vals[4] = {x, 0.0, 0.0, 0.0};
      return ce->eval(vals);
    };
    // m_i(X1; a): composite-Simpson quadrature of n_i/f1 along the time flow,
    // Richardson-checked against the half-resolution rule.
    ctx->m[i] = [cn, cf1, tf, at](double X1) {
      const double x1 = tf->forward(X1);
      auto integrand = [&](double s) {
        const double f1 = at(cf1, s);
        if (f1 == 0.0)
          fail(ErrorKind::SingularMap, "composed quadrature hits f1 = 0");
        return at(cn, s) / f1;
      };
      const double coarse = simpson(integrand, X1, x1, 256);
      const double fine = simpson(integrand, X1, x1, 512);
      if (std::abs(fine - coarse) > std::max(1e-12, 1e-9 * std::abs(fine)))
        fail(ErrorKind::Solver, "composed profile quadrature did not converge");
      return fine;
    };
    // d m_i / dX1 = (n_i(x1) - n_i(X1)) / f1(X1)
    ctx->dm[i] = [cn, cf1, tf, at](double X1) {
      const double x1 = tf->forward(X1);
      const double f1 = at(cf1, X1);
      if (f1 == 0.0)
        fail(ErrorKind::SingularMap, "composed profile needs f1(X1) != 0");
      return (at(cn, x1) - at(cn, X1)) / f1;
    };
    // Quotient rule applied to dm.
    ctx->ddm[i] = [cn, cnp, cf1, cf1p, tf, at](double X1) {
      const double x1 = tf->forward(X1);
      const double f1 = at(cf1, X1);
      if (f1 == 0.0)
        fail(ErrorKind::SingularMap, "composed profile needs f1(X1) != 0");
      const double W = tf->deriv(X1, x1);
      const double num = at(cn, x1) - at(cn, X1);
      const double dnum = at(cnp, x1) * W - at(cnp, X1);
      return dnum / f1 - num * at(cf1p, X1) / (f1 * f1);
    };
  }
  return ctx;
}

PointMap composed_map(const std::shared_ptr<ComposedCtx>& ctx) {
  PointMap m;
  m.coord = [ctx](const Vec4& X) {
    const double X1 = X[0];
    const double m1 = ctx->m[0](X1), m2 = ctx->m[1](X1), m3 = ctx->m[2](X1);
    const double e = std::exp(m1), c = std::cos(m2), s = std::sin(m2);
    return Vec4{ctx->fwd(X1), e * (X[1] * c + X[2] * s),
                e * (-X[1] * s + X[2] * c), X[3] + m3};
  };
  m.coord_inverse = [ctx](const Vec4& x) {
    const double X1 = ctx->bwd(x[0]);
    const double m1 = ctx->m[0](X1), m2 = ctx->m[1](X1), m3 = ctx->m[2](X1);
    const double e = std::exp(-m1), c = std::cos(m2), s = std::sin(m2);
    return Vec4{X1, e * (c * x[1] - s * x[2]), e * (s * x[1] + c * x[2]),
                x[3] - m3};
  };
  m.jacobian = [ctx](const Vec4& X) {
    const double X1 = X[0];
    const Vec4 x = [&] {
      const double m1 = ctx->m[0](X1), m2 = ctx->m[1](X1), m3 = ctx->m[2](X1);
      const double e = std::exp(m1), c = std::cos(m2), s = std::sin(m2);
      return Vec4{ctx->fwd(X1), e * (X[1] * c + X[2] * s),
                  e * (-X[1] * s + X[2] * c), X[3] + m3};
    }();
    const double m1 = ctx->m[0](X1), m2 = ctx->m[1](X1);
    const double d1 = ctx->dm[0](X1), d2 = ctx->dm[1](X1), d3 = ctx->dm[2](X1);
    const double e = std::exp(m1), c = std::cos(m2), s = std::sin(m2);
    Mat4 J{};
    J[0][0] = ctx->W(X1);
    J[1][0] = d1 * x[1] + d2 * x[2];
    J[1][1] = e * c;
    J[1][2] = e * s;
    J[2][0] = -d2 * x[1] + d1 * x[2];
    J[2][1] = -e * s;
    J[2][2] = e * c;
    J[3][0] = d3;
    J[3][3] = 1.0;
    return J;
  };
  m.field_forward = [ctx, m](const Vec4& X, const Vec5& U) {
    const Mat4 J = m.jacobian(X);
    const double det = mat4_det(J);
    Vec5 u{};
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += J[r][c] * U[c];
      u[r] = s / det;
    }
    u[4] = U[4];
    return u;
  };
  m.field_backward = [ctx, m](const Vec4& X, const Vec5& u) {
    const Mat4 J = m.jacobian(X);
    const double det = mat4_det(J);
    // Invert u_{1..4} = J U / det.
    const Mat4 Jinv = mat4_inverse(J);
    Vec5 U{};
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += Jinv[r][c] * u[c];
      U[r] = s * det;
    }
    U[4] = u[4];
    return U;
  };
  return m;
}

}  // namespace

TransformResult euler_composed_transform(const ConservationSystem& P,
                                         const EulerComposedPayload& payload,
                                         double a) {
  validate_conservation(P);
  const ScalarExpr pressure = extract_euler_pressure(P);

  std::shared_ptr<ComposedCtx> ctx =
      payload.mode == EulerComposedPayload::Mode::Profiles
          ? make_profiles_ctx(payload, a)
          : make_generators_ctx(payload, a);

  TransformResult out;
  out.map = composed_map(ctx);

  const bool closed =
      payload.mode == EulerComposedPayload::Mode::Profiles;
  if (closed) {
    // Lower-variable profile data: X1 = x1 - c*a.
    const ScalarExpr X1e = var("x1") - cst(payload.time_shift_rate * a);
    std::map<std::string, ScalarExpr> to_lower{{"x1", X1e}};
    auto prof = [&](const ScalarExpr& e) {
      return substitute(cst(a) * e, to_lower);
    };
    const ScalarExpr profs[3] = {payload.m1.empty() ? cst(0.0) : payload.m1,
                                 payload.m2.empty() ? cst(0.0) : payload.m2,
                                 payload.m3.empty() ? cst(0.0) : payload.m3};
    const ScalarExpr M1 = prof(profs[0]);
    const ScalarExpr D1 = prof(diff_expr(profs[0], "x1"));
    const ScalarExpr D2 = prof(diff_expr(profs[1], "x1"));
    const ScalarExpr D3 = prof(diff_expr(profs[2], "x1"));
    const ScalarExpr DD1 = prof(diff_expr(diff_expr(profs[0], "x1"), "x1"));
    const ScalarExpr DD2 = prof(diff_expr(diff_expr(profs[1], "x1"), "x1"));
    const ScalarExpr DD3 = prof(diff_expr(diff_expr(profs[2], "x1"), "x1"));
    (void)D3;

    const ScalarExpr u1 = var("u1"), u2 = var("u2"), u3 = var("u3"),
                     u4 = var("u4"), u5 = var("u5");
    // Pressure argument is the capital density U1 = exp(2 m1) u1.  The
    // in-plane momentum rows carry p/W^2; the x4 row additionally carries
    // exp(-2 m1) (the plane dilation does not act along x4) -- forced by the
    // induced-flux construction and the residual-transfer oracle.
    std::map<std::string, ScalarExpr> psub{
        {"U1", exp(cst(2.0) * M1) * u1}, {"U5", u5}};
    const ScalarExpr pi = substitute(pressure, psub);
    const ScalarExpr pi4 = pi * exp(cst(-2.0) * M1);

    BalanceSystem& sys = out.system;
    sys.flux[0] = BalanceElement(u2 * u2 / u1 + pi);
    sys.flux[1] = BalanceElement(u2 * u3 / u1);
    sys.flux[2] = BalanceElement(u2 * u4 / u1);
    sys.flux[3] = BalanceElement(u2 * u3 / u1);
    sys.flux[4] = BalanceElement(u3 * u3 / u1 + pi);
    sys.flux[5] = BalanceElement(u3 * u4 / u1);
    sys.flux[6] = BalanceElement(u2 * u4 / u1);
    sys.flux[7] = BalanceElement(u3 * u4 / u1);
    sys.flux[8] = BalanceElement(u4 * u4 / u1 + pi4);
    sys.flux[9] = BalanceElement(u2 * u5 / u1);
    sys.flux[10] = BalanceElement(u3 * u5 / u1);
    sys.flux[11] = BalanceElement(u4 * u5 / u1);

    const ScalarExpr x2 = var("x2"), x3 = var("x3");
    const ScalarExpr centrif1 = DD1 - D1 * D1 + D2 * D2;
    const ScalarExpr centrif2 = DD2 - cst(2.0) * D1 * D2;
    sys.source[0] = BalanceElement(cst(2.0) * (D1 * u2 + D2 * u3) +
                                   (x2 * centrif1 + x3 * centrif2) * u1);
    sys.source[1] = BalanceElement(cst(2.0) * (D1 * u3 - D2 * u2) +
                                   (cst(0.0) - x2 * centrif2 + x3 * centrif1) * u1);
    sys.source[2] = BalanceElement(DD3 * u1);
    sys.source[3] = BalanceElement(cst(2.0) * D1 * u5);
  } else {
    auto cp = std::make_shared<CompiledExpr>(pressure, capital_state_vars());
    auto flux_fn = [ctx, cp](int which) {
      // which: 0..11 -> p1..p12
      return BalanceElement::Fn([ctx, cp, which](const Vec4& x, const Vec5& u) {
        const double X1 = ctx->bwd(x[0]);
        const double W = ctx->W(X1);
        const double m1 = ctx->m[0](X1);
        const double Uv[5] = {std::exp(2.0 * m1) * u[0], 0, 0, 0, u[4]};
        const double pi = cp->eval(Uv) / (W * W);
        const double pi4 = pi * std::exp(-2.0 * m1);
        const double u1 = u[0], u2 = u[1], u3 = u[2], u4 = u[3], u5 = u[4];
        switch (which) {
          case 0: return u2 * u2 / u1 + pi;
          case 1: return u2 * u3 / u1;
          case 2: return u2 * u4 / u1;
          case 3: return u2 * u3 / u1;
          case 4: return u3 * u3 / u1 + pi;
          case 5: return u3 * u4 / u1;
          case 6: return u2 * u4 / u1;
          case 7: return u3 * u4 / u1;
          case 8: return u4 * u4 / u1 + pi4;
          case 9: return u2 * u5 / u1;
          case 10: return u3 * u5 / u1;
          default: return u4 * u5 / u1;
        }
      });
    };
    for (int k = 0; k < 12; ++k) out.system.flux[k] = BalanceElement(flux_fn(k));

    auto src_fn = [ctx](int which) {
      return BalanceElement::Fn([ctx, which](const Vec4& x, const Vec5& u) {
        const double X1 = ctx->bwd(x[0]);
        const double W = ctx->W(X1), W2 = ctx->W2(X1);
        const double d1 = ctx->dm[0](X1), d2 = ctx->dm[1](X1);
        const double dd1 = ctx->ddm[0](X1), dd2 = ctx->ddm[1](X1),
                     dd3 = ctx->ddm[2](X1);
        const double c1 = dd1 - d1 * d1 + d2 * d2;
        const double c2 = dd2 - 2.0 * d1 * d2;
        switch (which) {
          case 0:
            return 2.0 * (d1 * u[1] + d2 * u[2]) / W - W2 / (W * W) * u[1] +
                   (x[1] * c1 + x[2] * c2) * u[0] / (W * W);
          case 1:
            return 2.0 * (d1 * u[2] - d2 * u[1]) / W - W2 / (W * W) * u[2] +
                   (-x[1] * c2 + x[2] * c1) * u[0] / (W * W);
          case 2:
            return -W2 / (W * W) * u[3] + dd3 / (W * W) * u[0];
          default:
            return 2.0 * d1 * u[4] / W;
        }
      });
    };
    for (int m = 0; m < 4; ++m)
      out.system.source[m] = BalanceElement(src_fn(m));
  }
  return out;
}

BalanceSystem rotating_gravity_system(double omega, double g,
                                      const ScalarExpr& pressure,
                                      const RotationSigns& signs) {
  BalanceSystem sys = conservation_to_balance(build_euler_system(pressure));
  const ScalarExpr u1 = var("u1"), u2 = var("u2"), u3 = var("u3");
  const ScalarExpr x2 = var("x2"), x3 = var("x3");
  const ScalarExpr w = cst(omega), w2 = cst(omega * omega);
  sys.source[0] =
      BalanceElement(cst(2.0) * w * u3 + cst(signs.s2) * w2 * x2 * u1);
  sys.source[1] =
      BalanceElement(cst(-2.0) * w * u2 + cst(signs.s3) * w2 * x3 * u1);
  sys.source[2] = BalanceElement(cst(g) * u1);
  sys.source[3] = BalanceElement(cst(0.0));
  return sys;
}

// ---------------------------------------------------------------------------
// Map dispatch
// ---------------------------------------------------------------------------

PointMap make_point_map(const GeneratorSpec& gen) {
  switch (gen.family) {
    case GeneratorFamily::Xi1: {
      auto tf = std::make_shared<TimeFlow>(gen.f, gen.a);
      return xi1_map(tf);
    }
    case GeneratorFamily::Xi2:
    case GeneratorFamily::Xi3:
    case GeneratorFamily::Xi4:
      return flow_map(gen);
    case GeneratorFamily::Xi5:
    case GeneratorFamily::Xi6:
    case GeneratorFamily::Xi7:
    case GeneratorFamily::Xi8: {
      const int i = 1 + static_cast<int>(gen.family) -
                    static_cast<int>(GeneratorFamily::Xi5);
      return xi5to10_map(Xi5to10Kind::AddScaledU, i, gen.f, gen.a);
    }
    case GeneratorFamily::Xi9:
      return xi5to10_map(Xi5to10Kind::ExpScale, 0, gen.f, gen.a);
    case GeneratorFamily::Xi10:
      return xi5to10_map(Xi5to10Kind::AddFunction, 0, gen.f, gen.a);
    case GeneratorFamily::Xi11:
      return xi11_map(gen.g, gen.a);
    case GeneratorFamily::Xi12:
      return xi12_map(gen.a);
    case GeneratorFamily::EulerComposed: {
      auto ctx = gen.euler.mode == EulerComposedPayload::Mode::Profiles
                     ? make_profiles_ctx(gen.euler, gen.a)
                     : make_generators_ctx(gen.euler, gen.a);
      return composed_map(ctx);
    }
  }
  fail(ErrorKind::Invalid, "unhandled generator family");
}

}  // namespace balcons
