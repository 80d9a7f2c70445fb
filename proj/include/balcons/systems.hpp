// Data model of the two system classes and their pointwise residual
// evaluators.
//
// Conservation form (capital variables):
//   d/dX1 U1 + d/dX2 U2 + d/dX3 U3 + d/dX4 U4 = 0
//   d/dX1 Um + sum_d d/dXd P[3(m-2)+d-1]      = 0,   m = 2..5
// with fluxes P1..P12 depending on U1..U5 only.
//
// Balance form (lower variables): the same layout over (x1..x4, u1..u5) with
// elements p1..p12 (fluxes) and p13..p16 (production terms), each either a
// closed-form expression or an opaque numeric evaluator.

#ifndef BALCONS_SYSTEMS_HPP
#define BALCONS_SYSTEMS_HPP

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "balcons/core.hpp"
#include "balcons/expr.hpp"

namespace balcons {

struct ConservationSystem {
  std::array<ScalarExpr, 12> flux;  // P1..P12 over U1..U5 (index 0 = P1)

  // Flux of row m (2..5) in direction d (2..4), 1-based flux number.
  static int flux_index(int row, int dir) { return 3 * (row - 2) + (dir - 1); }
  const ScalarExpr& flux_of(int row, int dir) const {
    return flux[flux_index(row, dir) - 1];
  }
};

// Validates that every flux depends on U1..U5 only and none is empty.
void validate_conservation(const ConservationSystem& sys);

// The twelve Euler fluxes with a caller-supplied pressure law p(U1, U5).
ConservationSystem build_euler_system(const ScalarExpr& pressure);

// One element of a balance system: expression over {x1..x4, u1..u5} or an
// opaque evaluator.  Default-constructed elements are identically zero.
class BalanceElement {
public:
  using Fn = std::function<double(const Vec4& x, const Vec5& u)>;

  BalanceElement();                       // zero
  BalanceElement(ScalarExpr e);           // closed form
  explicit BalanceElement(Fn fn);         // numeric evaluator

  double operator()(const Vec4& x, const Vec5& u) const;
  bool is_expression() const { return fn_ == nullptr; }
  bool is_zero() const;
  const ScalarExpr& expression() const;   // throws if not closed form

private:
  ScalarExpr expr_;
  std::shared_ptr<CompiledExpr> compiled_;
  Fn fn_;
};

struct BalanceSystem {
  std::array<BalanceElement, 12> flux;    // p1..p12
  std::array<BalanceElement, 4> source;   // p13..p16

  bool closed_form() const;

  static int flux_index(int row, int dir) { return 3 * (row - 2) + (dir - 1); }
  const BalanceElement& flux_of(int row, int dir) const {
    return flux[flux_index(row, dir) - 1];
  }
};

// Lifts a conservation system into balance form (variables renamed U->u,
// sources identically zero).  Same expression structure, so compiled flux
// programs perform identical arithmetic.
BalanceSystem conservation_to_balance(const ConservationSystem& sys);

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

struct GridSpec {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
  std::array<int, 3> cells{1, 1, 1};

  double spacing(int axis) const {
    return (hi[axis] - lo[axis]) / cells[axis];
  }
  double center(int axis, int i) const {
    return lo[axis] + (i + 0.5) * spacing(axis);
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(cells[0]) * cells[1] * cells[2];
  }
};

// Space-time sampled solution: analytic evaluator or cell-centered snapshots.
class Field {
public:
  using Evaluator = std::function<Vec5(const Vec4& x)>;

  Field() = default;

  static Field analytic(Evaluator fn);
  // Component expressions over {x1..x4}.
  static Field analytic(const std::array<ScalarExpr, 5>& components);
  static Field constant(const Vec5& value);

  struct Snapshot {
    double time = 0.0;
    std::vector<double> data;  // 5 * n2 * n3 * n4, component-major innermost
  };

  static Field discrete(GridSpec grid, std::vector<Snapshot> snapshots);

  bool is_discrete() const { return grid_.has_value(); }
  const GridSpec& grid() const;
  const std::vector<Snapshot>& snapshots() const;

  // Space-time evaluation; discrete fields use multilinear interpolation in
  // space and linear interpolation between snapshots.  Throws when the
  // requested point (or interpolation stencil) leaves the stored domain.
  Vec5 operator()(const Vec4& x) const;

  Vec5 cell_value(std::size_t snapshot, int i2, int i3, int i4) const;

private:
  Evaluator eval_;
  std::optional<GridSpec> grid_;
  std::vector<Snapshot> snaps_;
};

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

// Second-order centered-difference residual of the system at a point; h holds
// the four finite-difference steps.  Component 1 is the fixed linear
// conservation law.
Vec5 residual(const ConservationSystem& sys, const Field& field, const Vec4& x,
              const Vec4& h);
Vec5 residual(const BalanceSystem& sys, const Field& field, const Vec4& x,
              const Vec4& h);

// ---------------------------------------------------------------------------
// Field dumps (one CSV per snapshot plus a JSON sidecar)
// ---------------------------------------------------------------------------

void write_field_csv(const Field& field, const std::string& directory);
Field read_field_csv(const std::string& directory);

}  // namespace balcons

#endif
