// Finite equivalence transformations between the autonomous conservation
// class and the balance-law class: coordinate/field maps stored in the
// capital -> lower direction, their inverses, Jacobian data, the numeric
// Lie-flow oracle, and the induced balance-system elements.

#ifndef BALCONS_TRANSFORMS_HPP
#define BALCONS_TRANSFORMS_HPP

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "balcons/core.hpp"
#include "balcons/expr.hpp"
#include "balcons/systems.hpp"

namespace balcons {

enum class GeneratorFamily {
  Xi1,          // time reparametrization, payload f(x1)
  Xi2, Xi3, Xi4,   // spatial-axis flow, payload f(x1..x4)
  Xi5, Xi6, Xi7, Xi8,  // u5 shift scaled by u_i, payload f(x1..x4)
  Xi9,          // u5 exponential scaling, payload f(x1..x4)
  Xi10,         // u5 additive shift, payload f(x1..x4)
  Xi11,         // state shift by divergence-free g1..g4(x)
  Xi12,         // uniform scaling of u1..u4
  EulerComposed,  // time reparametrization + plane rotation/dilation + x4 shift
};

const char* family_name(GeneratorFamily f);
GeneratorFamily family_from_name(const std::string& name);

struct EulerComposedPayload {
  enum class Mode { Profiles, Generators };
  Mode mode = Mode::Profiles;

  // Profiles: dilation/rotation/shift rates m1,m2,m3 as expressions in x1
  // (the capital time coordinate); the realized profiles are a*m1 etc., and
  // the time axis maps as x1 = X1 + time_shift_rate*a.  One-parameter group
  // structure holds exactly when time_shift_rate == 0 or the rates are
  // constants.
  double time_shift_rate = 0.0;
  ScalarExpr m1, m2, m3;

  // Generators: time flow dx1/da = f1(x1) together with integrands n1..n3;
  // profiles are quadratures of n_i/f1 along the time flow.
  ScalarExpr f1, n1, n2, n3;
};

struct GeneratorSpec {
  GeneratorFamily family = GeneratorFamily::Xi1;
  double a = 0.0;
  ScalarExpr f;                     // Xi1..Xi10 payload
  std::array<ScalarExpr, 4> g{};    // Xi11 payload
  EulerComposedPayload euler{};     // EulerComposed payload
};

// Realized point transformation.  All closures are pure and safe to call
// concurrently.  `jacobian` returns dx/dX.
struct PointMap {
  std::function<Vec4(const Vec4& X)> coord;
  std::function<Vec4(const Vec4& x)> coord_inverse;
  std::function<Vec5(const Vec4& X, const Vec5& U)> field_forward;
  std::function<Vec5(const Vec4& X, const Vec5& u)> field_backward;
  std::function<Mat4(const Vec4& X)> jacobian;

  std::pair<Vec4, Vec5> apply(const Vec4& X, const Vec5& U) const;
  std::pair<Vec4, Vec5> apply_inverse(const Vec4& x, const Vec5& u) const;
};

PointMap identity_map();

// Group inverse (parameter a -> -a realized through the stored closures).
PointMap invert(const PointMap& t);

// ---------------------------------------------------------------------------
// Numeric flow oracle
// ---------------------------------------------------------------------------

struct FlowResult {
  Vec4 x{};
  Vec5 u{};
  Mat4 jacobian{};  // dx/dX integrated through the variational equations
};

// Classical RK4 integration of Lie's equations dX/da = xi, dU/da = eta for
// the projected infinitesimals of `gen`, together with the variational
// equations for the coordinate Jacobian.  Universal numeric oracle for the
// closed-form maps.
FlowResult lie_flow(const GeneratorSpec& gen, const Vec4& X, const Vec5& U,
                    double a, int steps = 256);

// Map realized through lie_flow (closed forms exist for most families; this
// is the generic fallback and the oracle the closed forms are checked
// against).
PointMap flow_map(const GeneratorSpec& gen, int steps = 256);

// Closed-form map when the family/payload admits one, flow-backed otherwise.
PointMap make_point_map(const GeneratorSpec& gen);

// ---------------------------------------------------------------------------
// Family transforms: map + induced balance system
// ---------------------------------------------------------------------------

struct TransformResult {
  PointMap map;
  BalanceSystem system;
};

// Time reparametrization x1 = x~1(X1; a) driven by dx/da = f(x); momentum
// states rescale by f(X1)/f(x1).  Fluxes for rows 2..4 divide by
// (d x~1/dX1)^2; the u5-row fluxes divide by the first power (forced by the
// induced-flux construction; see tests).
TransformResult xi1_transform(const ConservationSystem& P, const ScalarExpr& f,
                              double a);

enum class Xi234SourceMode {
  FrozenState,  // divergence of the pushed-forward frozen state (default)
  MixedPartial, // double sum of mixed second partials of J P^T
};

struct Xi234Options {
  int flow_steps = 256;
  double fd_step = 1e-5;  // step scale for X-derivatives of the map
  Xi234SourceMode source_mode = Xi234SourceMode::FrozenState;
};

// Spatial-axis flow for i in {2,3,4} with payload f(x1..x4).  The map comes
// from lie_flow; fluxes follow q = A Q J^T; production terms are numeric.
TransformResult xi234_transform(const ConservationSystem& P,
                                const ScalarExpr& f, int axis, double a,
                                const Xi234Options& opts = {});

enum class Xi5to10Kind { AddScaledU, ExpScale, AddFunction };

// u5-only transformations:
//   AddScaledU(i): u5 = U5 - a*U_i*f(x)
//   ExpScale:      u5 = U5*exp(a*f(x))
//   AddFunction:   u5 = U5 + a*f(x)
// Induced elements in closed form, composed with the inverse field map.
TransformResult xi5to10_transform(const ConservationSystem& P,
                                  Xi5to10Kind kind, int i, const ScalarExpr& f,
                                  double a);

struct DivergenceReport {
  bool pass = false;
  double max_abs = 0.0;
  Vec4 argmax{};
  double tolerance = 1e-8;
};

struct DomainBox {
  Vec4 lo{-1.0, -1.0, -1.0, -1.0};
  Vec4 hi{1.0, 1.0, 1.0, 1.0};
};

DivergenceReport check_divergence_free(const std::array<ScalarExpr, 4>& g,
                                       const DomainBox& box = {},
                                       int npoints = 1000, double tol = 1e-8);

// State shift u_k = U_k + a*g_k(x) under the divergence constraint on g.
TransformResult xi11_transform(const ConservationSystem& P,
                               const std::array<ScalarExpr, 4>& g, double a);

// Uniform scaling of u1..u4; maps conservation form to conservation form.
std::pair<PointMap, ConservationSystem> xi12_transform(
    const ConservationSystem& P, double a);

// Composed transformation of section-4 type: time reparametrization,
// rotation/dilation in the (x2,x3) plane, shift along x4.  Requires Euler
// flux structure (verified numerically against the reconstructed pressure).
TransformResult euler_composed_transform(const ConservationSystem& P,
                                         const EulerComposedPayload& payload,
                                         double a);

// Closed-form rotating/gravity Euler balance system.  The centrifugal signs
// default to the rest-state-oracle resolution (+omega^2 x2 u1, +omega^2 x3
// u1); callers may flip them to reproduce the alternative convention.
struct RotationSigns {
  double s2 = 1.0;
  double s3 = 1.0;
};

BalanceSystem rotating_gravity_system(double omega, double g,
                                      const ScalarExpr& pressure,
                                      const RotationSigns& signs = {});

// ---------------------------------------------------------------------------
// Numeric induced-element reference
// ---------------------------------------------------------------------------

// Independent numeric induction for any map of the class shape (x1 moves only
// through x1 = x~1(X1), fields follow u_{1..4} = J U / det J, u5 = U5):
// fluxes from the Piola-type construction, production terms from the
// divergence of the pushed-forward frozen state.  Serves as the reference the
// closed-form blocks are validated against.
BalanceSystem induced_numeric(const PointMap& map, const ConservationSystem& P,
                              double fd_step = 1e-5);

}  // namespace balcons

#endif
