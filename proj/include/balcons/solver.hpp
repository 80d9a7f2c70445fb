// First-order finite-volume solver (Rusanov fluxes, dimension-by-dimension
// unsplit) for autonomous conservation systems, plus Strang splitting for
// balance systems.  The time axis is x1 throughout.

#ifndef BALCONS_SOLVER_HPP
#define BALCONS_SOLVER_HPP

#include <array>
#include <functional>

#include "balcons/core.hpp"
#include "balcons/systems.hpp"
#include "balcons/transforms.hpp"

namespace balcons {

struct SolverConfig {
  std::array<int, 3> cells{1, 1, 1};        // n2, n3, n4
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
  double cfl = 0.45;
  double start_time = 0.0;
  double end_time = 0.0;
  enum class Bc { Periodic, ZeroGradient } bc = Bc::Periodic;
  enum class Scheme { ForwardEuler, SspRk2 } scheme = Scheme::ForwardEuler;
  double snapshot_interval = 0.0;   // 0: store initial and final states only
  double wave_speed_bound = 0.0;    // 0: estimate via power iteration
  double max_dt = 0.0;              // 0: no cap (CFL only); needed for
                                    // source-dominated degenerate-grid runs
  bool euler_positivity_guard = false;  // abort when u1 <= 0 (vacuum guard)

  GridSpec grid() const {
    GridSpec g;
    g.lo = lo;
    g.hi = hi;
    g.cells = cells;
    return g;
  }
};

void validate_config(const SolverConfig& cfg);

// Cell averages advanced with the Rusanov (local Lax-Friedrichs) flux; the
// wave speed per cell/direction comes from 20 power-iteration steps on the
// flux Jacobian (built by exact differentiation) with a 10% margin, unless a
// bound is supplied.
Field solve_conservation(const ConservationSystem& sys, const Field& ic,
                         const SolverConfig& cfg);

// Strang splitting: half-step source update (RK4 at fixed cell coordinates),
// full finite-volume transport step with the fluxes p1..p12 evaluated at face
// midpoints, half-step source update.
Field solve_balance_splitting(const BalanceSystem& sys, const Field& ic,
                              const SolverConfig& cfg);

// Classical 2D isentropic vortex advected by the background velocity,
// embedded in the (x2,x3) plane with u4 = 0, in conserved variables with unit
// background density/entropy carrier (U5 = rho, so p = rho^gamma under the
// pressure law U5*U1^(gamma-1)).
Field isentropic_vortex_field(double center_x2, double center_x3,
                              double strength, double bg_vx, double bg_vy,
                              double gamma);

// u(x) = Phi(X, U(X)) with X the pre-image of x under the map.
Field pushforward_field(const PointMap& map, const Field& src);

}  // namespace balcons

#endif
