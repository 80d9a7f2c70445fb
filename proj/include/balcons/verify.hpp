// Oracles and harnesses: group-law/round-trip checks, closed-form vs
// numeric-flow cross-checks, residual convergence studies, the exact Riemann
// solver oracle, and field comparison.  Every check is deterministic given a
// seed; seeds are recorded in reports.

#ifndef BALCONS_VERIFY_HPP
#define BALCONS_VERIFY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "balcons/core.hpp"
#include "balcons/systems.hpp"
#include "balcons/transforms.hpp"

namespace balcons {

struct SampleBox {
  Vec4 x_lo{-0.8, -0.8, -0.8, -0.8};
  Vec4 x_hi{0.8, 0.8, 0.8, 0.8};
  Vec5 u_lo{0.5, -1.0, -1.0, -1.0, 0.5};
  Vec5 u_hi{2.0, 1.0, 1.0, 1.0, 2.0};
};

std::pair<Vec4, Vec5> sample_point(SplitMix64& rng, const SampleBox& box);

// max over seeded samples of |map(a)(map(b)(X,U)) - map(a+b)(X,U)|_inf.
double group_law_check(const GeneratorSpec& gen, double a, double b,
                       int samples, std::uint64_t seed = 0x67726f7570ULL,
                       const SampleBox& box = {});

// max over samples of |invert(map)(map(X,U)) - (X,U)|_inf.
double round_trip_check(const GeneratorSpec& gen, int samples,
                        std::uint64_t seed = 0x726f756e64ULL,
                        const SampleBox& box = {});

// max over samples of |map at a=0 - identity|_inf.
double identity_check(const GeneratorSpec& gen, int samples,
                      std::uint64_t seed = 0x6964656eULL,
                      const SampleBox& box = {});

// max over samples of |closed-form map - lie_flow map|_inf.
double closed_vs_flow_check(const GeneratorSpec& gen, int samples,
                            int flow_steps = 256,
                            std::uint64_t seed = 0x666c6f77ULL,
                            const SampleBox& box = {});

// ---------------------------------------------------------------------------
// Residual convergence
// ---------------------------------------------------------------------------

struct ConvergenceReport {
  std::vector<double> steps;   // dyadically decreasing FD steps (max over axes)
  std::vector<double> norms;   // max-norm of the residual over the point set
  double observed_order = 0.0; // least-squares slope on log-log data
  double window_lo = 0.0, window_hi = 0.0;
  bool exact = false;          // all residuals at rounding level
  bool pass = false;
  std::uint64_t seed = 0;
};

using SystemRef =
    std::variant<const ConservationSystem*, const BalanceSystem*>;

ConvergenceReport residual_convergence(SystemRef sys, const Field& field,
                                       std::span<const Vec4> points,
                                       const Vec4& h0, int levels,
                                       double window_lo = 1.7,
                                       double window_hi = 2.3);

// Seeded interior sample points for convergence studies.
std::vector<Vec4> sample_points(int count, const Vec4& lo, const Vec4& hi,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Exact Riemann solver oracle (1D Euler, ideal gas)
// ---------------------------------------------------------------------------

struct RiemannState {
  double rho = 1.0;
  double u = 0.0;
  double p = 1.0;
};

class RiemannFan {
public:
  RiemannFan(const RiemannState& left, const RiemannState& right, double gamma);

  double star_pressure() const { return p_star_; }
  double star_velocity() const { return u_star_; }

  // Self-similar solution sampled along the ray xi = x/t.
  RiemannState sample(double xi) const;

private:
  RiemannState L_, R_;
  double gamma_;
  double p_star_ = 0.0, u_star_ = 0.0;
};

RiemannFan exact_riemann_euler(const RiemannState& left,
                               const RiemannState& right, double gamma);

// ---------------------------------------------------------------------------
// Field comparison
// ---------------------------------------------------------------------------

enum class Norm { L1, Linf };

struct SampleRegion {
  Vec4 lo{0.0, 0.0, 0.0, 0.0};
  Vec4 hi{1.0, 1.0, 1.0, 1.0};
  std::array<int, 4> counts{1, 8, 8, 1};
};

// Norm of the component-wise difference over the sample grid.  When either
// field is discrete the region shrinks by a two-cell halo on each spatial
// side to stay clear of boundary-condition artifacts.
double compare_fields(const Field& fa, const Field& fb, Norm norm,
                      SampleRegion region);

}  // namespace balcons

#endif
