#include "balcons/verify.hpp"

#include <algorithm>
#include <cmath>

namespace balcons {

std::pair<Vec4, Vec5> sample_point(SplitMix64& rng, const SampleBox& box) {
  Vec4 X;
  Vec5 U;
  for (int k = 0; k < 4; ++k) X[k] = rng.uniform(box.x_lo[k], box.x_hi[k]);
  for (int k = 0; k < 5; ++k) U[k] = rng.uniform(box.u_lo[k], box.u_hi[k]);
  return {X, U};
}

namespace {

double pair_distance(const Vec4& xa, const Vec5& ua, const Vec4& xb,
                     const Vec5& ub) {
  double m = 0.0;
  for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(xa[k] - xb[k]));
  for (int k = 0; k < 5; ++k) m = std::max(m, std::abs(ua[k] - ub[k]));
  return m;
}

}  // namespace

double group_law_check(const GeneratorSpec& gen, double a, double b,
                       int samples, std::uint64_t seed, const SampleBox& box) {
  if (samples < 1) fail(ErrorKind::Invalid, "group_law_check needs samples >= 1");
  GeneratorSpec ga = gen, gb = gen, gab = gen;
  ga.a = a;
  gb.a = b;
  gab.a = a + b;
  const PointMap ma = make_point_map(ga);
  const PointMap mb = make_point_map(gb);
  const PointMap mab = make_point_map(gab);

  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto [X, U] = sample_point(rng, box);
    const auto [xb, ub] = mb.apply(X, U);
    const auto [xba, uba] = ma.apply(xb, ub);
    const auto [xab, uab] = mab.apply(X, U);
    worst = std::max(worst, pair_distance(xba, uba, xab, uab));
  }
  return worst;
}

double round_trip_check(const GeneratorSpec& gen, int samples,
                        std::uint64_t seed, const SampleBox& box) {
  const PointMap m = make_point_map(gen);
  const PointMap mi = invert(m);
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto [X, U] = sample_point(rng, box);
    const auto [x, u] = m.apply(X, U);
    const auto [Xr, Ur] = mi.apply(x, u);
    worst = std::max(worst, pair_distance(Xr, Ur, X, U));
  }
  return worst;
}

double identity_check(const GeneratorSpec& gen, int samples,
                      std::uint64_t seed, const SampleBox& box) {
  GeneratorSpec g0 = gen;
  g0.a = 0.0;
  const PointMap m = make_point_map(g0);
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto [X, U] = sample_point(rng, box);
    const auto [x, u] = m.apply(X, U);
    worst = std::max(worst, pair_distance(x, u, X, U));
  }
  return worst;
}

double closed_vs_flow_check(const GeneratorSpec& gen, int samples,
                            int flow_steps, std::uint64_t seed,
                            const SampleBox& box) {
  const PointMap closed = make_point_map(gen);
  SplitMix64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto [X, U] = sample_point(rng, box);
    const auto [xc, uc] = closed.apply(X, U);
    const FlowResult fr = lie_flow(gen, X, U, gen.a, flow_steps);
    worst = std::max(worst, pair_distance(xc, uc, fr.x, fr.u));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Residual convergence
// ---------------------------------------------------------------------------

std::vector<Vec4> sample_points(int count, const Vec4& lo, const Vec4& hi,
                                std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Vec4> out(count);
  for (auto& p : out)
    for (int k = 0; k < 4; ++k) p[k] = rng.uniform(lo[k], hi[k]);
  return out;
}

ConvergenceReport residual_convergence(SystemRef sys, const Field& field,
                                       std::span<const Vec4> points,
                                       const Vec4& h0, int levels,
                                       double window_lo, double window_hi) {
  if (levels < 3)
    fail(ErrorKind::Invalid, "convergence study needs >= 3 refinement levels");
  ConvergenceReport rep;
  rep.window_lo = window_lo;
  rep.window_hi = window_hi;

  Vec4 h = h0;
  for (int level = 0; level < levels; ++level) {
    double norm = 0.0;
    for (const Vec4& x : points) {
      Vec5 r{};
      if (std::holds_alternative<const ConservationSystem*>(sys))
        r = residual(*std::get<const ConservationSystem*>(sys), field, x, h);
      else
        r = residual(*std::get<const BalanceSystem*>(sys), field, x, h);
      for (double v : r) norm = std::max(norm, std::abs(v));
    }
    rep.steps.push_back(*std::max_element(h.begin(), h.end()));
    rep.norms.push_back(norm);
    for (double& hk : h) hk *= 0.5;
  }

  double max_norm = *std::max_element(rep.norms.begin(), rep.norms.end());
  if (max_norm < 1e-13) {
    rep.exact = true;
    rep.observed_order = 0.0;
    rep.pass = true;
    return rep;
  }

  // Least squares on log-log (step, norm).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(rep.steps.size());
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(rep.steps[i]);
    const double ly = std::log(std::max(rep.norms[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  rep.observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  rep.pass =
      rep.observed_order >= window_lo && rep.observed_order <= window_hi;
  return rep;
}

// ---------------------------------------------------------------------------
// Exact Riemann solver (Toro's two-shock/two-rarefaction iteration)
// ---------------------------------------------------------------------------

namespace {

struct WaveFn {
  // f_K(p) and its derivative for the pressure iteration.
  double gamma;
  RiemannState s;
  double A, B, c;

  explicit WaveFn(const RiemannState& state, double g) : gamma(g), s(state) {
    A = 2.0 / ((gamma + 1.0) * s.rho);
    B = (gamma - 1.0) / (gamma + 1.0) * s.p;
    c = std::sqrt(gamma * s.p / s.rho);
  }

  double value(double p) const {
    if (p > s.p) {  // shock
      return (p - s.p) * std::sqrt(A / (p + B));
    }
    // rarefaction
    return 2.0 * c / (gamma - 1.0) *
           (std::pow(p / s.p, (gamma - 1.0) / (2.0 * gamma)) - 1.0);
  }

  double deriv(double p) const {
    if (p > s.p) {
      const double root = std::sqrt(A / (p + B));
      return root * (1.0 - 0.5 * (p - s.p) / (p + B));
    }
    return 1.0 / (s.rho * c) * std::pow(p / s.p, -(gamma + 1.0) / (2.0 * gamma));
  }
};

}  // namespace

RiemannFan::RiemannFan(const RiemannState& left, const RiemannState& right,
                       double gamma)
    : L_(left), R_(right), gamma_(gamma) {
  if (!(L_.rho > 0.0 && R_.rho > 0.0 && L_.p > 0.0 && R_.p > 0.0))
    fail(ErrorKind::Invalid, "Riemann states need positive density/pressure");
  const WaveFn fl(L_, gamma_), fr(R_, gamma_);
  const double du = R_.u - L_.u;

  // Two-rarefaction initial guess, positivity-clamped.
  const double z = (gamma_ - 1.0) / (2.0 * gamma_);
  double p = std::pow(
      (fl.c + fr.c - 0.5 * (gamma_ - 1.0) * du) /
          (fl.c / std::pow(L_.p, z) + fr.c / std::pow(R_.p, z)),
      1.0 / z);
  p = std::max(p, 1e-12);

  for (int it = 0; it < 100; ++it) {
    const double g = fl.value(p) + fr.value(p) + du;
    const double dg = fl.deriv(p) + fr.deriv(p);
    const double step = g / dg;
    double pn = p - step;
    if (pn <= 0.0) pn = 0.5 * p;
    if (std::abs(pn - p) <= 1e-12 * std::max(1.0, pn)) {
      p = pn;
      break;
    }
    p = pn;
  }
  p_star_ = p;
  u_star_ = 0.5 * (L_.u + R_.u) + 0.5 * (fr.value(p) - fl.value(p));
}

RiemannState RiemannFan::sample(double xi) const {
  const double g = gamma_;
  const double gp1 = g + 1.0, gm1 = g - 1.0;

  if (xi <= u_star_) {
    // Left of the contact.
    const double c = std::sqrt(g * L_.p / L_.rho);
    if (p_star_ > L_.p) {  // left shock
      const double ratio = p_star_ / L_.p;
      const double S = L_.u - c * std::sqrt((gp1 * ratio + gm1) / (2.0 * g));
      if (xi <= S) return L_;
      const double rho =
          L_.rho * ((ratio + gm1 / gp1) / (gm1 / gp1 * ratio + 1.0));
      return {rho, u_star_, p_star_};
    }
    // left rarefaction
    const double c_star = c * std::pow(p_star_ / L_.p, gm1 / (2.0 * g));
    const double head = L_.u - c;
    const double tail = u_star_ - c_star;
    if (xi <= head) return L_;
    if (xi >= tail) {
      const double rho = L_.rho * std::pow(p_star_ / L_.p, 1.0 / g);
      return {rho, u_star_, p_star_};
    }
    const double u = 2.0 / gp1 * (c + 0.5 * gm1 * L_.u + xi);
    const double cf = 2.0 / gp1 * (c + 0.5 * gm1 * (L_.u - xi));
    const double rho = L_.rho * std::pow(cf / c, 2.0 / gm1);
    const double p = L_.p * std::pow(cf / c, 2.0 * g / gm1);
    return {rho, u, p};
  }

  // Right of the contact.
  const double c = std::sqrt(g * R_.p / R_.rho);
  if (p_star_ > R_.p) {  // right shock
    const double ratio = p_star_ / R_.p;
    const double S = R_.u + c * std::sqrt((gp1 * ratio + gm1) / (2.0 * g));
    if (xi >= S) return R_;
    const double rho =
        R_.rho * ((ratio + gm1 / gp1) / (gm1 / gp1 * ratio + 1.0));
    return {rho, u_star_, p_star_};
  }
  // right rarefaction
  const double c_star = c * std::pow(p_star_ / R_.p, gm1 / (2.0 * g));
  const double head = R_.u + c;
  const double tail = u_star_ + c_star;
  if (xi >= head) return R_;
  if (xi <= tail) {
    const double rho = R_.rho * std::pow(p_star_ / R_.p, 1.0 / g);
    return {rho, u_star_, p_star_};
  }
  const double u = 2.0 / gp1 * (-c + 0.5 * gm1 * R_.u + xi);
  const double cf = 2.0 / gp1 * (c - 0.5 * gm1 * (R_.u - xi));
  const double rho = R_.rho * std::pow(cf / c, 2.0 / gm1);
  const double p = R_.p * std::pow(cf / c, 2.0 * g / gm1);
  return {rho, u, p};
}

RiemannFan exact_riemann_euler(const RiemannState& left,
                               const RiemannState& right, double gamma) {
  return RiemannFan(left, right, gamma);
}

// ---------------------------------------------------------------------------
// Field comparison
// ---------------------------------------------------------------------------

double compare_fields(const Field& fa, const Field& fb, Norm norm,
                      SampleRegion region) {
  // Two-cell halo exclusion near discrete-field boundaries.
  for (const Field* f : {&fa, &fb}) {
    if (!f->is_discrete()) continue;
    const GridSpec& g = f->grid();
    for (int axis = 0; axis < 3; ++axis) {
      if (g.cells[axis] == 1) continue;
      const double halo = 2.0 * g.spacing(axis);
      region.lo[axis + 1] = std::max(region.lo[axis + 1], g.lo[axis] + halo);
      region.hi[axis + 1] = std::min(region.hi[axis + 1], g.hi[axis] - halo);
    }
  }
  for (int k = 0; k < 4; ++k)
    if (region.counts[k] < 1 ||
        (region.counts[k] > 1 && !(region.hi[k] > region.lo[k])))
      fail(ErrorKind::Invalid, "empty comparison region");

  double acc = 0.0;
  double worst = 0.0;
  std::size_t nsamples = 0;
  Vec4 x;
  std::array<int, 4> idx{};
  for (idx[0] = 0; idx[0] < region.counts[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < region.counts[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < region.counts[2]; ++idx[2])
        for (idx[3] = 0; idx[3] < region.counts[3]; ++idx[3]) {
          for (int k = 0; k < 4; ++k) {
            if (region.counts[k] == 1)
              x[k] = 0.5 * (region.lo[k] + region.hi[k]);
            else
              x[k] = region.lo[k] + (idx[k] + 0.5) * (region.hi[k] - region.lo[k]) /
                                        region.counts[k];
          }
          const Vec5 va = fa(x);
          const Vec5 vb = fb(x);
          for (int k = 0; k < 5; ++k) {
            const double d = std::abs(va[k] - vb[k]);
            acc += d;
            worst = std::max(worst, d);
          }
          ++nsamples;
        }
  if (norm == Norm::Linf) return worst;
  return acc / (5.0 * static_cast<double>(nsamples));
}

}  // namespace balcons
