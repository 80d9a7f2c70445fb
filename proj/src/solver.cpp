#include "balcons/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace balcons {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Internal face-flux/source interface shared by both solve entry points so
// that a balance run with vanishing sources follows the exact same arithmetic
// as the conservation run.
struct FvSystem {
  // F[5] in direction dir (0..2 for x2..x4) at face coordinates x.
  std::function<void(int dir, const Vec4& x, const double* u, double* F)> flux;
  // Spectral-radius estimate of dF/du in direction dir at cell state u.
  std::function<double(int dir, const Vec4& x, const double* u)> speed;
  bool has_sources = false;
  // s[5]; the first component is the fixed conservation law (always zero).
  std::function<void(const Vec4& x, const double* u, double* s)> source;
};

double power_iteration_radius(const double M[5][5]) {
  double v[5] = {1.0, 0.9, 1.1, 0.95, 1.05};
  double norm = 0.0;
  for (double c : v) norm += c * c;
  norm = std::sqrt(norm);
  for (double& c : v) c /= norm;
  double est = 0.0;
  for (int it = 0; it < 20; ++it) {
    double w[5] = {0, 0, 0, 0, 0};
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) w[r] += M[r][c] * v[c];
    double wn = 0.0;
    for (double c : w) wn += c * c;
    wn = std::sqrt(wn);
    if (wn < 1e-30) return 0.0;
    if (it >= 17) est = std::max(est, wn);
    for (int r = 0; r < 5; ++r) v[r] = w[r] / wn;
  }
  return est;
}

FvSystem make_conservation_fv(const ConservationSystem& sys) {
  validate_conservation(sys);
  auto flux = std::make_shared<std::array<CompiledExpr, 12>>();
  for (int k = 0; k < 12; ++k)
    (*flux)[k] = CompiledExpr(sys.flux[k], capital_state_vars());
  // jac[dir][row 2..5 -> 0..3][A]
  auto jac = std::make_shared<
      std::array<std::array<std::array<CompiledExpr, 5>, 4>, 3>>();
  for (int dir = 0; dir < 3; ++dir)
    for (int row = 2; row <= 5; ++row) {
      const int k = ConservationSystem::flux_index(row, dir + 2) - 1;
      for (int A = 0; A < 5; ++A)
        (*jac)[dir][row - 2][A] = CompiledExpr(
            diff_expr(sys.flux[k], "U" + std::to_string(A + 1)),
            capital_state_vars());
    }

  FvSystem fv;
  fv.flux = [flux](int dir, const Vec4&, const double* u, double* F) {
    F[0] = u[dir + 1];
    for (int row = 2; row <= 5; ++row)
      F[row - 1] = (*flux)[ConservationSystem::flux_index(row, dir + 2) - 1]
                       .eval(std::span<const double>(u, 5));
  };
  fv.speed = [jac](int dir, const Vec4&, const double* u) {
    double M[5][5];
    for (int A = 0; A < 5; ++A) M[0][A] = (A == dir + 1) ? 1.0 : 0.0;
    for (int r = 1; r < 5; ++r)
      for (int A = 0; A < 5; ++A)
        M[r][A] = (*jac)[dir][r - 1][A].eval(std::span<const double>(u, 5));
    return 1.1 * power_iteration_radius(M);
  };
  return fv;
}

FvSystem make_balance_fv(const BalanceSystem& sys, bool need_speed_estimate) {
  auto fluxes = std::make_shared<std::array<BalanceElement, 12>>(sys.flux);
  auto sources = std::make_shared<std::array<BalanceElement, 4>>(sys.source);

  FvSystem fv;
  fv.flux = [fluxes](int dir, const Vec4& x, const double* u, double* F) {
    const Vec5 uu{u[0], u[1], u[2], u[3], u[4]};
    F[0] = u[dir + 1];
    for (int row = 2; row <= 5; ++row)
      F[row - 1] = (*fluxes)[BalanceSystem::flux_index(row, dir + 2) - 1](x, uu);
  };

  bool all_zero = true;
  for (const auto& s : sys.source)
    if (!s.is_zero()) all_zero = false;
  fv.has_sources = !all_zero;
  if (fv.has_sources) {
    fv.source = [sources](const Vec4& x, const double* u, double* s) {
      const Vec5 uu{u[0], u[1], u[2], u[3], u[4]};
      s[0] = 0.0;
      for (int m = 0; m < 4; ++m) s[m + 1] = (*sources)[m](x, uu);
    };
  }

  if (need_speed_estimate) {
    bool closed = true;
    for (const auto& f : sys.flux)
      if (!f.is_expression()) closed = false;
    if (!closed)
      fail(ErrorKind::Invalid,
           "numeric-evaluator fluxes need an explicit wave_speed_bound");
    auto jac = std::make_shared<
        std::array<std::array<std::array<CompiledExpr, 5>, 4>, 3>>();
    for (int dir = 0; dir < 3; ++dir)
      for (int row = 2; row <= 5; ++row) {
        const int k = BalanceSystem::flux_index(row, dir + 2) - 1;
        for (int A = 0; A < 5; ++A)
          (*jac)[dir][row - 2][A] =
              CompiledExpr(diff_expr(sys.flux[k].expression(),
                                     "u" + std::to_string(A + 1)),
                           space_state_vars());
      }
    fv.speed = [jac](int dir, const Vec4& x, const double* u) {
      const double vals[9] = {x[0], x[1], x[2], x[3],
                              u[0], u[1], u[2], u[3], u[4]};
      double M[5][5];
      for (int A = 0; A < 5; ++A) M[0][A] = (A == dir + 1) ? 1.0 : 0.0;
      for (int r = 1; r < 5; ++r)
        for (int A = 0; A < 5; ++A) M[r][A] = (*jac)[dir][r - 1][A].eval(vals);
      return 1.1 * power_iteration_radius(M);
    };
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Grid kernel
// ---------------------------------------------------------------------------

class GridKernel {
public:
  GridKernel(FvSystem fv, const SolverConfig& cfg)
      : fv_(std::move(fv)), cfg_(cfg), grid_(cfg.grid()) {
    n_[0] = cfg.cells[0];
    n_[1] = cfg.cells[1];
    n_[2] = cfg.cells[2];
    ncells_ = static_cast<std::size_t>(n_[0]) * n_[1] * n_[2];
    for (int d = 0; d < 3; ++d) h_[d] = grid_.spacing(d);
  }

  Field run(const Field& ic) {
    std::vector<double> q(5 * ncells_);
    for (int i4 = 0; i4 < n_[2]; ++i4)
      for (int i3 = 0; i3 < n_[1]; ++i3)
        for (int i2 = 0; i2 < n_[0]; ++i2) {
          const Vec4 x{cfg_.start_time, grid_.center(0, i2),
                       grid_.center(1, i3), grid_.center(2, i4)};
          const Vec5 u = ic(x);
          double* cell = &q[5 * index(i2, i3, i4)];
          for (int k = 0; k < 5; ++k) cell[k] = u[k];
        }

    std::vector<Field::Snapshot> snaps;
    double t = cfg_.start_time;
    snaps.push_back({t, q});

    const double interval = cfg_.snapshot_interval;
    double next_snap =
        interval > 0.0 ? cfg_.start_time + interval : cfg_.end_time;

    long step = 0;
    while (t < cfg_.end_time - 1e-14 * std::max(1.0, std::abs(cfg_.end_time))) {
      double dt = stable_dt(q, t);
      bool record = false;
      if (t + dt >= next_snap - 1e-14) {
        dt = next_snap - t;
        record = true;
      }
      if (t + dt > cfg_.end_time) dt = cfg_.end_time - t;

      advance(q, t, dt, step);
      t += dt;
      ++step;

      if (record) {
        snaps.push_back({t, q});
        next_snap = interval > 0.0 ? next_snap + interval : cfg_.end_time + 1.0;
        if (next_snap > cfg_.end_time) next_snap = cfg_.end_time;
        if (std::abs(t - cfg_.end_time) < 1e-14 * std::max(1.0, cfg_.end_time))
          break;
      }
    }
    if (snaps.back().time < t - 1e-14 || snaps.size() == 1) {
      if (cfg_.end_time > cfg_.start_time) snaps.push_back({t, q});
    }
    return Field::discrete(grid_, std::move(snaps));
  }

private:
  FvSystem fv_;
  SolverConfig cfg_;
  GridSpec grid_;
  int n_[3];
  std::size_t ncells_;
  double h_[3];

  std::size_t index(int i2, int i3, int i4) const {
    return (static_cast<std::size_t>(i4) * n_[1] + i3) * n_[0] + i2;
  }

  int wrap(int i, int d) const {
    const int n = n_[d];
    if (cfg_.bc == SolverConfig::Bc::Periodic) {
      if (i < 0) return i + n;
      if (i >= n) return i - n;
      return i;
    }
    return std::clamp(i, 0, n - 1);
  }

  double stable_dt(const std::vector<double>& q, double t) {
    double max_sum = 0.0;
    for (int i4 = 0; i4 < n_[2]; ++i4)
      for (int i3 = 0; i3 < n_[1]; ++i3)
        for (int i2 = 0; i2 < n_[0]; ++i2) {
          const double* u = &q[5 * index(i2, i3, i4)];
          const Vec4 x{t, grid_.center(0, i2), grid_.center(1, i3),
                       grid_.center(2, i4)};
          double sum = 0.0;
          for (int d = 0; d < 3; ++d) {
            if (n_[d] == 1) continue;  // degenerate axis carries no transport
            const double s = cfg_.wave_speed_bound > 0.0
                                 ? cfg_.wave_speed_bound
                                 : fv_.speed(d, x, u);
            sum += s / h_[d];
          }
          max_sum = std::max(max_sum, sum);
        }
    double dt = max_sum <= 0.0 ? cfg_.end_time - t : cfg_.cfl / max_sum;
    if (cfg_.max_dt > 0.0) dt = std::min(dt, cfg_.max_dt);
    return dt;
  }

  void transport_rhs(const std::vector<double>& q, double t,
                     std::vector<double>& rhs) {
    std::fill(rhs.begin(), rhs.end(), 0.0);

    // Cached wave speeds per cell and direction.
    std::vector<double> speeds;
    const bool need_speeds = cfg_.wave_speed_bound <= 0.0;
    if (need_speeds) {
      speeds.resize(3 * ncells_);
      for (int i4 = 0; i4 < n_[2]; ++i4)
        for (int i3 = 0; i3 < n_[1]; ++i3)
          for (int i2 = 0; i2 < n_[0]; ++i2) {
            const std::size_t c = index(i2, i3, i4);
            const double* u = &q[5 * c];
            const Vec4 x{t, grid_.center(0, i2), grid_.center(1, i3),
                         grid_.center(2, i4)};
            for (int d = 0; d < 3; ++d)
              speeds[3 * c + d] = (n_[d] == 1) ? 0.0 : fv_.speed(d, x, u);
          }
    }

    double FL[5], FR[5];
    for (int d = 0; d < 3; ++d) {
      if (n_[d] == 1) continue;
      const double inv_h = 1.0 / h_[d];
      // Iterate over faces: face f sits between cell (f-1) and cell f along
      // axis d, f = 0..n (periodic wraps, zero-gradient clamps).
      int idx[3];
      const int na = n_[(d + 1) % 3];
      const int nb = n_[(d + 2) % 3];
      for (int b = 0; b < nb; ++b)
        for (int a = 0; a < na; ++a)
          for (int f = 0; f <= n_[d]; ++f) {
            if (cfg_.bc == SolverConfig::Bc::Periodic && f == n_[d])
              continue;  // face n coincides with face 0
            idx[(d + 1) % 3] = a;
            idx[(d + 2) % 3] = b;
            idx[d] = wrap(f - 1, d);
            const std::size_t cl = index(idx[0], idx[1], idx[2]);
            idx[d] = wrap(f, d);
            const std::size_t cr = index(idx[0], idx[1], idx[2]);

            Vec4 x{t, 0.0, 0.0, 0.0};
            for (int dd = 0; dd < 3; ++dd)
              x[dd + 1] = grid_.center(dd, idx[dd]);
            x[d + 1] = grid_.lo[d] + f * h_[d];  // face midpoint on axis d

            const double* uL = &q[5 * cl];
            const double* uR = &q[5 * cr];
            fv_.flux(d, x, uL, FL);
            fv_.flux(d, x, uR, FR);
            double s;
            if (cfg_.wave_speed_bound > 0.0) {
              s = cfg_.wave_speed_bound;
            } else {
              s = std::max(speeds[3 * cl + d], speeds[3 * cr + d]);
            }
            for (int k = 0; k < 5; ++k) {
              const double flux =
                  0.5 * (FL[k] + FR[k]) - 0.5 * s * (uR[k] - uL[k]);
              // The face flux leaves the left cell and enters the right one;
              // at clamped boundaries only the interior side is touched.
              if (f > 0 || cfg_.bc == SolverConfig::Bc::Periodic)
                rhs[5 * cl + k] -= flux * inv_h;
              if (f < n_[d] || cfg_.bc == SolverConfig::Bc::Periodic)
                rhs[5 * cr + k] += flux * inv_h;
            }
          }
    }
  }

  void check_state(const std::vector<double>& q, double t, long step) const {
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!std::isfinite(q[i]) || std::abs(q[i]) > 1e100) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "solver state blew up at t=%.6g (step %ld, slot %zu)", t,
                      step, i);
        fail(ErrorKind::Solver, buf);
      }
    }
    if (cfg_.euler_positivity_guard) {
      for (std::size_t c = 0; c < ncells_; ++c)
        if (q[5 * c] <= 0.0) {
          char buf[128];
          std::snprintf(buf, sizeof buf,
                        "vacuum guard: u1 <= 0 at t=%.6g (step %ld)", t, step);
          fail(ErrorKind::Solver, buf);
        }
    }
  }

  void source_half_step(std::vector<double>& q, double t, double dt_half) {
    if (!fv_.has_sources) return;
    // RK4 on du/dt = S(x, u) at fixed cell coordinates.
    double k1[5], k2[5], k3[5], k4[5], tmp[5];
    for (int i4 = 0; i4 < n_[2]; ++i4)
      for (int i3 = 0; i3 < n_[1]; ++i3)
        for (int i2 = 0; i2 < n_[0]; ++i2) {
          double* u = &q[5 * index(i2, i3, i4)];
          const Vec3 xc{grid_.center(0, i2), grid_.center(1, i3),
                        grid_.center(2, i4)};
          auto eval = [&](double tau, const double* state, double* out) {
            const Vec4 x{tau, xc[0], xc[1], xc[2]};
            fv_.source(x, state, out);
          };
          eval(t, u, k1);
          for (int k = 0; k < 5; ++k) tmp[k] = u[k] + 0.5 * dt_half * k1[k];
          eval(t + 0.5 * dt_half, tmp, k2);
          for (int k = 0; k < 5; ++k) tmp[k] = u[k] + 0.5 * dt_half * k2[k];
          eval(t + 0.5 * dt_half, tmp, k3);
          for (int k = 0; k < 5; ++k) tmp[k] = u[k] + dt_half * k3[k];
          eval(t + dt_half, tmp, k4);
          for (int k = 0; k < 5; ++k)
            u[k] += (dt_half / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
  }

  void transport_step(std::vector<double>& q, double t, double dt) {
    std::vector<double> rhs(q.size());
    if (cfg_.scheme == SolverConfig::Scheme::ForwardEuler) {
      transport_rhs(q, t, rhs);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] += dt * rhs[i];
    } else {
      std::vector<double> q1(q.size());
      transport_rhs(q, t, rhs);
      for (std::size_t i = 0; i < q.size(); ++i) q1[i] = q[i] + dt * rhs[i];
      transport_rhs(q1, t + dt, rhs);
      for (std::size_t i = 0; i < q.size(); ++i)
        q[i] = 0.5 * q[i] + 0.5 * (q1[i] + dt * rhs[i]);
    }
  }

  void advance(std::vector<double>& q, double t, double dt, long step) {
    if (fv_.has_sources) {
      source_half_step(q, t, 0.5 * dt);
      transport_step(q, t, dt);
      source_half_step(q, t + 0.5 * dt, 0.5 * dt);
    } else {
      transport_step(q, t, dt);
    }
    check_state(q, t + dt, step);
  }
};

}  // namespace

void validate_config(const SolverConfig& cfg) {
  if (!(cfg.cfl > 0.0 && cfg.cfl <= 0.9))
    fail(ErrorKind::Invalid, "CFL number must lie in (0, 0.9]");
  for (int d = 0; d < 3; ++d) {
    if (cfg.cells[d] < 1)
      fail(ErrorKind::Invalid, "cells per axis must be >= 1");
    if (!(cfg.hi[d] > cfg.lo[d]))
      fail(ErrorKind::Invalid, "domain box must have positive extent");
  }
  if (cfg.end_time < cfg.start_time)
    fail(ErrorKind::Invalid, "end_time must be >= start_time");
}

Field solve_conservation(const ConservationSystem& sys, const Field& ic,
                         const SolverConfig& cfg) {
  validate_config(cfg);
  GridKernel kernel(make_conservation_fv(sys), cfg);
  return kernel.run(ic);
}

Field solve_balance_splitting(const BalanceSystem& sys, const Field& ic,
                              const SolverConfig& cfg) {
  validate_config(cfg);
  GridKernel kernel(make_balance_fv(sys, cfg.wave_speed_bound <= 0.0), cfg);
  return kernel.run(ic);
}

Field isentropic_vortex_field(double center_x2, double center_x3,
                              double strength, double bg_vx, double bg_vy,
                              double gamma) {
  if (!(gamma > 1.0)) fail(ErrorKind::Invalid, "vortex needs gamma > 1");
  return Field::analytic([=](const Vec4& x) {
    const double t = x[0];
    const double dx = x[1] - center_x2 - bg_vx * t;
    const double dy = x[2] - center_x3 - bg_vy * t;
    const double r2 = dx * dx + dy * dy;
    const double gm1 = gamma - 1.0;
    const double T = 1.0 - gm1 * strength * strength /
                               (8.0 * gamma * kPi * kPi) * std::exp(1.0 - r2);
    const double rho = std::pow(T, 1.0 / gm1);
    const double du = strength / (2.0 * kPi) * std::exp(0.5 * (1.0 - r2));
    const double vx = bg_vx - du * dy;
    const double vy = bg_vy + du * dx;
    return Vec5{rho, rho * vx, rho * vy, 0.0, rho};
  });
}

Field pushforward_field(const PointMap& map, const Field& src) {
  if (!map.coord_inverse || !map.field_forward)
    fail(ErrorKind::Invalid, "pushforward needs an invertible map");
  return Field::analytic([map, src](const Vec4& x) {
    const Vec4 X = map.coord_inverse(x);
    const Vec5 U = src(X);
    return map.field_forward(X, U);
  });
}

}  // namespace balcons
