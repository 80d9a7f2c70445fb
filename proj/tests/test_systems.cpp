#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "balcons/solver.hpp"
#include "balcons/systems.hpp"
#include "balcons/verify.hpp"

using namespace balcons;

namespace {

const std::set<std::string> kCap = {"U1", "U2", "U3", "U4", "U5"};

ScalarExpr pexpr(const char* text) { return parse_expr(text, kCap); }

double flux_at(const ConservationSystem& sys, int k, const Vec5& U) {
  Bindings b;
  for (int i = 0; i < 5; ++i) b["U" + std::to_string(i + 1)] = U[i];
  return sys.flux[k - 1].eval(b);
}

}  // namespace

TEST_CASE("euler fluxes at a reference state") {
  const ConservationSystem sys = build_euler_system(pexpr("U1"));
  const Vec5 U{1, 2, 3, 4, 5};
  CHECK(flux_at(sys, 1, U) == doctest::Approx(5.0));   // U2^2/U1 + U1
  CHECK(flux_at(sys, 2, U) == doctest::Approx(6.0));
  CHECK(flux_at(sys, 4, U) == doctest::Approx(6.0));
  CHECK(flux_at(sys, 3, U) == doctest::Approx(8.0));
  CHECK(flux_at(sys, 7, U) == doctest::Approx(8.0));
  CHECK(flux_at(sys, 5, U) == doctest::Approx(10.0));  // U3^2/U1 + U1
  CHECK(flux_at(sys, 6, U) == doctest::Approx(12.0));
  CHECK(flux_at(sys, 8, U) == doctest::Approx(12.0));
  CHECK(flux_at(sys, 9, U) == doctest::Approx(17.0));
  CHECK(flux_at(sys, 10, U) == doctest::Approx(10.0));
  CHECK(flux_at(sys, 11, U) == doctest::Approx(15.0));
  CHECK(flux_at(sys, 12, U) == doctest::Approx(20.0));
}

TEST_CASE("pressure law restricted to U1, U5") {
  CHECK_THROWS_AS(build_euler_system(pexpr("U2")), Error);
  CHECK_NOTHROW(build_euler_system(pexpr("U5*U1^0.4")));
}

TEST_CASE("autonomy is structural") {
  ConservationSystem sys = build_euler_system(pexpr("U1"));
  sys.flux[3] = parse_expr("x1*U1", {"x1", "U1"});
  CHECK_THROWS_AS(validate_conservation(sys), Error);
}

TEST_CASE("residual: constant field vanishes exactly") {
  const ConservationSystem sys = build_euler_system(pexpr("U5*U1^0.4"));
  const Field f = Field::constant({1.2, 0.3, -0.4, 0.5, 1.1});
  const Vec4 h{1e-3, 1e-3, 1e-3, 1e-3};
  const Vec5 r = residual(sys, f, {0.1, 0.2, 0.3, 0.4}, h);
  for (double v : r) CHECK(v == 0.0);
}

TEST_CASE("residual: linear fields are differentiated exactly") {
  const ConservationSystem sys = build_euler_system(pexpr("U1"));
  // u1 depends on x2 only and u2..u4 vanish: the first component cancels.
  {
    const Field f = Field::analytic([](const Vec4& x) {
      return Vec5{x[1], 0.0, 0.0, 0.0, 1.0};
    });
    const Vec5 r = residual(sys, f, {0.0, 0.3, 0.0, 0.0},
                            {1e-3, 1e-3, 1e-3, 1e-3});
    CHECK(r[0] == 0.0);
  }
  // u1 = x1: the time derivative is exact on linear data.
  {
    const Field f = Field::analytic([](const Vec4& x) {
      return Vec5{x[0], 0.0, 0.0, 0.0, 1.0};
    });
    const Vec5 r = residual(sys, f, {0.2, 0.0, 0.0, 0.0},
                            {1e-3, 1e-3, 1e-3, 1e-3});
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("balance wrap agrees with the conservation residual exactly") {
  const ConservationSystem sys = build_euler_system(pexpr("U5*U1^0.4"));
  const BalanceSystem bal = conservation_to_balance(sys);
  const Field f = isentropic_vortex_field(0.0, 0.0, 1.0, 0.4, -0.2, 1.4);
  const Vec4 h{2e-3, 2e-3, 2e-3, 2e-3};
  SplitMix64 rng(0x1234);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec4 x{rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const Vec5 rc = residual(sys, f, x, h);
    const Vec5 rb = residual(bal, f, x, h);
    for (int k = 0; k < 5; ++k) CHECK(rc[k] == rb[k]);
  }
}

TEST_CASE("vortex residual converges at second order") {
  const ConservationSystem sys = build_euler_system(pexpr("U5*U1^0.4"));
  const Field f = isentropic_vortex_field(0.0, 0.0, 1.0, 0.3, 0.1, 1.4);
  const auto pts = sample_points(60, {0.0, -1.5, -1.5, -0.5},
                                 {0.5, 1.5, 1.5, 0.5}, 0xabc);
  const ConvergenceReport rep = residual_convergence(
      &sys, f, pts, {4e-3, 4e-3, 4e-3, 4e-3}, 3);
  CHECK(rep.pass);
  CHECK(rep.observed_order > 1.7);
  CHECK(rep.observed_order < 2.3);
}

TEST_CASE("discrete fields interpolate and guard their domain") {
  GridSpec g;
  g.lo = {0.0, 0.0, 0.0};
  g.hi = {1.0, 1.0, 1.0};
  g.cells = {8, 8, 1};
  std::vector<Field::Snapshot> snaps(2);
  for (int s = 0; s < 2; ++s) {
    snaps[s].time = s * 0.5;
    snaps[s].data.resize(5 * g.cell_count());
    for (int i4 = 0; i4 < g.cells[2]; ++i4)
      for (int i3 = 0; i3 < g.cells[1]; ++i3)
        for (int i2 = 0; i2 < g.cells[0]; ++i2) {
          const std::size_t c =
              (static_cast<std::size_t>(i4) * g.cells[1] + i3) * g.cells[0] + i2;
          // Linear profile: exactly representable by multilinear interpolation.
          snaps[s].data[5 * c + 0] = g.center(0, i2) + 2.0 * g.center(1, i3) +
                                     3.0 * snaps[s].time;
          for (int k = 1; k < 5; ++k) snaps[s].data[5 * c + k] = k;
        }
  }
  const Field f = Field::discrete(g, snaps);
  const Vec5 v = f({0.25, 0.4375, 0.3125, 0.5});
  CHECK(v[0] == doctest::Approx(0.4375 + 2.0 * 0.3125 + 0.75).epsilon(1e-13));
  CHECK(v[2] == doctest::Approx(2.0));
  CHECK_THROWS_AS(f({0.25, 1.5, 0.5, 0.5}), Error);
  CHECK_THROWS_AS(f({2.0, 0.5, 0.5, 0.5}), Error);
}

TEST_CASE("field CSV dump round-trips") {
  GridSpec g;
  g.lo = {-1.0, -1.0, 0.0};
  g.hi = {1.0, 1.0, 1.0};
  g.cells = {4, 3, 1};
  std::vector<Field::Snapshot> snaps(1);
  snaps[0].time = 0.25;
  snaps[0].data.resize(5 * g.cell_count());
  SplitMix64 rng(0xd00d);
  for (auto& v : snaps[0].data) v = rng.uniform(-2.0, 2.0);
  const Field f = Field::discrete(g, snaps);

  const std::string dir = "test_field_dump";
  write_field_csv(f, dir);
  const Field r = read_field_csv(dir);
  CHECK(r.grid().cells == g.cells);
  CHECK(r.snapshots().size() == 1);
  for (std::size_t i = 0; i < snaps[0].data.size(); ++i)
    CHECK(r.snapshots()[0].data[i] == snaps[0].data[i]);
  std::filesystem::remove_all(dir);
}
