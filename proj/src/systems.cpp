#include "balcons/systems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace balcons {

namespace {

const std::set<std::string> kCapitalSet = {"U1", "U2", "U3", "U4", "U5"};

ScalarExpr var(const char* name) { return ScalarExpr::variable(name); }

}  // namespace

void validate_conservation(const ConservationSystem& sys) {
  for (int k = 0; k < 12; ++k) {
    if (sys.flux[k].empty())
      fail(ErrorKind::Invalid, "flux P" + std::to_string(k + 1) + " is empty");
    for (const auto& v : sys.flux[k].variables())
      if (!kCapitalSet.count(v))
        fail(ErrorKind::Invalid, "flux P" + std::to_string(k + 1) +
                                     " references non-state variable '" + v +
                                     "' (must be autonomous in U1..U5)");
  }
}

ConservationSystem build_euler_system(const ScalarExpr& pressure) {
  for (const auto& v : pressure.variables())
    if (v != "U1" && v != "U5")
      fail(ErrorKind::Invalid,
           "pressure law may reference only U1 and U5, got '" + v + "'");

  const ScalarExpr U1 = var("U1"), U2 = var("U2"), U3 = var("U3"),
                   U4 = var("U4"), U5 = var("U5");
  ConservationSystem sys;
  sys.flux[0] = U2 * U2 / U1 + pressure;   // P1
  sys.flux[1] = U2 * U3 / U1;              // P2
  sys.flux[2] = U2 * U4 / U1;              // P3
  sys.flux[3] = U2 * U3 / U1;              // P4
  sys.flux[4] = U3 * U3 / U1 + pressure;   // P5
  sys.flux[5] = U3 * U4 / U1;              // P6
  sys.flux[6] = U2 * U4 / U1;              // P7
  sys.flux[7] = U3 * U4 / U1;              // P8
  sys.flux[8] = U4 * U4 / U1 + pressure;   // P9
  sys.flux[9] = U2 * U5 / U1;              // P10
  sys.flux[10] = U3 * U5 / U1;             // P11
  sys.flux[11] = U4 * U5 / U1;             // P12
  return sys;
}

// ---------------------------------------------------------------------------
// BalanceElement
// ---------------------------------------------------------------------------

BalanceElement::BalanceElement() : expr_(ScalarExpr::constant(0.0)) {
  compiled_ = std::make_shared<CompiledExpr>(expr_, space_state_vars());
}

BalanceElement::BalanceElement(ScalarExpr e) : expr_(std::move(e)) {
  if (expr_.empty()) fail(ErrorKind::Invalid, "empty balance element");
  for (const auto& v : expr_.variables()) {
    bool ok = false;
    for (const auto& name : space_state_vars())
      if (name == v) { ok = true; break; }
    if (!ok)
      fail(ErrorKind::Invalid,
           "balance element references unknown variable '" + v + "'");
  }
  compiled_ = std::make_shared<CompiledExpr>(expr_, space_state_vars());
}

BalanceElement::BalanceElement(Fn fn) : fn_(std::move(fn)) {
  if (!fn_) fail(ErrorKind::Invalid, "null balance element evaluator");
}

double BalanceElement::operator()(const Vec4& x, const Vec5& u) const {
  if (fn_) return fn_(x, u);
  const double vals[9] = {x[0], x[1], x[2], x[3], u[0], u[1], u[2], u[3], u[4]};
  return compiled_->eval(vals);
}

bool BalanceElement::is_zero() const {
  return fn_ == nullptr && expr_.is_constant(0.0);
}

const ScalarExpr& BalanceElement::expression() const {
  if (fn_)
    fail(ErrorKind::Invalid,
         "balance element has no closed form (numeric evaluator)");
  return expr_;
}

bool BalanceSystem::closed_form() const {
  for (const auto& e : flux)
    if (!e.is_expression()) return false;
  for (const auto& e : source)
    if (!e.is_expression()) return false;
  return true;
}

BalanceSystem conservation_to_balance(const ConservationSystem& sys) {
  validate_conservation(sys);
  std::map<std::string, ScalarExpr> rename;
  for (int k = 0; k < 5; ++k)
    rename.emplace("U" + std::to_string(k + 1),
                   ScalarExpr::variable("u" + std::to_string(k + 1)));
  BalanceSystem out;
  for (int k = 0; k < 12; ++k)
    out.flux[k] = BalanceElement(substitute(sys.flux[k], rename));
  return out;
}

// ---------------------------------------------------------------------------
// Field
// ---------------------------------------------------------------------------

Field Field::analytic(Evaluator fn) {
  Field f;
  f.eval_ = std::move(fn);
  return f;
}

Field Field::analytic(const std::array<ScalarExpr, 5>& components) {
  auto compiled = std::make_shared<std::array<CompiledExpr, 5>>();
  for (int k = 0; k < 5; ++k) {
    if (components[k].empty())
      fail(ErrorKind::Invalid, "empty field component expression");
    (*compiled)[k] = CompiledExpr(components[k], space_vars());
  }
  return analytic([compiled](const Vec4& x) {
    Vec5 u{};
    for (int k = 0; k < 5; ++k) u[k] = (*compiled)[k].eval(x);
    return u;
  });
}

Field Field::constant(const Vec5& value) {
  return analytic([value](const Vec4&) { return value; });
}

Field Field::discrete(GridSpec grid, std::vector<Snapshot> snapshots) {
  for (int axis = 0; axis < 3; ++axis) {
    if (grid.cells[axis] < 1)
      fail(ErrorKind::Invalid, "grid must have at least one cell per axis");
    if (!(grid.spacing(axis) > 0.0))
      fail(ErrorKind::Invalid, "grid spacing must be strictly positive");
  }
  if (snapshots.empty())
    fail(ErrorKind::Invalid, "discrete field needs at least one snapshot");
  const std::size_t expected = 5 * grid.cell_count();
  for (const auto& s : snapshots)
    if (s.data.size() != expected)
      fail(ErrorKind::Invalid, "snapshot size does not match grid");
  for (std::size_t i = 1; i < snapshots.size(); ++i)
    if (!(snapshots[i].time > snapshots[i - 1].time))
      fail(ErrorKind::Invalid, "snapshot times must increase");
  Field f;
  f.grid_ = grid;
  f.snaps_ = std::move(snapshots);
  return f;
}

const GridSpec& Field::grid() const {
  if (!grid_) fail(ErrorKind::Invalid, "field is not discrete");
  return *grid_;
}

const std::vector<Field::Snapshot>& Field::snapshots() const {
  if (!grid_) fail(ErrorKind::Invalid, "field is not discrete");
  return snaps_;
}

Vec5 Field::cell_value(std::size_t snapshot, int i2, int i3, int i4) const {
  const GridSpec& g = grid();
  const std::size_t cell =
      (static_cast<std::size_t>(i4) * g.cells[1] + i3) * g.cells[0] + i2;
  const double* p = snaps_.at(snapshot).data.data() + 5 * cell;
  return Vec5{p[0], p[1], p[2], p[3], p[4]};
}

namespace {

// Clamped index pair + weight for linear interpolation along one axis of
// cell-centered data.  Throws if the point is outside the cell-center hull
// by more than half a cell.
struct AxisInterp {
  int i0, i1;
  double w;  // weight of i1
};

AxisInterp axis_interp(const GridSpec& g, int axis, double x) {
  const double h = g.spacing(axis);
  const int n = g.cells[axis];
  if (x < g.lo[axis] - 1e-12 * h || x > g.hi[axis] + 1e-12 * h)
    fail(ErrorKind::Domain, "sample point outside field domain");
  double s = (x - g.lo[axis]) / h - 0.5;
  if (n == 1) return {0, 0, 0.0};
  if (s <= 0.0) return {0, 0, 0.0};
  if (s >= n - 1) return {n - 1, n - 1, 0.0};
  const int i0 = static_cast<int>(std::floor(s));
  return {i0, i0 + 1, s - i0};
}

}  // namespace

Vec5 Field::operator()(const Vec4& x) const {
  if (eval_) return eval_(x);
  const GridSpec& g = grid();

  // Time interpolation between bracketing snapshots.
  const double t = x[0];
  std::size_t k1 = 0;
  double wt = 0.0;
  if (snaps_.size() == 1 || t <= snaps_.front().time + 1e-14) {
    if (t < snaps_.front().time - 1e-9 ||
        (snaps_.size() == 1 && std::abs(t - snaps_.front().time) > 1e-9))
      fail(ErrorKind::Domain, "sample time outside stored snapshots");
    k1 = 0;
  } else if (t >= snaps_.back().time - 1e-14) {
    if (t > snaps_.back().time + 1e-9)
      fail(ErrorKind::Domain, "sample time outside stored snapshots");
    k1 = snaps_.size() - 1;
  } else {
    std::size_t hi = 1;
    while (snaps_[hi].time < t) ++hi;
    k1 = hi;
    wt = (snaps_[hi].time - t) / (snaps_[hi].time - snaps_[hi - 1].time);
  }
  const std::size_t ka = (wt > 0.0) ? k1 - 1 : k1;
  const std::size_t kb = k1;
  const double wa = wt, wb = 1.0 - wt;

  const AxisInterp a2 = axis_interp(g, 0, x[1]);
  const AxisInterp a3 = axis_interp(g, 1, x[2]);
  const AxisInterp a4 = axis_interp(g, 2, x[3]);

  auto sample = [&](std::size_t snap) {
    Vec5 acc{};
    for (int c4 = 0; c4 < 2; ++c4) {
      const int i4 = c4 ? a4.i1 : a4.i0;
      const double w4 = c4 ? a4.w : 1.0 - a4.w;
      if (w4 == 0.0) continue;
      for (int c3 = 0; c3 < 2; ++c3) {
        const int i3 = c3 ? a3.i1 : a3.i0;
        const double w3 = c3 ? a3.w : 1.0 - a3.w;
        if (w3 == 0.0) continue;
        for (int c2 = 0; c2 < 2; ++c2) {
          const int i2 = c2 ? a2.i1 : a2.i0;
          const double w2 = c2 ? a2.w : 1.0 - a2.w;
          if (w2 == 0.0) continue;
          const Vec5 v = cell_value(snap, i2, i3, i4);
          const double w = w2 * w3 * w4;
          for (int k = 0; k < 5; ++k) acc[k] += w * v[k];
        }
      }
    }
    return acc;
  };

  Vec5 out = sample(kb);
  if (wa > 0.0) {
    const Vec5 va = sample(ka);
    for (int k = 0; k < 5; ++k) out[k] = wa * va[k] + wb * out[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

namespace {

Vec4 offset(const Vec4& x, int axis, double delta) {
  Vec4 y = x;
  y[axis] += delta;
  return y;
}

}  // namespace

Vec5 residual(const ConservationSystem& sys, const Field& field, const Vec4& x,
              const Vec4& h) {
  validate_conservation(sys);
  std::array<CompiledExpr, 12> flux;
  for (int k = 0; k < 12; ++k)
    flux[k] = CompiledExpr(sys.flux[k], capital_state_vars());

  Vec5 res{};
  // Time derivative of every density.
  {
    const Vec5 up = field(offset(x, 0, h[0]));
    const Vec5 um = field(offset(x, 0, -h[0]));
    for (int m = 0; m < 5; ++m) res[m] = (up[m] - um[m]) / (2.0 * h[0]);
  }
  for (int dir = 2; dir <= 4; ++dir) {
    const Vec5 up = field(offset(x, dir - 1, h[dir - 1]));
    const Vec5 um = field(offset(x, dir - 1, -h[dir - 1]));
    const double inv2h = 1.0 / (2.0 * h[dir - 1]);
    // Row 1 flux is the state component itself.
    res[0] += (up[dir - 1] - um[dir - 1]) * inv2h;
    for (int row = 2; row <= 5; ++row) {
      const int k = ConservationSystem::flux_index(row, dir) - 1;
      res[row - 1] += (flux[k].eval(up) - flux[k].eval(um)) * inv2h;
    }
  }
  return res;
}

Vec5 residual(const BalanceSystem& sys, const Field& field, const Vec4& x,
              const Vec4& h) {
  Vec5 res{};
  {
    const Vec5 up = field(offset(x, 0, h[0]));
    const Vec5 um = field(offset(x, 0, -h[0]));
    for (int m = 0; m < 5; ++m) res[m] = (up[m] - um[m]) / (2.0 * h[0]);
  }
  for (int dir = 2; dir <= 4; ++dir) {
    const Vec4 xp = offset(x, dir - 1, h[dir - 1]);
    const Vec4 xm = offset(x, dir - 1, -h[dir - 1]);
    const Vec5 up = field(xp);
    const Vec5 um = field(xm);
    const double inv2h = 1.0 / (2.0 * h[dir - 1]);
    res[0] += (up[dir - 1] - um[dir - 1]) * inv2h;
    for (int row = 2; row <= 5; ++row) {
      const BalanceElement& p = sys.flux_of(row, dir);
      res[row - 1] += (p(xp, up) - p(xm, um)) * inv2h;
    }
  }
  const Vec5 uc = field(x);
  for (int row = 2; row <= 5; ++row) res[row - 1] -= sys.source[row - 2](x, uc);
  return res;
}

// ---------------------------------------------------------------------------
// CSV / JSON field dumps
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_field_csv(const Field& field, const std::string& directory) {
  namespace fs = std::filesystem;
  const GridSpec& g = field.grid();
  fs::create_directories(directory);

  nlohmann::json meta;
  meta["grid"]["lo"] = g.lo;
  meta["grid"]["hi"] = g.hi;
  meta["grid"]["cells"] = g.cells;
  meta["grid"]["spacing"] = {g.spacing(0), g.spacing(1), g.spacing(2)};
  meta["times"] = nlohmann::json::array();
  meta["files"] = nlohmann::json::array();

  const auto& snaps = field.snapshots();
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.csv", s);
    meta["times"].push_back(snaps[s].time);
    meta["files"].push_back(name);
    std::ofstream out(fs::path(directory) / name);
    if (!out) fail(ErrorKind::Io, "cannot open field CSV for writing");
    out << "x2,x3,x4,u1,u2,u3,u4,u5\n";
    for (int i4 = 0; i4 < g.cells[2]; ++i4)
      for (int i3 = 0; i3 < g.cells[1]; ++i3)
        for (int i2 = 0; i2 < g.cells[0]; ++i2) {
          const Vec5 u = field.cell_value(s, i2, i3, i4);
          out << format_double(g.center(0, i2)) << ','
              << format_double(g.center(1, i3)) << ','
              << format_double(g.center(2, i4));
          for (int k = 0; k < 5; ++k) out << ',' << format_double(u[k]);
          out << '\n';
        }
  }
  std::ofstream(fs::path(directory) / "meta.json") << meta.dump(2) << '\n';
}

Field read_field_csv(const std::string& directory) {
  namespace fs = std::filesystem;
  std::ifstream meta_in(fs::path(directory) / "meta.json");
  if (!meta_in) fail(ErrorKind::Io, "cannot open field meta.json");
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  GridSpec g;
  g.lo = meta.at("grid").at("lo").get<Vec3>();
  g.hi = meta.at("grid").at("hi").get<Vec3>();
  g.cells = meta.at("grid").at("cells").get<std::array<int, 3>>();

  std::vector<Field::Snapshot> snaps;
  const auto& times = meta.at("times");
  const auto& files = meta.at("files");
  for (std::size_t s = 0; s < files.size(); ++s) {
    Field::Snapshot snap;
    snap.time = times.at(s).get<double>();
    snap.data.reserve(5 * g.cell_count());
    std::ifstream in(fs::path(directory) / files.at(s).get<std::string>());
    if (!in) fail(ErrorKind::Io, "cannot open field CSV for reading");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string tok;
      int col = 0;
      while (std::getline(ss, tok, ',')) {
        if (col >= 3) snap.data.push_back(std::strtod(tok.c_str(), nullptr));
        ++col;
      }
    }
    if (snap.data.size() != 5 * g.cell_count())
      fail(ErrorKind::Io, "field CSV has unexpected row count");
    snaps.push_back(std::move(snap));
  }
  return Field::discrete(g, std::move(snaps));
}

}  // namespace balcons
